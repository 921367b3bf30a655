"""Run configuration: INI-style sections per command, every key typed and range-checked.

Unknown sections or keys are errors; a misspelled hyperparameter should stop
a run, not silently fall back to a default.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from typing import Any

from .denoiser import DEFAULT_LAMBDA_ATOM, DEFAULT_LAMBDA_BOND, DenoiserConfig, TrainConfig
from .diffusion import DEFAULT_BETA_MAX, DEFAULT_BETA_MIN, DEFAULT_T, NoiseSchedule, make_schedule
from .evalgeom import GeometrySettings


class ConfigError(ValueError):
    pass


def _opt(default, lo=None, hi=None, choices=None, lo_open=False, hi_open=False):
    meta = {"lo": lo, "hi": hi, "choices": choices, "lo_open": lo_open, "hi_open": hi_open}
    return field(default=default, metadata=meta)


@dataclass
class ScheduleSection:
    kind: str = _opt("linear", choices=("linear", "cosine"))
    T: int = _opt(DEFAULT_T, lo=1, hi=100000)
    beta_min: float = _opt(DEFAULT_BETA_MIN, lo=0.0, hi=1.0, lo_open=True)
    beta_max: float = _opt(DEFAULT_BETA_MAX, lo=0.0, hi=1.0, lo_open=True)


@dataclass
class DenoiserSection:
    layers: int = _opt(6, lo=1, hi=64)
    hidden_dim: int = _opt(32, lo=1, hi=4096)
    time_embed_dim: int = _opt(16, lo=2, hi=4096)
    edge_hidden_dim: int = _opt(16, lo=1, hi=4096)
    message_cutoff: float = _opt(5.0, lo=0.0, lo_open=True)
    parameterization: str = _opt("posterior", choices=("posterior", "direct"))
    radial_basis: int = _opt(16, lo=0, hi=4096)


@dataclass
class ToysetSection:
    n_templates: int = _opt(8, lo=1)
    atoms_per: int = _opt(0, lo=0)  # 0 means any motif size
    shell_atoms: int = _opt(30, lo=1)


@dataclass
class TrainSection:
    data: str = _opt("")
    steps: int = _opt(2000, lo=0)
    learning_rate: float = _opt(5e-3, lo=0.0)
    batch_size: int = _opt(16, lo=1)
    lambda_atom: float = _opt(DEFAULT_LAMBDA_ATOM, lo=0.0)
    lambda_bond: float = _opt(DEFAULT_LAMBDA_BOND, lo=0.0)
    grad_clip: float = _opt(0.0, lo=0.0)
    init_seed_offset: int = _opt(0, lo=0)
    target: str = _opt("posterior_mean", choices=("posterior_mean", "sample"))
    lr_decay: str = _opt("none", choices=("none", "cosine"))
    t_power: float = _opt(0.0, lo=0.0)
    ema_decay: float = _opt(0.99, lo=0.0, hi=1.0, hi_open=True)


@dataclass
class SampleSection:
    checkpoint: str = _opt("")
    pocket: str = _opt("")
    n: int = _opt(10, lo=1)
    n_atoms: str = _opt("auto")
    fixed: str = _opt("")
    fixed_atoms: str = _opt("all")
    largest_component: bool = _opt(False)


@dataclass
class EvalSection:
    inputs: str = _opt("")
    reference: str = _opt("")
    pockets: str = _opt("")
    bin_width: float = _opt(0.02, lo=0.0, lo_open=True)
    bond_tolerance: float = _opt(0.25, lo=0.0)
    clash_factor: float = _opt(0.75, lo=0.0)


@dataclass
class PmiSection:
    molecules: str = _opt("")
    pockets: str = _opt("")
    cutoff: float = _opt(4.0, lo=0.0, lo_open=True)
    log_base: float = _opt(math.e, lo=0.0, lo_open=True)
    top_k: int = _opt(5, lo=1)
    exclude_amide: bool = _opt(False)
    binder_chains: str = _opt("")
    require_target_excess: bool = _opt(False)


SECTIONS = {
    "schedule": ScheduleSection,
    "denoiser": DenoiserSection,
    "toyset": ToysetSection,
    "train": TrainSection,
    "sample": SampleSection,
    "eval": EvalSection,
    "pmi": PmiSection,
}


@dataclass
class RunConfig:
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    denoiser: DenoiserSection = field(default_factory=DenoiserSection)
    toyset: ToysetSection = field(default_factory=ToysetSection)
    train: TrainSection = field(default_factory=TrainSection)
    sample: SampleSection = field(default_factory=SampleSection)
    eval: EvalSection = field(default_factory=EvalSection)
    pmi: PmiSection = field(default_factory=PmiSection)

    def __post_init__(self):
        for name in SECTIONS:
            _check_section(name, getattr(self, name))
        if self.schedule.beta_min > self.schedule.beta_max:
            raise ConfigError("schedule.beta_min must not exceed schedule.beta_max")
        if self.denoiser.time_embed_dim % 2:
            raise ConfigError("denoiser.time_embed_dim must be even")

    # typed views for the library layers

    def make_schedule(self) -> NoiseSchedule:
        s = self.schedule
        return make_schedule(s.kind, s.T, s.beta_min, s.beta_max)

    def denoiser_config(self) -> DenoiserConfig:
        return DenoiserConfig(**{f.name: getattr(self.denoiser, f.name) for f in fields(DenoiserSection)})

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(
            steps=t.steps,
            learning_rate=t.learning_rate,
            batch_size=t.batch_size,
            lambda_atom=t.lambda_atom,
            lambda_bond=t.lambda_bond,
            grad_clip=t.grad_clip,
            target=t.target,
            lr_decay=t.lr_decay,
            t_power=t.t_power,
            ema_decay=t.ema_decay,
        )

    def geometry_settings(self) -> GeometrySettings:
        return GeometrySettings(bond_tolerance=self.eval.bond_tolerance, clash_factor=self.eval.clash_factor)


def _check_section(name: str, sec) -> None:
    for f in fields(sec):
        v = getattr(sec, f.name)
        m = f.metadata
        key = f"{name}.{f.name}"
        if m.get("choices") and v not in m["choices"]:
            raise ConfigError(f"{key} must be one of {', '.join(m['choices'])}; got {v!r}")
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            if not math.isfinite(v):
                raise ConfigError(f"{key} must be finite")
            lo, hi = m.get("lo"), m.get("hi")
            if lo is not None and (v < lo or (m.get("lo_open") and v == lo)):
                raise ConfigError(f"{key} = {v} is below its allowed range")
            if hi is not None and (v > hi or (m.get("hi_open") and v == hi)):
                raise ConfigError(f"{key} = {v} is above its allowed range")


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key: str, raw: str, kind) -> Any:
    raw = raw.strip()
    try:
        if kind in (bool, "bool"):
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {getattr(kind, '__name__', kind)}") from None
    return raw


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text: str) -> RunConfig:
    """Read an INI document; every section and key must be known."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    sections = {}
    for name in cp.sections():
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        cls = SECTIONS[name]
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for key, raw in cp.items(name):
            if key not in types:
                raise ConfigError(f"unknown key {name}.{key}")
            values[key] = _convert(f"{name}.{key}", raw, types[key])
        sections[name] = cls(**values)
    return RunConfig(**sections)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical form: every section and key in declaration order."""
    lines = []
    for name in SECTIONS:
        sec = getattr(cfg, name)
        lines.append(f"[{name}]")
        for f in fields(sec):
            lines.append(f"{f.name} = {_format(getattr(sec, f.name))}")
        lines.append("")
    return "\n".join(lines)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def with_overrides(cfg: RunConfig, section: str, **values) -> RunConfig:
    """Copy of ``cfg`` with fields of one section replaced (and re-validated)."""
    return replace(cfg, **{section: replace(getattr(cfg, section), **values)})
