"""Gaussian diffusion over positions, atom-type vectors and bond-type vectors.

Categorical atom and bond types are diffused as continuous relaxations of
their one-hot encodings; all three channels share one noise schedule.
Timesteps run ``1..T``; ``alpha_bar[0] == 1`` is stored so that tables are
indexed directly by ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .molgraph import N_BOND_CLASSES, N_ELEMENTS, BondClass, MolecularGraph

DEFAULT_T = 1000
DEFAULT_BETA_MIN = 1e-4
DEFAULT_BETA_MAX = 0.02


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Arrays are length ``T + 1``; entry 0 is the identity step (beta=0)."""

    kind: str
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    @property
    def T(self) -> int:
        return len(self.beta) - 1

    @property
    def ident(self) -> str:
        return f"{self.kind}-T{self.T}-{self.beta[1]:.6g}-{self.beta[-1]:.6g}"

    def posterior_variance(self, t: int) -> float:
        _check_t(self, t, low=1)
        return float((1.0 - self.alpha_bar[t - 1]) * self.beta[t] / (1.0 - self.alpha_bar[t]))

    def to_table(self) -> str:
        rows = ["t\tbeta\talpha\talpha_bar"]
        rows += [f"{t}\t{float(self.beta[t])!r}\t{float(self.alpha[t])!r}\t{float(self.alpha_bar[t])!r}" for t in range(self.T + 1)]
        return "\n".join(rows) + "\n"

    @classmethod
    def from_table(cls, text: str, kind: str = "table") -> "NoiseSchedule":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].split()[:4] != ["t", "beta", "alpha", "alpha_bar"]:
            raise ValueError("schedule table needs a 't beta alpha alpha_bar' header")
        rows = [ln.split() for ln in lines[1:]]
        if [int(r[0]) for r in rows] != list(range(len(rows))):
            raise ValueError("schedule table rows must be t = 0..T in order")
        beta = np.array([float(r[1]) for r in rows])
        return _assemble(kind, beta[1:])


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _assemble(kind: str, beta_1T: np.ndarray) -> NoiseSchedule:
    beta = np.concatenate([[0.0], np.asarray(beta_1T, dtype=np.float64)])
    alpha = 1.0 - beta
    alpha_bar = np.empty_like(alpha)
    alpha_bar[0] = 1.0
    for t in range(1, len(beta)):
        alpha_bar[t] = alpha[t] * alpha_bar[t - 1]
    return NoiseSchedule(kind, _freeze(beta), _freeze(alpha), _freeze(alpha_bar))


def schedule_from_betas(betas, kind: str = "custom") -> NoiseSchedule:
    """Schedule from explicit ``beta_1..beta_T``; zeros are allowed here."""
    beta = np.asarray(betas, dtype=np.float64).ravel()
    if len(beta) < 1 or np.any(beta < 0.0) or np.any(beta >= 1.0):
        raise ValueError("betas must be a nonempty sequence in [0, 1)")
    return _assemble(kind, beta)


def make_schedule(
    kind: str = "linear",
    T: int = DEFAULT_T,
    beta_min: float = DEFAULT_BETA_MIN,
    beta_max: float = DEFAULT_BETA_MAX,
) -> NoiseSchedule:
    """Build a noise schedule.

    ``linear`` interpolates beta from ``beta_min`` to ``beta_max``. ``cosine``
    derives beta from the squared-cosine alpha_bar curve, clipped into
    ``[beta_min, beta_max]``.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (0.0 < beta_min <= beta_max < 1.0):
        raise ValueError(f"need 0 < beta_min <= beta_max < 1, got {beta_min}, {beta_max}")
    if kind == "linear":
        beta = np.linspace(beta_min, beta_max, T) if T > 1 else np.array([beta_min])
    elif kind == "cosine":
        s = 0.008
        steps = np.arange(T + 1) / T
        f = np.cos((steps + s) / (1 + s) * math.pi / 2) ** 2
        beta = np.clip(1.0 - f[1:] / f[:-1], beta_min, beta_max)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    return _assemble(kind, beta)


def _check_t(schedule: NoiseSchedule, t: int, low: int) -> None:
    if not (low <= t <= schedule.T):
        raise ValueError(f"timestep {t} outside [{low}, {schedule.T}]")


@dataclass(frozen=True, eq=False)
class DiffusionState:
    """Continuous ligand state at timestep ``t``.

    ``b`` is ``(n, n, 6)``, symmetric in its first two axes with a zero
    diagonal.
    """

    r: np.ndarray
    a: np.ndarray
    b: np.ndarray
    t: int = 0
    fixed_mask: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.r)
        if self.r.shape != (n, 3) or self.a.shape != (n, N_ELEMENTS) or self.b.shape != (n, n, N_BOND_CLASSES):
            raise ValueError(f"inconsistent state shapes {self.r.shape} {self.a.shape} {self.b.shape}")
        mask = np.zeros(n, bool) if self.fixed_mask is None else np.asarray(self.fixed_mask, bool)
        if mask.shape != (n,):
            raise ValueError("fixed_mask length must equal atom count")
        object.__setattr__(self, "fixed_mask", mask)

    @property
    def n_atoms(self) -> int:
        return len(self.r)

    @classmethod
    def from_graph(cls, graph: MolecularGraph, fixed_mask=None, origin=None) -> "DiffusionState":
        n = graph.n_atoms
        b = np.zeros((n, n, N_BOND_CLASSES))
        b[np.arange(n)[:, None], np.arange(n)[None, :], graph.bond_matrix.astype(np.int64)] = 1.0
        b[np.arange(n), np.arange(n), :] = 0.0
        r = np.array(graph.positions)
        if origin is not None:
            r = r - np.asarray(origin, dtype=float)
        return cls(r, np.array(graph.atom_types), b, 0, fixed_mask)

    def copy(self, **changes) -> "DiffusionState":
        return replace(self, **changes)


def _noise_like(state: DiffusionState, rng: np.random.Generator):
    n = state.n_atoms
    er = rng.standard_normal((n, 3))
    ea = rng.standard_normal((n, N_ELEMENTS))
    return er, ea, symmetric_bond_noise(n, rng)


def _pair_mask(mask: np.ndarray) -> np.ndarray:
    return mask[:, None] & mask[None, :]


def _blend(state: DiffusionState, r, a, b, t: int) -> DiffusionState:
    """Keep masked rows (and fully-masked bond pairs) from ``state``."""
    m = state.fixed_mask
    if m.any():
        r = np.where(m[:, None], state.r, r)
        a = np.where(m[:, None], state.a, a)
        b = np.where(_pair_mask(m)[:, :, None], state.b, b)
    return DiffusionState(r, a, b, t, m.copy())


def forward_step(state: DiffusionState, schedule: NoiseSchedule, t: int, rng=None) -> DiffusionState:
    """Sample ``x^t ~ N(sqrt(1 - beta_t) x^{t-1}, beta_t I)`` for unmasked entries."""
    _check_t(schedule, t, low=1)
    rng = np.random.default_rng(rng)
    er, ea, eb = _noise_like(state, rng)
    keep, sd = math.sqrt(1.0 - schedule.beta[t]), math.sqrt(schedule.beta[t])
    return _blend(state, keep * state.r + sd * er, keep * state.a + sd * ea, keep * state.b + sd * eb, t)


def forward_jump(state: DiffusionState, schedule: NoiseSchedule, t: int, rng=None) -> DiffusionState:
    """Sample ``x^t ~ N(sqrt(abar_t) x^0, (1 - abar_t) I)`` directly."""
    _check_t(schedule, t, low=0)
    if t == 0:
        return state.copy(r=state.r.copy(), a=state.a.copy(), b=state.b.copy(), t=0)
    rng = np.random.default_rng(rng)
    er, ea, eb = _noise_like(state, rng)
    keep, sd = math.sqrt(schedule.alpha_bar[t]), math.sqrt(1.0 - schedule.alpha_bar[t])
    return _blend(state, keep * state.r + sd * er, keep * state.a + sd * ea, keep * state.b + sd * eb, t)


def posterior_coefficients(schedule: NoiseSchedule, t: int) -> tuple[float, float, float]:
    """``(c0, ct, var)`` with posterior mean ``c0 * x0 + ct * xt``."""
    _check_t(schedule, t, low=1)
    if t == 1:
        # alpha_bar_0 = 1: the posterior collapses onto x0
        return 1.0, 0.0, 0.0
    ab_t, ab_prev = schedule.alpha_bar[t], schedule.alpha_bar[t - 1]
    denom = 1.0 - ab_t
    if denom < 1e-12:
        raise ValueError(f"degenerate posterior at t={t}: 1 - alpha_bar = {denom:g}")
    beta = schedule.beta[t]
    c0 = math.sqrt(ab_prev) * beta / denom
    ct = math.sqrt(schedule.alpha[t]) * (1.0 - ab_prev) / denom
    var = (1.0 - ab_prev) * beta / denom
    return c0, ct, var


def posterior_params(x0, xt, t: int, schedule: NoiseSchedule):
    """Mean and variance of ``q(x^{t-1} | x^t, x^0)``."""
    c0, ct, var = posterior_coefficients(schedule, t)
    return c0 * np.asarray(x0, dtype=float) + ct * np.asarray(xt, dtype=float), var


def apply_mask(state: DiffusionState, fixed_mask, reference: DiffusionState) -> DiffusionState:
    """Overwrite fixed rows of ``r``/``a`` and fixed-fixed ``b`` pairs from ``reference``."""
    m = np.asarray(fixed_mask, dtype=bool)
    if m.shape != (state.n_atoms,) or reference.r.shape != state.r.shape:
        raise ValueError("mask/reference shape does not match state")
    r = np.where(m[:, None], reference.r, state.r)
    a = np.where(m[:, None], reference.a, state.a)
    b = np.where(_pair_mask(m)[:, :, None], reference.b, state.b)
    return DiffusionState(r, a, b, state.t, m.copy())


def symmetric_bond_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    iu, ju = np.triu_indices(n, k=1)
    out = np.zeros((n, n, N_BOND_CLASSES))
    upper = rng.standard_normal((len(iu), N_BOND_CLASSES))
    out[iu, ju] = upper
    out[ju, iu] = upper
    return out


def empty_bonds(n: int) -> np.ndarray:
    """Bond tensor with every off-diagonal pair set to the absorbing class."""
    b = np.zeros((n, n, N_BOND_CLASSES))
    b[..., BondClass.NONE] = 1.0
    b[np.arange(n), np.arange(n), :] = 0.0
    return b
