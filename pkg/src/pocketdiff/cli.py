"""``pocketdiff`` command line: toyset, train, sample, eval, pmi.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, serialize_config, with_overrides
from .denoiser import (
    CheckpointError,
    NumericalError,
    TrainItem,
    init_params,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .diffusion import make_schedule
from .evalgeom import ANALYZED_BONDS, bond_length_histogram, geometry_checks, js_divergence, pass_rate
from .molgraph import ParseError, parse_pocket_pdb, parse_sdf, parse_sdf_multi, serialize_pocket_pdb, serialize_sdf
from .pmi import assign_replacements, composition_csv, fragment, pmi_table, split_binder, top_report_csv
from .sampler import FixedAtoms, SampleRequest, atom_count_stats, largest_component, sample
from .toyset import make_toyset

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class DataError(Exception):
    """Missing, unpaired or unreadable inputs."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def child_seeds(seed: int, n: int) -> list[int]:
    """Independent per-item seeds spawned from one run seed."""
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in np.random.SeedSequence(seed).spawn(n)]


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: Path, text: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(text, bytes):
        path.write_bytes(text)
    else:
        path.write_text(text, encoding="utf-8", newline="\n")


def _parse_file(path: Path, parser):
    try:
        return parser(_read(path))
    except ParseError as exc:
        raise DataError(f"{path}: {exc}") from None


def _sdf_files(spec: str) -> list[Path]:
    p = Path(spec)
    if p.is_dir():
        return sorted(p.glob("*.sdf"))
    if p.is_file():
        return [p]
    raise DataError(f"no such file or directory: {spec}")


def _load_graphs(spec: str):
    graphs = []
    for path in _sdf_files(spec):
        try:
            graphs.extend(parse_sdf_multi(_read(path)))
        except ParseError as exc:
            raise DataError(f"{path}: {exc}") from None
    return graphs


def _paired(lig_dir: Path, pocket_dir: Path) -> list[tuple[str, Path, Path]]:
    if not lig_dir.is_dir() or not pocket_dir.is_dir():
        raise DataError(f"expected directories {lig_dir} and {pocket_dir}")
    ligs = {p.stem: p for p in lig_dir.glob("*.sdf")}
    pockets = {p.stem: p for p in pocket_dir.glob("*.pdb")}
    unpaired = sorted(set(ligs) ^ set(pockets))
    if unpaired:
        raise DataError("unpaired files: " + ", ".join(unpaired))
    if not ligs:
        raise DataError(f"no SDF files in {lig_dir}")
    return [(stem, ligs[stem], pockets[stem]) for stem in sorted(ligs)]


def _csv(rows, header, meta: dict | None = None) -> str:
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def cmd_toyset(cfg: RunConfig, seed: int, out: Path) -> None:
    s = cfg.toyset
    pairs = make_toyset(s.n_templates, s.atoms_per or None, seed, s.shell_atoms)
    for lig, pocket in pairs:
        _write(out / "ligands" / f"{lig.name}.sdf", serialize_sdf(lig))
        _write(out / "pockets" / f"{lig.name}.pdb", serialize_pocket_pdb(pocket))


def cmd_train(cfg: RunConfig, seed: int, out: Path) -> None:
    if not cfg.train.data:
        raise DataError("train.data is not set")
    data = Path(cfg.train.data)
    items, ligands = [], []
    for _, lp, pp in _paired(data / "ligands", data / "pockets"):
        lig = _parse_file(lp, parse_sdf)
        pocket = _parse_file(pp, parse_pocket_pdb)
        ligands.append(lig)
        items.append(TrainItem.from_pair(lig, pocket))
    dcfg, tcfg, sched = cfg.denoiser_config(), cfg.train_config(), cfg.make_schedule()
    init_seed, train_seed = child_seeds(seed, 2)
    params = init_params(dcfg, init_seed)
    params, trace = train(items, dcfg, sched, tcfg, rng=train_seed, params=params)
    s = cfg.schedule
    extra = {
        "schedule": {"kind": s.kind, "T": s.T, "beta_min": s.beta_min, "beta_max": s.beta_max},
        "atom_count_stats": {str(k): v for k, v in atom_count_stats(ligands).items()},
        "seed": seed,
    }
    _write(out / "checkpoint.pdck", save_checkpoint(params, dcfg, extra))
    meta = {
        "lambda_atom": repr(tcfg.lambda_atom),
        "lambda_bond": repr(tcfg.lambda_bond),
        "schedule": sched.ident,
        "seed": seed,
    }
    rows = [(k, repr(float(x.pos)), repr(float(x.atom)), repr(float(x.bond)), repr(float(x.total))) for k, x in enumerate(trace)]
    _write(out / "loss.csv", _csv(rows, ["step", "L_pos", "L_atom", "L_bond", "total"], meta))


def _load_model(path: str):
    if not path:
        raise DataError("sample.checkpoint is not set")
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    try:
        params, dcfg, extra = load_checkpoint(data)
    except CheckpointError as exc:
        raise DataError(f"{path}: {exc}") from None
    s = extra.get("schedule")
    if not s:
        raise DataError(f"{path}: checkpoint carries no schedule")
    sched = make_schedule(s["kind"], s["T"], s["beta_min"], s["beta_max"])
    stats = {int(k): float(v) for k, v in extra.get("atom_count_stats", {}).items()}
    return params, dcfg, sched, stats


def _fixed_atoms(cfg: RunConfig) -> FixedAtoms | None:
    s = cfg.sample
    if not s.fixed:
        return None
    ref = _parse_file(Path(s.fixed), parse_sdf)
    if s.fixed_atoms.strip().lower() == "all":
        mask = np.ones(ref.n_atoms, dtype=bool)
    else:
        mask = np.zeros(ref.n_atoms, dtype=bool)
        try:
            idx = [int(x) for x in s.fixed_atoms.split(",") if x.strip()]
        except ValueError:
            raise ConfigError("sample.fixed_atoms must be 'all' or comma-separated atom indices") from None
        if any(i < 0 or i >= ref.n_atoms for i in idx):
            raise ConfigError("sample.fixed_atoms index out of range")
        mask[idx] = True
    return FixedAtoms(ref, mask)


def cmd_sample(cfg: RunConfig, seed: int, out: Path) -> None:
    s = cfg.sample
    params, dcfg, sched, stats = _load_model(s.checkpoint)
    if not s.pocket:
        raise DataError("sample.pocket is not set")
    pocket = _parse_file(Path(s.pocket), parse_pocket_pdb)
    fixed = _fixed_atoms(cfg)
    n_atoms = "auto" if s.n_atoms.strip().lower() == "auto" else int(s.n_atoms)
    for k, child in enumerate(child_seeds(seed, s.n)):
        req = SampleRequest(pocket, params, dcfg, sched, n_atoms, child, fixed, atom_count_stats=stats or None)
        graph, summary = sample(req)
        if s.largest_component:
            graph = largest_component(graph)
        name = f"sample_{k:04d}"
        graph = type(graph)(graph.positions, graph.atom_types, graph.bond_matrix, name)
        report = geometry_checks(graph, pocket, cfg.geometry_settings())
        record = summary.to_dict()
        record["index"] = k
        record["run_seed"] = seed
        record["checks"] = report.to_dict()
        _write(out / f"{name}.sdf", serialize_sdf(graph))
        _write(out / f"{name}.json", json.dumps(record, indent=2, sort_keys=True) + "\n")


def cmd_eval(cfg: RunConfig, seed: int, out: Path) -> None:
    e = cfg.eval
    if not e.inputs:
        raise DataError("eval.inputs is not set")
    graphs = _load_graphs(e.inputs)
    if not graphs:
        raise DataError(f"no molecules found in {e.inputs}")
    reference = _load_graphs(e.reference) if e.reference else None
    pocket = _parse_file(Path(e.pockets), parse_pocket_pdb) if e.pockets else None
    jsd_rows = []
    for key in ANALYZED_BONDS:
        h = bond_length_histogram(graphs, key, e.bin_width)
        _write(out / f"hist_{key.slug}.csv", h.to_csv())
        if reference is not None:
            href = bond_length_histogram(reference, key, e.bin_width)
            if h.total and href.total:
                jsd_rows.append((str(key), h.total, href.total, repr(float(js_divergence(h, href)))))
            else:
                jsd_rows.append((str(key), h.total, href.total, "nan"))
    if reference is not None:
        _write(out / "jsd.csv", _csv(jsd_rows, ["bond", "n_generated", "n_reference", "jsd_nats"]))
    settings = cfg.geometry_settings()
    reports = [geometry_checks(g, pocket, settings) for g in graphs]
    overall, waterfall = pass_rate(reports)
    _write(out / "waterfall.csv", waterfall.to_csv())
    check_rows = [(k, g.name, *(int(r.passed[c]) for c in r.passed), int(r.ok)) for k, (g, r) in enumerate(zip(graphs, reports))]
    names = list(reports[0].passed)
    _write(out / "checks.csv", _csv(check_rows, ["index", "name", *names, "all"]))


def cmd_pmi(cfg: RunConfig, seed: int, out: Path) -> None:
    p = cfg.pmi
    if not p.molecules or not p.pockets:
        raise DataError("pmi.molecules and pmi.pockets must both be set")
    binder = [c.strip() for c in p.binder_chains.split(",") if c.strip()]
    pairs, skipped = [], []
    for stem, lp, pp in _paired(Path(p.molecules), Path(p.pockets)):
        pocket = _parse_file(pp, parse_pocket_pdb)
        if binder:
            pocket, n_target, n_binder = split_binder(pocket, binder)
            if p.require_target_excess and n_target <= n_binder:
                skipped.append(stem)
                continue
            if len(pocket) == 0:
                skipped.append(stem)
                continue
        for graph in _parse_file(lp, parse_sdf_multi):
            frags = fragment(graph, p.exclude_amide)
            pairs.extend(assign_replacements(frags, graph.positions, pocket, p.cutoff))
    if not pairs:
        raise DataError("no fragment/residue contacts found")
    table = pmi_table(pairs, p.log_base)
    _write(out / "pmi.csv", table.to_csv())
    _write(out / "top_fragments.csv", top_report_csv(table, p.top_k))
    _write(out / "composition.csv", composition_csv(table))
    if skipped:
        _write(out / "skipped.txt", "\n".join(skipped) + "\n")


COMMANDS = {
    "toyset": cmd_toyset,
    "train": cmd_train,
    "sample": cmd_sample,
    "eval": cmd_eval,
    "pmi": cmd_pmi,
}

_HELP = {
    "toyset": "write synthetic ligand/pocket pairs",
    "train": "fit the denoiser on a ligand/pocket directory",
    "sample": "generate ligands for one pocket",
    "eval": "bond-length histograms, JSD and geometry checks",
    "pmi": "fragment/residue replacement PMI ranking",
}

# command-line flags that override one config key each: flag -> (section, key, type)
_OVERRIDES = {
    "toyset": [("--n-templates", "toyset", "n_templates", int), ("--atoms-per", "toyset", "atoms_per", int)],
    "train": [("--data", "train", "data", str), ("--steps", "train", "steps", int)],
    "sample": [
        ("--checkpoint", "sample", "checkpoint", str),
        ("--pocket", "sample", "pocket", str),
        ("--n", "sample", "n", int),
        ("--n-atoms", "sample", "n_atoms", str),
        ("--fixed", "sample", "fixed", str),
        ("--fixed-atoms", "sample", "fixed_atoms", str),
    ],
    "eval": [("--inputs", "eval", "inputs", str), ("--reference", "eval", "reference", str), ("--pockets", "eval", "pockets", str)],
    "pmi": [("--molecules", "pmi", "molecules", str), ("--pockets", "pmi", "pockets", str), ("--top-k", "pmi", "top_k", int)],
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pocketdiff", description="Pocket-conditioned 3D molecular graph diffusion.")
    parser.add_argument("--version", action="version", version=f"pocketdiff {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=_HELP[name], description=_HELP[name])
        sp.add_argument("--config", help="INI run configuration")
        sp.add_argument("--seed", type=int, default=0, help="run seed (default 0)")
        sp.add_argument("--out", required=True, help="output directory")
        for flag, section, key, typ in _OVERRIDES[name]:
            sp.add_argument(flag, dest=f"ov_{key}", type=typ, default=None, metavar=key.upper(), help=f"overrides [{section}] {key}")
        if name == "sample":
            sp.add_argument(
                "--largest-component",
                dest="ov_largest_component",
                action="store_const",
                const=True,
                default=None,
                help="keep only the largest connected fragment of each sample",
            )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if args.seed < 0:
        parser.error("--seed must be >= 0")
    out = Path(args.out)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        for _, section, key, _ in _OVERRIDES[args.command]:
            v = getattr(args, f"ov_{key}")
            if v is not None:
                cfg = with_overrides(cfg, section, **{key: v})
        if getattr(args, "ov_largest_component", None):
            cfg = with_overrides(cfg, "sample", largest_component=True)
        RunConfig(**{k: getattr(cfg, k) for k in cfg.__dataclass_fields__})  # re-validate overrides
        out.mkdir(parents=True, exist_ok=True)
        _write(out / "run_config.ini", serialize_config(cfg))
        COMMANDS[args.command](cfg, args.seed, out)
    except (NumericalError, FloatingPointError) as exc:
        print(f"pocketdiff: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DataError, ParseError, CheckpointError, OSError, ValueError, KeyError) as exc:
        print(f"pocketdiff: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
