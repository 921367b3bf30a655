"""Bond-length distributions and a six-check geometric validity battery."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from . import kernels
from .molgraph import MAX_VALENCE, BondClass, Element, MolecularGraph, Pocket, atom_valences

_BOND_SYMBOL = {BondClass.SINGLE: "-", BondClass.DOUBLE: "=", BondClass.TRIPLE: "#", BondClass.AROMATIC: ":"}


@dataclass(frozen=True, order=True)
class BondKey:
    """Element pair plus bond class; the pair is stored carbon-first."""

    first: str
    second: str
    bond: BondClass

    @classmethod
    def make(cls, e1, e2, bond: BondClass) -> "BondKey":
        a, b = str(getattr(e1, "value", e1)), str(getattr(e2, "value", e2))
        if a != "C" and (b == "C" or b < a):
            a, b = b, a
        return cls(a, b, BondClass(bond))

    @classmethod
    def parse(cls, text: str) -> "BondKey":
        for cls_, sym in _BOND_SYMBOL.items():
            if sym in text:
                e1, e2 = text.split(sym)
                return cls.make(e1, e2, cls_)
        raise ValueError(f"unparsable bond key {text!r}")

    def __str__(self) -> str:
        return f"{self.first}{_BOND_SYMBOL[self.bond]}{self.second}"

    @property
    def slug(self) -> str:
        names = {BondClass.SINGLE: "single", BondClass.DOUBLE: "double", BondClass.TRIPLE: "triple", BondClass.AROMATIC: "aromatic"}
        return f"{self.first}_{names[self.bond]}_{self.second}"


ANALYZED_BONDS: tuple[BondKey, ...] = tuple(
    BondKey.parse(s) for s in ("C-C", "C=C", "C-O", "C=O", "C-N", "C=N", "C-Cl", "C-S", "C-F")
)

# equilibrium lengths in angstrom
REFERENCE_LENGTHS: dict[BondKey, float] = {
    BondKey.parse("C-C"): 1.54, BondKey.parse("C=C"): 1.34,
    BondKey.parse("C-O"): 1.43, BondKey.parse("C=O"): 1.21,
    BondKey.parse("C-N"): 1.47, BondKey.parse("C=N"): 1.28,
    BondKey.parse("C-Cl"): 1.77, BondKey.parse("C-S"): 1.82,
    BondKey.parse("C-F"): 1.35,
}
AROMATIC_LENGTH = 1.39

# Pyykko covalent radii (single, double, triple), used for pairs not in the table
_COVALENT_RADII = {
    "C": (0.75, 0.67, 0.60), "N": (0.71, 0.60, 0.54), "O": (0.63, 0.57, 0.53),
    "F": (0.64, 0.59, 0.53), "P": (1.11, 1.02, 0.94), "S": (1.03, 0.94, 0.95),
    "Cl": (0.99, 0.95, 0.93), "Br": (1.14, 1.09, 1.10),
}

VDW_RADII = {
    Element.C: 1.70, Element.N: 1.55, Element.O: 1.52, Element.F: 1.47,
    Element.P: 1.80, Element.S: 1.80, Element.Cl: 1.75, Element.Br: 1.85,
}

CHECK_NAMES = ("bond_lengths", "internal_clash", "pocket_clash", "valence", "connected", "finite")


@dataclass
class GeometrySettings:
    bond_tolerance: float = 0.25
    clash_factor: float = 0.75
    reference_lengths: dict = field(default_factory=lambda: dict(REFERENCE_LENGTHS))
    aromatic_length: float = AROMATIC_LENGTH
    vdw_radii: dict = field(default_factory=lambda: dict(VDW_RADII))
    # intra-ligand pairs at most this many bonds apart are exempt from the clash test
    clash_exclusion_bonds: int = 2


def reference_length(e1, e2, bond: BondClass, settings: GeometrySettings | None = None) -> float:
    s = settings or GeometrySettings()
    if bond == BondClass.AROMATIC:
        return s.aromatic_length
    key = BondKey.make(e1, e2, bond)
    if key in s.reference_lengths:
        return s.reference_lengths[key]
    k = int(bond)
    return _COVALENT_RADII[key.first][k] + _COVALENT_RADII[key.second][k]


def bond_lengths(graph: MolecularGraph, key: BondKey) -> np.ndarray:
    """Lengths of every bond instance matching ``key``."""
    elems = graph.elements
    out = []
    for i, j, c in graph.bonds():
        if BondKey.make(elems[i], elems[j], c) == key:
            out.append(float(np.linalg.norm(graph.positions[i] - graph.positions[j])))
    return np.array(out)


# ---------------------------------------------------------------------------
# histograms


@dataclass(frozen=True, eq=False)
class Histogram:
    """Uniform bins over ``[edges[0], edges[-1])`` plus under/overflow counts."""

    edges: np.ndarray
    counts: np.ndarray
    underflow: int = 0
    overflow: int = 0

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    def full_counts(self) -> np.ndarray:
        return np.concatenate([[self.underflow], self.counts, [self.overflow]]).astype(np.int64)

    def rows(self) -> list[tuple[float, float, int]]:
        lo = np.concatenate([[-np.inf], self.edges])
        hi = np.concatenate([self.edges, [np.inf]])
        return [(float(a), float(b), int(c)) for a, b, c in zip(lo, hi, self.full_counts())]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in self.rows():
            w.writerow([f"{lo:.4f}", f"{hi:.4f}", c])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "edges": [round(float(e), 10) for e in self.edges],
            "counts": [int(c) for c in self.counts],
            "underflow": self.underflow,
            "overflow": self.overflow,
            "total": self.total,
        }


def make_edges(bin_width: float, lo: float = 0.5, hi: float = 3.0) -> np.ndarray:
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    nbins = int(round((hi - lo) / bin_width))
    if nbins < 1 or abs(nbins * bin_width - (hi - lo)) > 1e-9:
        raise ValueError(f"bin width {bin_width} does not divide [{lo}, {hi}]")
    return lo + bin_width * np.arange(nbins + 1)


def histogram_from_values(values, edges: np.ndarray) -> Histogram:
    values = np.asarray(values, dtype=float)
    counts = np.zeros(len(edges) - 1, dtype=np.int64)
    under = int(np.sum(values < edges[0]))
    over = int(np.sum(values >= edges[-1]))
    inside = values[(values >= edges[0]) & (values < edges[-1])]
    idx = np.searchsorted(edges, inside, side="right") - 1
    np.add.at(counts, idx, 1)
    return Histogram(edges, counts, under, over)


def bond_length_histogram(graphs, key: BondKey, bin_width: float = 0.02, lo: float = 0.5, hi: float = 3.0) -> Histogram:
    edges = make_edges(bin_width, lo, hi)
    vals = [bond_lengths(g, key) for g in graphs]
    return histogram_from_values(np.concatenate(vals) if vals else np.empty(0), edges)


def js_divergence(h1: Histogram, h2: Histogram) -> float:
    """Jensen-Shannon divergence in nats over all bins incl. under/overflow."""
    if h1.edges.shape != h2.edges.shape or not np.array_equal(h1.edges, h2.edges):
        raise ValueError("histograms have different binning")
    c1, c2 = h1.full_counts().astype(float), h2.full_counts().astype(float)
    if c1.sum() == 0 or c2.sum() == 0:
        raise ValueError("cannot compare an empty histogram")
    p, q = c1 / c1.sum(), c2 / c2.sum()
    m = 0.5 * (p + q)

    def kl(x):
        nz = x > 0
        return float(np.sum(x[nz] * np.log(x[nz] / m[nz])))

    return min(max(0.5 * kl(p) + 0.5 * kl(q), 0.0), math.log(2.0))


# ---------------------------------------------------------------------------
# checks


@dataclass
class CheckReport:
    passed: dict[str, bool]
    details: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.passed[name] for name in CHECK_NAMES)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checks": {n: self.passed[n] for n in CHECK_NAMES}, "details": dict(self.details)}


def topological_distances(graph: MolecularGraph) -> np.ndarray:
    """All-pairs bond-count distances; unreachable pairs are ``inf``."""
    n = graph.n_atoms
    g = nx.from_numpy_array(graph.covalent_adjacency().astype(int))
    out = np.full((n, n), np.inf)
    for src, lengths in nx.all_pairs_shortest_path_length(g):
        for dst, d in lengths.items():
            out[src, dst] = d
    return out


def geometry_checks(graph: MolecularGraph, pocket: Pocket | None = None, settings: GeometrySettings | None = None) -> CheckReport:
    s = settings or GeometrySettings()
    passed, details = {}, {}
    pos = graph.positions
    elems = graph.elements
    finite = bool(np.all(np.isfinite(pos)))

    bad = []
    for i, j, c in graph.bonds():
        d = float(np.linalg.norm(pos[i] - pos[j]))
        ref = reference_length(elems[i], elems[j], c, s)
        if not (abs(d - ref) <= s.bond_tolerance):
            bad.append(f"{i}-{j}:{d:.3f}/{ref:.2f}")
    passed["bond_lengths"] = finite and not bad
    if bad:
        details["bond_lengths"] = " ".join(bad)

    radii = np.array([s.vdw_radii[e] for e in elems])
    topo = topological_distances(graph)
    pairs = kernels.clash_pairs(pos, pos, radii, radii, s.clash_factor) if finite else np.empty((0, 2), int)
    clashes = [(int(i), int(j)) for i, j in pairs if i < j and topo[i, j] > s.clash_exclusion_bonds]
    passed["internal_clash"] = finite and not clashes
    if clashes:
        details["internal_clash"] = " ".join(f"{i}-{j}" for i, j in clashes)

    if pocket is not None and len(pocket):
        prad = np.array([s.vdw_radii[e] for e in pocket.elements])
        pc = kernels.clash_pairs(pos, pocket.positions, radii, prad, s.clash_factor) if finite else None
        passed["pocket_clash"] = finite and len(pc) == 0
        if pc is not None and len(pc):
            details["pocket_clash"] = " ".join(f"{i}-p{j}" for i, j in pc)
    else:
        passed["pocket_clash"] = finite

    val = atom_valences(graph)
    over = [i for i, e in enumerate(elems) if val[i] > MAX_VALENCE[e]]
    passed["valence"] = not over
    if over:
        details["valence"] = " ".join(str(i) for i in over)

    passed["connected"] = bool(np.all(np.isfinite(topo[0]))) if graph.n_atoms else False
    passed["finite"] = finite
    return CheckReport(passed, details)


@dataclass
class Waterfall:
    n_total: int
    surviving: list[int]

    @property
    def overall(self) -> float:
        return self.surviving[-1] / self.n_total

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "check", "surviving", "fraction_of_previous", "cumulative_fraction"])
        w.writerow([0, "input", self.n_total, "1.000000", "1.000000"])
        prev = self.n_total
        for k, (name, count) in enumerate(zip(CHECK_NAMES, self.surviving), 1):
            frac = count / prev if prev else 0.0
            w.writerow([k, name, count, f"{frac:.6f}", f"{count / self.n_total:.6f}"])
            prev = count
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"n_total": self.n_total, "checks": list(CHECK_NAMES), "surviving": self.surviving, "overall": self.overall}, indent=2)


def pass_rate(reports: list[CheckReport]) -> tuple[float, Waterfall]:
    """Overall pass fraction and the sequential survivor counts for checks 1..6."""
    if not reports:
        raise ValueError("no reports")
    alive = list(reports)
    surviving = []
    for name in CHECK_NAMES:
        alive = [r for r in alive if r.passed[name]]
        surviving.append(len(alive))
    wf = Waterfall(len(reports), surviving)
    return wf.overall, wf
