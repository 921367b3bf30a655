"""Rotatable-bond fragmentation and fragment/residue pointwise mutual information.

Generated ligands are cut at their rotatable bonds. Each fragment is paired
with every pocket residue that has a heavy atom within 4 A of one of its
atoms, and the pair counts are turned into a PMI table.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import networkx as nx
import numpy as np

from .molgraph import ELEMENTS, BondClass, MolecularGraph, Pocket

REPLACEMENT_CUTOFF = 4.0

_BOND_CODE = {BondClass.SINGLE: "S", BondClass.DOUBLE: "D", BondClass.TRIPLE: "T", BondClass.AROMATIC: "A"}


def _covalent_graph(graph: MolecularGraph) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(graph.n_atoms))
    for i, j, cls in graph.bonds():
        g.add_edge(i, j, cls=cls)
    return g


def _is_amide_like(graph: MolecularGraph, i: int, j: int) -> bool:
    """C-N single bond where the carbon also carries a C=O."""
    el = graph.elements
    for c, n in ((i, j), (j, i)):
        if el[c].value == "C" and el[n].value == "N":
            for k in range(graph.n_atoms):
                if el[k].value == "O" and graph.bond(c, k) == BondClass.DOUBLE:
                    return True
    return False


def rotatable_bonds(graph: MolecularGraph, exclude_amide: bool = False) -> list[tuple[int, int]]:
    """Single bonds outside every ring whose two atoms both have degree >= 2.

    A bond lies in no cycle exactly when it is a bridge of the covalent graph.
    Pairs come back as ``(i, j)`` with ``i < j`` in ascending order.
    """
    g = _covalent_graph(graph)
    bridges = {tuple(sorted(e)) for e in nx.bridges(g)}
    out = []
    for i, j, cls in graph.bonds():
        if cls != BondClass.SINGLE or (i, j) not in bridges:
            continue
        if g.degree[i] < 2 or g.degree[j] < 2:
            continue
        if exclude_amide and _is_amide_like(graph, i, j):
            continue
        out.append((i, j))
    return out


@dataclass(frozen=True)
class Fragment:
    atoms: tuple[int, ...]
    signature: str


def fragment_signature(graph: MolecularGraph, atoms: Iterable[int]) -> str:
    """Sorted ``element + internal degree`` tokens, then sorted bond codes.

    Degree counts covalent neighbours inside the fragment, so a methyl cut
    from a chain reads ``C0|`` wherever it came from. Benzene reads
    ``C2.C2.C2.C2.C2.C2|A.A.A.A.A.A``.
    """
    atoms = sorted(atoms)
    inside = set(atoms)
    el = graph.elements
    degree = Counter()
    bonds = []
    for i, j, cls in graph.bonds():
        if i in inside and j in inside:
            degree[i] += 1
            degree[j] += 1
            bonds.append(_BOND_CODE[cls])
    tokens = sorted(f"{el[k].value}{degree[k]}" for k in atoms)
    return ".".join(tokens) + "|" + ".".join(sorted(bonds))


def fragment(graph: MolecularGraph, exclude_amide: bool = False) -> list[Fragment]:
    """Connected components after deleting rotatable bonds, ordered by lowest atom."""
    g = _covalent_graph(graph)
    g.remove_edges_from(rotatable_bonds(graph, exclude_amide))
    comps = sorted((sorted(c) for c in nx.connected_components(g)), key=lambda c: c[0])
    return [Fragment(tuple(c), fragment_signature(graph, c)) for c in comps]


def signature_composition(signature: str) -> Counter:
    """Element counts encoded in a fragment signature."""
    atoms = signature.split("|", 1)[0]
    counts = Counter()
    for tok in atoms.split("."):
        counts[tok.rstrip("0123456789")] += 1
    return counts


def assign_replacements(
    fragments: list[Fragment],
    positions: np.ndarray,
    pocket: Pocket,
    cutoff: float = REPLACEMENT_CUTOFF,
) -> list[tuple[str, str]]:
    """``(residue name, fragment signature)`` for every fragment/residue contact.

    A contact is any fragment atom within ``cutoff`` (inclusive) of any atom of
    the residue. Residues are visited in file order, fragments in list order.
    """
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    positions = np.asarray(positions, dtype=float)
    pairs = []
    for rid, coords in pocket.residues().items():
        for frag in fragments:
            sub = positions[list(frag.atoms)]
            d = np.sqrt(((sub[:, None, :] - coords[None, :, :]) ** 2).sum(axis=-1))
            if d.min() <= cutoff:
                pairs.append((rid[1], frag.signature))
    return pairs


def split_binder(pocket: Pocket, binder_chains: Iterable[str]) -> tuple[Pocket, int, int]:
    """Drop binder-chain atoms; returns ``(target pocket, n target residues, n binder residues)``."""
    chains = set(binder_chains)
    keep = [k for k, rid in enumerate(pocket.residue_ids) if rid[0] not in chains]
    binder = {rid for rid in pocket.residue_ids if rid[0] in chains}
    target = pocket.subset(np.array(keep, dtype=np.int64))
    return target, len(set(target.residue_ids)), len(binder)


@dataclass
class PmiTable:
    counts: dict[tuple[str, str], int]
    residue_counts: dict[str, int] = field(init=False)
    fragment_counts: dict[str, int] = field(init=False)
    total: int = field(init=False)
    pmi: dict[tuple[str, str], float] = field(init=False)
    base: float = math.e

    def __post_init__(self):
        if not self.counts:
            raise ValueError("PMI table needs at least one pair")
        if any(c <= 0 for c in self.counts.values()):
            raise ValueError("pair counts must be positive")
        res, frag = Counter(), Counter()
        for (r, f), c in sorted(self.counts.items()):
            res[r] += c
            frag[f] += c
        self.residue_counts = dict(sorted(res.items()))
        self.fragment_counts = dict(sorted(frag.items()))
        self.total = sum(self.residue_counts.values())
        log_base = math.log(self.base)
        self.pmi = {
            key: math.log(c * self.total / (res[key[0]] * frag[key[1]])) / log_base
            for key, c in sorted(self.counts.items())
        }

    def probability(self, residue: str, signature: str) -> float:
        return self.counts.get((residue, signature), 0) / self.total

    def rows(self) -> list[tuple[str, str, int, float]]:
        return [(r, f, self.counts[(r, f)], self.pmi[(r, f)]) for r, f in sorted(self.counts)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["residue", "fragment_signature", "count", "pmi"])
        for r, f, c, v in self.rows():
            w.writerow([r, f, c, repr(v)])
        return buf.getvalue()


def pmi_table(pairs: Iterable[tuple[str, str]] | Mapping[tuple[str, str], int], base: float = math.e) -> PmiTable:
    """PMI of every observed (residue, fragment) pair; natural log by default."""
    if base <= 0 or base == 1:
        raise ValueError("log base must be positive and != 1")
    if isinstance(pairs, Mapping):
        counts = {k: int(v) for k, v in pairs.items() if v}
    else:
        counts = dict(Counter(tuple(p) for p in pairs))
    return PmiTable(counts, base=base)


def top_fragments(table: PmiTable, residue: str, k: int) -> list[tuple[str, float, int]]:
    """``k`` best ``(signature, pmi, count)`` for ``residue``.

    Ordered by PMI descending, then joint count descending, then signature.
    """
    if residue not in table.residue_counts:
        raise KeyError(f"residue {residue!r} not in table")
    if k < 0:
        raise ValueError("k must be >= 0")
    rows = [(f, table.pmi[(r, f)], c) for (r, f), c in table.counts.items() if r == residue]
    rows.sort(key=lambda x: (-x[1], -x[2], x[0]))
    return rows[:k]


def top_report_csv(table: PmiTable, k: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["residue", "rank", "fragment_signature", "pmi", "count"])
    for res in table.residue_counts:
        for rank, (f, v, c) in enumerate(top_fragments(table, res, k), 1):
            w.writerow([res, rank, f, repr(v), c])
    return buf.getvalue()


def composition_csv(table: PmiTable) -> str:
    """Element counts of every fragment signature with its total pair count."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    symbols = [e.value for e in ELEMENTS]
    w.writerow(["fragment_signature", "pairs", "n_atoms", *symbols])
    for sig, c in table.fragment_counts.items():
        comp = signature_composition(sig)
        w.writerow([sig, c, sum(comp.values()), *(comp.get(s, 0) for s in symbols)])
    return buf.getvalue()
