"""Heavy-atom molecular graphs, pockets, and their file formats.

A ligand is a :class:`MolecularGraph`: per-atom coordinates, one-hot element
rows over :data:`ELEMENTS`, and an ``n x n`` matrix of :class:`BondClass`
indices. Pockets are fixed receptor atoms with residue bookkeeping.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import kernels

log = logging.getLogger(__name__)


class Element(str, enum.Enum):
    C = "C"
    N = "N"
    O = "O"  # noqa: E741
    F = "F"
    P = "P"
    S = "S"
    Cl = "Cl"
    Br = "Br"

    @property
    def index(self) -> int:
        return _ELEMENT_INDEX[self]

    @classmethod
    def parse(cls, symbol: str) -> "Element":
        s = symbol.strip()
        s = s[:1].upper() + s[1:].lower()
        try:
            return cls(s)
        except ValueError:
            raise ValueError(f"unknown element symbol {symbol!r}") from None


ELEMENTS: tuple[Element, ...] = tuple(Element)
_ELEMENT_INDEX = {e: i for i, e in enumerate(ELEMENTS)}
N_ELEMENTS = len(ELEMENTS)


class BondClass(enum.IntEnum):
    SINGLE = 0
    DOUBLE = 1
    TRIPLE = 2
    AROMATIC = 3
    PROXIMITY = 4
    NONE = 5

    @property
    def is_covalent(self) -> bool:
        return self <= BondClass.AROMATIC


N_BOND_CLASSES = len(BondClass)

# V2000 bond order <-> class
SDF_ORDER = {1: BondClass.SINGLE, 2: BondClass.DOUBLE, 3: BondClass.TRIPLE, 4: BondClass.AROMATIC}
_SDF_ORDER_INV = {v: k for k, v in SDF_ORDER.items()}

MAX_VALENCE = {
    Element.C: 4, Element.N: 3, Element.O: 2, Element.F: 1,
    Element.P: 5, Element.S: 6, Element.Cl: 1, Element.Br: 1,
}
BOND_VALENCE = {
    BondClass.SINGLE: 1.0, BondClass.DOUBLE: 2.0, BondClass.TRIPLE: 3.0,
    BondClass.AROMATIC: 1.5, BondClass.PROXIMITY: 0.0, BondClass.NONE: 0.0,
}

DEFAULT_CUTOFF = 5.0


# ---------------------------------------------------------------------------
# errors


class ParseError(ValueError):
    """Malformed molecule or structure input. ``line`` is 1-based, or None."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class CountsLineError(ParseError):
    pass


class AtomLineError(ParseError):
    pass


class UnknownElementError(ParseError):
    pass


class BondLineError(ParseError):
    pass


class BondIndexError(BondLineError):
    pass


class TruncatedBlockError(ParseError):
    pass


class EmptyPocketError(ParseError):
    pass


# ---------------------------------------------------------------------------
# types


def _frozen(x, dtype) -> np.ndarray:
    arr = np.array(x, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Atom:
    position: tuple[float, float, float]
    element: Element
    is_pocket: bool = False


@dataclass(frozen=True, eq=False)
class MolecularGraph:
    """Ligand graph.

    ``atom_types`` is ``(n, 8)`` with one-hot rows; ``bond_matrix`` is
    ``(n, n)`` with :class:`BondClass` values and ``NONE`` on the diagonal.
    Construction only checks shapes; use :func:`validate` for chemistry and
    structural invariants.
    """

    positions: np.ndarray
    atom_types: np.ndarray
    bond_matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        pos = _frozen(self.positions, np.float64).reshape(-1, 3)
        n = len(pos)
        if n < 1:
            raise ValueError("a molecular graph needs at least one atom")
        types = _frozen(self.atom_types, np.float64)
        bonds = _frozen(self.bond_matrix, np.int8)
        if types.shape != (n, N_ELEMENTS):
            raise ValueError(f"atom_types shape {types.shape} != {(n, N_ELEMENTS)}")
        if bonds.shape != (n, n):
            raise ValueError(f"bond_matrix shape {bonds.shape} != {(n, n)}")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "atom_types", types)
        object.__setattr__(self, "bond_matrix", bonds)

    @classmethod
    def from_atoms(
        cls,
        elements: Iterable[Element | str],
        positions,
        bonds: Mapping[tuple[int, int], BondClass | int] | None = None,
        name: str = "",
    ) -> "MolecularGraph":
        elems = [e if isinstance(e, Element) else Element.parse(e) for e in elements]
        n = len(elems)
        types = np.zeros((n, N_ELEMENTS))
        types[np.arange(n), [e.index for e in elems]] = 1.0
        mat = np.full((n, n), BondClass.NONE, dtype=np.int8)
        for (i, j), c in (bonds or {}).items():
            if i == j:
                raise ValueError(f"self bond on atom {i}")
            mat[i, j] = mat[j, i] = int(c)
        return cls(np.asarray(positions, dtype=float).reshape(n, 3), types, mat, name)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    @property
    def elements(self) -> tuple[Element, ...]:
        return tuple(ELEMENTS[k] for k in np.argmax(self.atom_types, axis=1))

    @property
    def atoms(self) -> list[Atom]:
        return [Atom(tuple(p), e, False) for p, e in zip(self.positions.tolist(), self.elements)]

    def bond(self, i: int, j: int) -> BondClass:
        if i == j:
            raise ValueError("bond(i, i) is undefined")
        return BondClass(int(self.bond_matrix[i, j]))

    def bonds(self, covalent_only: bool = True) -> list[tuple[int, int, BondClass]]:
        """Upper-triangle bond list ``(i, j, class)`` with ``i < j``."""
        iu, ju = np.triu_indices(self.n_atoms, k=1)
        cls = self.bond_matrix[iu, ju]
        keep = cls <= BondClass.AROMATIC if covalent_only else cls != BondClass.NONE
        return [(int(i), int(j), BondClass(int(c))) for i, j, c in zip(iu[keep], ju[keep], cls[keep])]

    def covalent_adjacency(self) -> np.ndarray:
        adj = self.bond_matrix <= BondClass.AROMATIC
        np.fill_diagonal(adj, False)
        return adj

    def with_positions(self, positions) -> "MolecularGraph":
        return MolecularGraph(positions, self.atom_types, self.bond_matrix, self.name)

    def equals(self, other: "MolecularGraph", atol: float = 0.0) -> bool:
        if self.n_atoms != other.n_atoms:
            return False
        if not np.array_equal(self.atom_types, other.atom_types):
            return False
        if not np.array_equal(self.bond_matrix, other.bond_matrix):
            return False
        if atol == 0.0:
            return np.array_equal(self.positions, other.positions)
        return bool(np.allclose(self.positions, other.positions, rtol=0.0, atol=atol))


ResidueId = tuple[str, str, int]  # (chain, resname, resseq)


@dataclass(frozen=True, eq=False)
class Pocket:
    """Fixed receptor atoms. ``n_dropped`` counts non-H atoms outside the element set."""

    positions: np.ndarray
    elements: tuple[Element, ...]
    residue_ids: tuple[ResidueId, ...]
    atom_names: tuple[str, ...] = ()
    n_dropped: int = 0

    def __post_init__(self):
        pos = _frozen(self.positions, np.float64).reshape(-1, 3)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "elements", tuple(e if isinstance(e, Element) else Element.parse(e) for e in self.elements))
        object.__setattr__(self, "residue_ids", tuple(tuple(r) for r in self.residue_ids))
        if not self.atom_names:
            object.__setattr__(self, "atom_names", tuple(e.value for e in self.elements))
        n = len(pos)
        if len(self.elements) != n or len(self.residue_ids) != n or len(self.atom_names) != n:
            raise ValueError("pocket per-atom fields disagree in length")

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def atoms(self) -> list[Atom]:
        return [Atom(tuple(p), e, True) for p, e in zip(self.positions.tolist(), self.elements)]

    @property
    def type_matrix(self) -> np.ndarray:
        out = np.zeros((len(self), N_ELEMENTS))
        out[np.arange(len(self)), [e.index for e in self.elements]] = 1.0
        return out

    def centroid(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    def residues(self) -> dict[ResidueId, np.ndarray]:
        """Residue id -> heavy-atom coordinates, in file order."""
        groups: dict[ResidueId, list[int]] = {}
        for k, rid in enumerate(self.residue_ids):
            groups.setdefault(rid, []).append(k)
        return {rid: self.positions[idx] for rid, idx in groups.items()}

    def subset(self, keep) -> "Pocket":
        keep = np.asarray(keep)
        if keep.dtype == bool:
            keep = np.nonzero(keep)[0]
        return Pocket(
            self.positions[keep],
            tuple(self.elements[k] for k in keep),
            tuple(self.residue_ids[k] for k in keep),
            tuple(self.atom_names[k] for k in keep),
            self.n_dropped,
        )


@dataclass(frozen=True, eq=False)
class PocketComplex:
    ligand: MolecularGraph
    pocket: Pocket
    cross_edges: np.ndarray  # (k, 2) of (ligand index, pocket index)
    cutoff: float = DEFAULT_CUTOFF

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(p)) for i, p in self.cross_edges}


# ---------------------------------------------------------------------------
# SDF V2000


def _counts_fields(line: str, lineno: int) -> tuple[int, int]:
    try:
        return int(line[0:3]), int(line[3:6])
    except ValueError:
        pass
    parts = line.split()
    try:
        if len(parts) >= 2:
            return int(parts[0]), int(parts[1])
    except ValueError:
        pass
    raise CountsLineError(f"malformed counts line {line!r}", lineno)


def parse_sdf(text: str, strip_hydrogens: bool = True) -> MolecularGraph:
    """Parse one V2000 molecule block.

    Hydrogens are removed together with their bonds. Charges, isotopes and
    property blocks are ignored.
    """
    lines = text.splitlines()
    if len(lines) < 4:
        raise CountsLineError("block shorter than header + counts line", len(lines) or None)
    name = lines[0].strip()
    n_atoms, n_bonds = _counts_fields(lines[3], 4)
    if n_atoms < 1 or n_bonds < 0:
        raise CountsLineError(f"invalid atom/bond counts {n_atoms}/{n_bonds}", 4)
    if len(lines) < 4 + n_atoms + n_bonds:
        raise TruncatedBlockError(
            f"expected {n_atoms} atom and {n_bonds} bond lines, block has {len(lines) - 4}",
            len(lines),
        )

    coords, symbols = [], []
    for k in range(n_atoms):
        lineno = 5 + k
        line = lines[4 + k]
        try:
            xyz = (float(line[0:10]), float(line[10:20]), float(line[20:30]))
            sym = line[31:34].strip()
        except ValueError:
            parts = line.split()
            try:
                xyz = tuple(float(v) for v in parts[:3])
                sym = parts[3]
            except (ValueError, IndexError):
                raise AtomLineError(f"malformed atom line {line!r}", lineno) from None
        if not sym:
            raise AtomLineError("missing element symbol", lineno)
        if not all(math.isfinite(v) for v in xyz):
            raise AtomLineError("non-finite coordinate", lineno)
        if sym.upper() == "H" or sym in ("D", "T"):
            symbols.append(None)
        else:
            try:
                symbols.append(Element.parse(sym))
            except ValueError:
                raise UnknownElementError(f"unknown element symbol {sym!r}", lineno) from None
        coords.append(xyz)

    bonds: dict[tuple[int, int], BondClass] = {}
    for k in range(n_bonds):
        lineno = 5 + n_atoms + k
        line = lines[4 + n_atoms + k]
        try:
            i, j, order = int(line[0:3]), int(line[3:6]), int(line[6:9])
        except ValueError:
            parts = line.split()
            try:
                i, j, order = int(parts[0]), int(parts[1]), int(parts[2])
            except (ValueError, IndexError):
                raise BondLineError(f"malformed bond line {line!r}", lineno) from None
        if not (1 <= i <= n_atoms and 1 <= j <= n_atoms):
            raise BondIndexError(f"bond atom index out of range 1..{n_atoms}: {i} {j}", lineno)
        if i == j:
            raise BondIndexError(f"self bond on atom {i}", lineno)
        if order not in SDF_ORDER:
            raise BondLineError(f"unsupported bond order {order}", lineno)
        bonds[(i - 1, j - 1)] = SDF_ORDER[order]

    if strip_hydrogens and any(s is None for s in symbols):
        keep = [k for k, s in enumerate(symbols) if s is not None]
        if not keep:
            raise AtomLineError("molecule has no heavy atoms", 5)
        remap = {old: new for new, old in enumerate(keep)}
        coords = [coords[k] for k in keep]
        symbols = [symbols[k] for k in keep]
        bonds = {(remap[i], remap[j]): c for (i, j), c in bonds.items() if i in remap and j in remap}
    elif any(s is None for s in symbols):
        k = symbols.index(None)
        raise UnknownElementError("hydrogen not in element set", 5 + k)

    return MolecularGraph.from_atoms(symbols, coords, bonds, name=name)


def serialize_sdf(graph: MolecularGraph, terminate: bool = False) -> str:
    """V2000 block for ``graph``; proximity/none pairs emit no bond record."""
    bonds = graph.bonds(covalent_only=True)
    out = [graph.name, "  pocketdiff      3D", ""]
    out.append(f"{graph.n_atoms:3d}{len(bonds):3d}  0  0  0  0  0  0  0  0999 V2000")
    for (x, y, z), e in zip(graph.positions.tolist(), graph.elements):
        out.append(f"{x:10.4f}{y:10.4f}{z:10.4f} {e.value:<3s} 0  0  0  0  0  0  0  0  0  0  0  0")
    for i, j, c in bonds:
        out.append(f"{i + 1:3d}{j + 1:3d}{_SDF_ORDER_INV[c]:3d}  0")
    out.append("M  END")
    if terminate:
        out.append("$$$$")
    return "\n".join(out) + "\n"


def parse_sdf_multi(text: str, strip_hydrogens: bool = True) -> list[MolecularGraph]:
    """All records of a ``$$$$``-separated SD file."""
    mols = []
    for block in text.split("$$$$"):
        if not block.strip():
            continue
        block = block[1:] if block.startswith("\n") else block
        mols.append(parse_sdf(block, strip_hydrogens=strip_hydrogens))
    return mols


def write_sdf(graphs: Iterable[MolecularGraph]) -> str:
    return "".join(serialize_sdf(g, terminate=True) for g in graphs)


# ---------------------------------------------------------------------------
# PDB


def _pdb_element(line: str) -> str:
    sym = line[76:78].strip() if len(line) >= 77 else ""
    if sym:
        return sym
    # deduce from atom name: columns 13-14 hold a right-justified symbol
    name = line[12:16]
    if name[:1].isalpha():
        return name[:2].strip()
    return name.strip().lstrip("0123456789")[:1]


def parse_pocket_pdb(text: str) -> Pocket:
    """ATOM/HETATM records to a :class:`Pocket`.

    Hydrogens are skipped silently; other elements outside the vocabulary are
    skipped and counted in ``n_dropped``.
    """
    pos, elems, rids, names = [], [], [], []
    dropped = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        rec = line[:6].strip()
        if rec == "ENDMDL":
            break
        if rec not in ("ATOM", "HETATM"):
            continue
        try:
            xyz = (float(line[30:38]), float(line[38:46]), float(line[46:54]))
        except ValueError:
            log.warning("line %d: unreadable coordinates, record skipped", lineno)
            continue
        sym = _pdb_element(line)
        if sym.upper() in ("H", "D"):
            continue
        try:
            elem = Element.parse(sym)
        except ValueError:
            dropped += 1
            continue
        try:
            resseq = int(line[22:26])
        except ValueError:
            resseq = 0
        pos.append(xyz)
        elems.append(elem)
        rids.append((line[21:22].strip(), line[17:20].strip(), resseq))
        names.append(line[12:16].strip())
    if not pos:
        raise EmptyPocketError("no parsable ATOM/HETATM records")
    if dropped:
        log.info("dropped %d pocket atoms with elements outside the vocabulary", dropped)
    return Pocket(np.array(pos), tuple(elems), tuple(rids), tuple(names), dropped)


def serialize_pocket_pdb(pocket: Pocket) -> str:
    out = []
    for k, ((x, y, z), e, (chain, resn, resi), name) in enumerate(
        zip(pocket.positions.tolist(), pocket.elements, pocket.residue_ids, pocket.atom_names), 1
    ):
        aname = f" {name:<3s}" if len(name) < 4 and len(e.value) == 1 else f"{name:<4s}"
        out.append(
            f"ATOM  {k:5d} {aname} {resn:>3s} {chain or 'A':1s}{resi:4d}    "
            f"{x:8.3f}{y:8.3f}{z:8.3f}  1.00  0.00          {e.value.upper():>2s}"
        )
    out.append("END")
    return "\n".join(out) + "\n"


def crop_pocket(pocket: Pocket, reference, cutoff: float = DEFAULT_CUTOFF) -> Pocket:
    """Keep whole residues having any atom within ``cutoff`` of ``reference`` points."""
    ref = np.asarray(reference, dtype=float).reshape(-1, 3)
    near = kernels.min_distances(pocket.positions, ref) <= cutoff
    hit = {pocket.residue_ids[k] for k in np.nonzero(near)[0]}
    keep = [k for k, rid in enumerate(pocket.residue_ids) if rid in hit]
    if not keep:
        raise EmptyPocketError(f"no pocket residue within {cutoff} A of the reference")
    return pocket.subset(keep)


# ---------------------------------------------------------------------------
# complexes and validation


def build_complex(ligand: MolecularGraph, pocket: Pocket, cutoff: float = DEFAULT_CUTOFF) -> PocketComplex:
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    if ligand.n_atoms == 0:
        raise ValueError("empty ligand")
    if len(pocket) == 0:
        raise EmptyPocketError("empty pocket")
    edges = kernels.pairs_within(ligand.positions, pocket.positions, cutoff)
    edges.setflags(write=False)
    return PocketComplex(ligand, pocket, edges, float(cutoff))


@dataclass(frozen=True)
class Violation:
    rule: str  # one_hot | symmetry | self_bond | bond_class | finite | valence
    atoms: tuple[int, ...]
    detail: str = ""


@dataclass(frozen=True)
class ValidityReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}

    def by_rule(self, rule: str) -> list[Violation]:
        return [v for v in self.violations if v.rule == rule]


def atom_valences(graph: MolecularGraph) -> np.ndarray:
    table = np.array([BOND_VALENCE[BondClass(k)] for k in range(N_BOND_CLASSES)])
    mat = np.asarray(graph.bond_matrix, dtype=np.int64)
    ok = (mat >= 0) & (mat < N_BOND_CLASSES)
    vals = np.where(ok, table[np.clip(mat, 0, N_BOND_CLASSES - 1)], 0.0)
    np.fill_diagonal(vals, 0.0)
    return vals.sum(axis=1)


def validate(graph: MolecularGraph) -> ValidityReport:
    found: list[Violation] = []
    types = graph.atom_types
    for i, row in enumerate(types):
        if not (np.all((row == 0.0) | (row == 1.0)) and row.sum() == 1.0):
            found.append(Violation("one_hot", (i,), "atom-type row is not one-hot"))
    mat = graph.bond_matrix
    n = graph.n_atoms
    for i in range(n):
        if mat[i, i] != BondClass.NONE:
            found.append(Violation("self_bond", (i,), f"diagonal entry {int(mat[i, i])}"))
    bad = np.argwhere((mat < 0) | (mat >= N_BOND_CLASSES))
    for i, j in bad:
        if i <= j:
            found.append(Violation("bond_class", (int(i), int(j)), f"class {int(mat[i, j])}"))
    asym = np.argwhere(mat != mat.T)
    for i, j in asym:
        if i < j:
            found.append(Violation("symmetry", (int(i), int(j)), f"{int(mat[i, j])} != {int(mat[j, i])}"))
    for i in np.nonzero(~np.all(np.isfinite(graph.positions), axis=1))[0]:
        found.append(Violation("finite", (int(i),), "non-finite coordinate"))
    val = atom_valences(graph)
    for i in range(n):
        row = types[i]
        if row.sum() != 1.0:
            continue
        elem = ELEMENTS[int(np.argmax(row))]
        if val[i] > MAX_VALENCE[elem]:
            found.append(Violation("valence", (i,), f"{elem.value} valence {val[i]:g} > {MAX_VALENCE[elem]}"))
    return ValidityReport(tuple(found))
