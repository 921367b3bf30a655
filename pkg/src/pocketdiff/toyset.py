"""Desk-scale training data: rigid motif templates and synthetic pocket shells."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .evalgeom import AROMATIC_LENGTH, reference_length
from .molgraph import BondClass, Element, MolecularGraph, Pocket

S, D, T, A = BondClass.SINGLE, BondClass.DOUBLE, BondClass.TRIPLE, BondClass.AROMATIC
TET = 109.47
TRI = 120.0


@dataclass(frozen=True)
class ZAtom:
    """Internal-coordinate row: element, bond partner and class, angle and dihedral refs."""

    element: str
    bond_to: int = -1
    bond: BondClass = S
    angle_ref: int = -1
    angle: float = TET
    dihedral_ref: int = -1
    dihedral: float = 180.0


def _place(a, b, c, length, angle, dihedral):
    """NeRF placement of a new atom bonded to ``c``."""
    bc = c - b
    bc /= np.linalg.norm(bc)
    n = np.cross(b - a, bc)
    n /= np.linalg.norm(n)
    m = np.cross(n, bc)
    th, ph = math.radians(angle), math.radians(dihedral)
    d2 = np.array([-length * math.cos(th), length * math.sin(th) * math.cos(ph), length * math.sin(th) * math.sin(ph)])
    return c + d2[0] * bc + d2[1] * m + d2[2] * n


def build_zmatrix(rows: list[ZAtom], name: str = "") -> MolecularGraph:
    elems = [r.element for r in rows]
    pos = np.zeros((len(rows), 3))
    bonds = {}
    for k, r in enumerate(rows):
        if k == 0:
            continue
        L = reference_length(elems[k], elems[r.bond_to], r.bond)
        bonds[(r.bond_to, k)] = r.bond
        c = pos[r.bond_to]
        if k == 1:
            pos[k] = c + np.array([L, 0.0, 0.0])
        elif r.dihedral_ref < 0:
            # atoms 0 and 1 lie on the x axis, so a +y helper puts this atom in the xy plane
            b = pos[r.angle_ref]
            pos[k] = _place(b + np.array([0.0, 1.0, 0.0]), b, c, L, r.angle, 0.0)
        else:
            pos[k] = _place(pos[r.dihedral_ref], pos[r.angle_ref], c, L, r.angle, r.dihedral)
    return MolecularGraph.from_atoms(elems, pos, bonds, name=name)


def _ring(elements: list[str], substituents: list[tuple[int, str, BondClass]], name: str) -> MolecularGraph:
    """Planar aromatic six-ring with radial substituents ``(ring index, element, class)``."""
    k = len(elements)
    R = AROMATIC_LENGTH / (2 * math.sin(math.pi / k))
    ang = 2 * math.pi * np.arange(k) / k
    pos = [np.array([R * math.cos(t), R * math.sin(t), 0.0]) for t in ang]
    elems = list(elements)
    bonds = {(i, (i + 1) % k): A for i in range(k)}
    for ring_idx, elem, cls in substituents:
        L = reference_length(elements[ring_idx], elem, cls)
        u = pos[ring_idx] / np.linalg.norm(pos[ring_idx])
        bonds[(ring_idx, len(elems))] = cls
        pos.append(pos[ring_idx] + L * u)
        elems.append(elem)
    return MolecularGraph.from_atoms(elems, np.array(pos), bonds, name=name)


def _chain(spec, name):
    return build_zmatrix([ZAtom(*row) for row in spec], name)


def motif_library() -> dict[str, MolecularGraph]:
    """Hand-built heavy-atom templates with table bond lengths and ideal angles."""
    lib = {
        "dimethyl_sulfide": _chain([("C",), ("S", 0), ("C", 1, S, 0, 99.0)], "dimethyl_sulfide"),
        "acetaldehyde": _chain([("C",), ("C", 0), ("O", 1, D, 0, TRI)], "acetaldehyde"),
        "propanol": _chain([("C",), ("C", 0), ("C", 1, S, 0, TET), ("O", 2, S, 1, TET, 0, 180.0)], "propanol"),
        "acetamide": _chain([("C",), ("C", 0), ("O", 1, D, 0, TRI), ("N", 1, S, 0, TRI, 2, 180.0)], "acetamide"),
        "chloroethanol": _chain([("Cl",), ("C", 0), ("C", 1, S, 0, TET), ("O", 2, S, 1, TET, 0, 180.0)], "chloroethanol"),
        "n_methylacetamide": _chain(
            [("C",), ("C", 0), ("O", 1, D, 0, TRI), ("N", 1, S, 0, TRI, 2, 180.0), ("C", 3, S, 1, TRI, 0, 180.0)],
            "n_methylacetamide",
        ),
        "methyl_imine": _chain(
            [("C",), ("C", 0), ("N", 1, D, 0, TRI), ("C", 2, S, 1, TRI, 0, 180.0), ("C", 1, S, 2, TRI, 3, 180.0)],
            "methyl_imine",
        ),
        "fluoropropene": _chain(
            [("C",), ("C", 0, D), ("C", 1, S, 0, TRI), ("F", 0, S, 1, TRI, 2, 180.0), ("O", 2, S, 1, TET, 0, 180.0)],
            "fluoropropene",
        ),
        "benzene": _ring(["C"] * 6, [], "benzene"),
        "pyridine": _ring(["N", "C", "C", "C", "C", "C"], [], "pyridine"),
        "phenol": _ring(["C"] * 6, [(0, "O", S)], "phenol"),
        "fluorobenzene": _ring(["C"] * 6, [(0, "F", S)], "fluorobenzene"),
        "chlorobenzene": _ring(["C"] * 6, [(0, "Cl", S)], "chlorobenzene"),
        "toluene": _ring(["C"] * 6, [(0, "C", S)], "toluene"),
        "p_cresol": _ring(["C"] * 6, [(0, "C", S), (3, "O", S)], "p_cresol"),
        "thiophenol": _ring(["C"] * 6, [(0, "S", S)], "thiophenol"),
    }
    return lib


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


_SHELL_RESIDUES = ("TYR", "ASP", "ARG", "LEU", "SER", "PHE", "LYS", "GLU", "THR", "TRP")
_SHELL_ELEMENTS = (Element.C, Element.C, Element.C, Element.N, Element.O)


def pocket_shell(
    ligand: MolecularGraph,
    rng: np.random.Generator,
    n_atoms: int = 30,
    dmin: float = 4.0,
    dmax: float = 6.0,
    atoms_per_residue: int = 3,
    max_tries: int = 20000,
) -> Pocket:
    """Atoms whose nearest ligand atom lies within ``[dmin, dmax]``.

    Points are drawn on spheres around the ligand centroid and kept when the
    nearest-ligand distance lands in range; consecutive groups of atoms form
    one residue.
    """
    center = ligand.positions.mean(axis=0)
    extent = float(np.max(np.linalg.norm(ligand.positions - center, axis=1)))
    pts = []
    tries = 0
    while len(pts) < n_atoms:
        tries += 1
        if tries > max_tries:
            raise RuntimeError("could not place pocket shell atoms")
        u = rng.standard_normal(3)
        u /= np.linalg.norm(u)
        radius = rng.uniform(dmin, dmax + extent)
        p = center + radius * u
        d = np.min(np.linalg.norm(ligand.positions - p, axis=1))
        if not (dmin <= d <= dmax):
            continue
        if pts and np.min(np.linalg.norm(np.array(pts) - p, axis=1)) < 1.2:
            continue
        pts.append(p)
    pts = np.round(np.array(pts), 3)
    # rounding to PDB precision can push a point across the bounds
    keep = []
    for k, p in enumerate(pts):
        d = np.min(np.linalg.norm(ligand.positions - p, axis=1))
        if dmin <= d <= dmax:
            keep.append(k)
    pts = pts[keep]
    elems, rids, names = [], [], []
    for k in range(len(pts)):
        res = k // atoms_per_residue
        resname = _SHELL_RESIDUES[int(rng.integers(len(_SHELL_RESIDUES)))] if k % atoms_per_residue == 0 else rids[-1][1]
        e = _SHELL_ELEMENTS[int(rng.integers(len(_SHELL_ELEMENTS)))]
        elems.append(e)
        rids.append(("A", resname, res + 1))
        names.append(f"{e.value}{k % atoms_per_residue + 1}")
    return Pocket(pts, tuple(elems), tuple(rids), tuple(names))


def place_template(graph: MolecularGraph, rng: np.random.Generator) -> MolecularGraph:
    """Random proper rotation about the centroid; coordinates rounded to SDF precision."""
    R = random_rotation(rng)
    c = graph.positions.mean(axis=0)
    pos = np.round((graph.positions - c) @ R.T, 4)
    return graph.with_positions(pos)


def make_toyset(n_templates: int, atoms_per: int | None, rng=None, shell_atoms: int = 30):
    """``n_templates`` (ligand, pocket) pairs drawn from the motif library.

    ``atoms_per`` restricts the library to motifs with that many heavy atoms.
    """
    if n_templates < 1:
        raise ValueError("n_templates must be >= 1")
    rng = np.random.default_rng(rng)
    lib = motif_library()
    names = sorted(k for k, g in lib.items() if atoms_per is None or g.n_atoms == atoms_per)
    if not names:
        sizes = sorted({g.n_atoms for g in lib.values()})
        raise ValueError(f"no motif with {atoms_per} atoms; available sizes {sizes}")
    out = []
    for k in range(n_templates):
        name = names[int(rng.integers(len(names)))]
        lig = place_template(lib[name], rng)
        lig = MolecularGraph(lig.positions, lig.atom_types, lig.bond_matrix, f"{name}_{k:03d}")
        out.append((lig, pocket_shell(lig, rng, shell_atoms)))
    return out
