import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings

from pocketdiff import molgraph as mg
from pocketdiff.molgraph import (
    BondClass,
    Element,
    MolecularGraph,
    Pocket,
    build_complex,
    crop_pocket,
    parse_pocket_pdb,
    parse_sdf,
    parse_sdf_multi,
    serialize_pocket_pdb,
    serialize_sdf,
    validate,
    write_sdf,
)
from pocketdiff.toyset import motif_library

from strategies import graphs, random_graph, random_pocket

FIXTURES = Path(__file__).parent / "fixtures"

MALFORMED = {
    "counts_garbage.sdf": (mg.CountsLineError, 4),
    "header_only.sdf": (mg.CountsLineError, 2),
    "zero_atoms.sdf": (mg.CountsLineError, 4),
    "truncated_atoms.sdf": (mg.TruncatedBlockError, 6),
    "unknown_element.sdf": (mg.UnknownElementError, 6),
    "atom_line_garbage.sdf": (mg.AtomLineError, 6),
    "bond_index_range.sdf": (mg.BondIndexError, 7),
    "bond_order_invalid.sdf": (mg.BondLineError, 7),
    "bond_line_garbage.sdf": (mg.BondLineError, 7),
    "empty_pocket.pdb": (mg.EmptyPocketError, None),
}

METHANE = """methane
  hand

  1  0  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
M  END
"""

ETHENE = """ethene
  hand

  2  1  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    1.3400    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  2  0
M  END
"""


def benzene_block():
    rows = []
    for k in range(6):
        a = 2 * math.pi * k / 6
        rows.append(f"{1.39 * math.cos(a):10.4f}{1.39 * math.sin(a):10.4f}{0.0:10.4f} C   0  0  0  0  0  0  0  0  0  0  0  0")
    bonds = [f"{k + 1:3d}{(k + 1) % 6 + 1:3d}  4  0" for k in range(6)]
    return "benzene\n  hand\n\n  6  6  0  0  0  0  0  0  0  0999 V2000\n" + "\n".join(rows + bonds) + "\nM  END\n"


# --- element and bond vocabularies --------------------------------------------


def test_exactly_eight_elements():
    assert [e.value for e in mg.ELEMENTS] == ["C", "N", "O", "F", "P", "S", "Cl", "Br"]


def test_element_parse_normalizes_case():
    assert Element.parse("CL") is Element.Cl
    assert Element.parse(" br") is Element.Br
    with pytest.raises(ValueError):
        Element.parse("Xe")


def test_six_bond_classes():
    assert len(BondClass) == 6 and BondClass.NONE == 5


# --- SDF -----------------------------------------------------------------------


def test_single_atom_block():
    g = parse_sdf(METHANE)
    assert g.n_atoms == 1 and g.elements == (Element.C,) and g.bonds() == []


def test_ethene_double_bond_symmetric():
    g = parse_sdf(ETHENE)
    assert g.bond(0, 1) == g.bond(1, 0) == BondClass.DOUBLE


def test_benzene_aromatic_round_trip():
    g = parse_sdf(benzene_block())
    assert g.n_atoms == 6
    assert [c for _, _, c in g.bonds()] == [BondClass.AROMATIC] * 6
    again = parse_sdf(serialize_sdf(g))
    assert again.equals(g)


def test_serialize_single_atom_counts():
    g = MolecularGraph.from_atoms(["C"], [[0.0, 0.0, 0.0]], {})
    assert serialize_sdf(g).splitlines()[3].startswith("  1  0")


def test_serialize_ethene_bond_order():
    lines = serialize_sdf(parse_sdf(ETHENE)).splitlines()
    assert lines[6] == "  1  2  2  0"


def test_proximity_bonds_not_written():
    g = MolecularGraph.from_atoms(["C", "O"], [[0, 0, 0], [3, 0, 0]], {(0, 1): BondClass.PROXIMITY})
    text = serialize_sdf(g)
    assert text.splitlines()[3].startswith("  2  0")
    assert parse_sdf(text).bond(0, 1) == BondClass.NONE


def test_hydrogens_stripped_with_bonds():
    text = """water
  hand

  3  2  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.0000 O   0  0  0  0  0  0  0  0  0  0  0  0
    0.9600    0.0000    0.0000 H   0  0  0  0  0  0  0  0  0  0  0  0
   -0.2400    0.9300    0.0000 H   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  1  0
  1  3  1  0
M  END
"""
    g = parse_sdf(text)
    assert g.elements == (Element.O,) and g.bonds() == []
    with pytest.raises(mg.UnknownElementError):
        parse_sdf(text, strip_hydrogens=False)


def test_whitespace_separated_fallback():
    text = "m\n\n\n2 1\n0 0 0 C\n1.5 0 0 N\n1 2 1\nM  END\n"
    g = parse_sdf(text)
    assert g.elements == (Element.C, Element.N) and g.bond(0, 1) == BondClass.SINGLE


def test_multi_record_file():
    lib = motif_library()
    mols = [lib["benzene"], lib["acetamide"]]
    back = parse_sdf_multi(write_sdf(mols))
    assert len(back) == 2
    assert all(a.equals(b, atol=1e-4) for a, b in zip(back, mols))


@pytest.mark.parametrize("name", sorted(MALFORMED))
def test_malformed_corpus(name):
    cls, line = MALFORMED[name]
    text = (FIXTURES / "malformed" / name).read_text()
    parser = parse_pocket_pdb if name.endswith(".pdb") else parse_sdf
    with pytest.raises(cls) as info:
        parser(text)
    assert info.value.line == line
    if line is not None:
        assert f"line {line}" in str(info.value)


def test_self_bond_rejected():
    text = ETHENE.replace("  1  2  2  0", "  1  1  1  0")
    with pytest.raises(mg.BondIndexError):
        parse_sdf(text)


@settings(max_examples=100, deadline=None)
@given(graphs(max_atoms=12))
def test_parse_of_serialize_is_identity(g):
    assert validate(g).ok
    assert parse_sdf(serialize_sdf(g)).equals(g)


@settings(max_examples=100, deadline=None)
@given(graphs())
def test_parse_serialize_parse_is_stable(g):
    once = parse_sdf(serialize_sdf(g))
    twice = parse_sdf(serialize_sdf(once))
    assert twice.equals(once)


# --- graph invariants ---------------------------------------------------------


def test_bond_matrix_symmetric_and_diagonal_none():
    g = motif_library()["phenol"]
    assert np.array_equal(g.bond_matrix, g.bond_matrix.T)
    assert np.all(np.diag(g.bond_matrix) == BondClass.NONE)


def test_graph_arrays_read_only():
    g = motif_library()["benzene"]
    with pytest.raises(ValueError):
        g.positions[0, 0] = 1.0


def test_validate_flags_each_rule():
    g = MolecularGraph.from_atoms(["O", "C", "C"], [[0, 0, 0], [1.2, 0, 0], [2.4, 0, 0]], {(0, 1): BondClass.TRIPLE})
    assert validate(g).rules() == {"valence"}
    types = np.array(g.atom_types)
    types[1] = 0.5
    mat = np.array(g.bond_matrix)
    mat[1, 2] = BondClass.SINGLE  # asymmetric
    mat[2, 2] = BondClass.SINGLE
    pos = np.array(g.positions)
    pos[2, 0] = np.nan
    bad = MolecularGraph(pos, types, mat)
    assert validate(bad).rules() >= {"one_hot", "symmetry", "self_bond", "finite", "valence"}


@settings(max_examples=50, deadline=None)
@given(graphs())
def test_random_graphs_are_valid(g):
    assert validate(g).ok


# --- PDB ------------------------------------------------------------------------

PDB = """HEADER    test
ATOM      1  N   TYR A  12      11.104   6.134  -6.504  1.00  0.00           N
ATOM      2  CA  TYR A  12      11.639   6.071  -5.147  1.00  0.00           C
ATOM      3  HA  TYR A  12      12.000   6.000  -5.000  1.00  0.00           H
ATOM      4  OH  TYR A  12      10.000   5.000  -4.000  1.00  0.00           O
HETATM    5 ZN    ZN B 101       1.000   2.000   3.000  1.00  0.00          ZN
ATOM      6 CL   LIG C   1       0.000   0.000   0.000  1.00  0.00
ENDMDL
ATOM      7  N   GLY A  13       0.000   0.000   0.000  1.00  0.00           N
"""


def test_parse_pdb_records():
    p = parse_pocket_pdb(PDB)
    assert len(p) == 4
    assert p.elements == (Element.N, Element.C, Element.O, Element.Cl)
    assert p.residue_ids[0] == ("A", "TYR", 12)
    assert p.n_dropped == 1  # the zinc; hydrogens are silent
    assert p.positions[1].tolist() == [11.639, 6.071, -5.147]


def test_pdb_round_trip():
    rng = np.random.default_rng(3)
    p = random_pocket(rng)
    q = parse_pocket_pdb(serialize_pocket_pdb(p))
    assert np.array_equal(q.positions, p.positions)
    assert q.elements == p.elements and q.residue_ids == p.residue_ids


def test_pocket_residue_groups():
    p = parse_pocket_pdb(PDB)
    res = p.residues()
    assert list(res) == [("A", "TYR", 12), ("C", "LIG", 1)]
    assert res[("A", "TYR", 12)].shape == (3, 3)


def test_crop_keeps_whole_residues():
    p = parse_pocket_pdb(PDB)
    cropped = crop_pocket(p, [[11.1, 6.1, -6.5]], cutoff=1.0)
    assert len(cropped) == 3
    with pytest.raises(mg.EmptyPocketError):
        crop_pocket(p, [[100.0, 0, 0]], cutoff=1.0)


# --- complexes ----------------------------------------------------------------


def brute_edges(lig, pocket, cutoff):
    out = set()
    for i, a in enumerate(lig.positions):
        for k, b in enumerate(pocket.positions):
            if math.dist(a, b) <= cutoff:
                out.add((i, k))
    return out


@settings(max_examples=50, deadline=None)
@given(graphs(min_atoms=1))
def test_cross_edges_match_distance_scan(g):
    pocket = random_pocket(np.random.default_rng(g.n_atoms), n=25)
    cx = build_complex(g, pocket, 5.0)
    assert cx.edge_set() == brute_edges(g, pocket, 5.0)


def test_cross_edge_cutoff_inclusive():
    lig = MolecularGraph.from_atoms(["C"], [[0, 0, 0]], {})
    pocket = Pocket(np.array([[5.0, 0, 0], [5.001, 0, 0]]), (Element.C, Element.C), (("A", "ALA", 1),) * 2)
    assert build_complex(lig, pocket).edge_set() == {(0, 0)}


def test_complex_does_not_move_pocket():
    rng = np.random.default_rng(0)
    lig, pocket = random_graph(rng, 5), random_pocket(rng)
    before = pocket.positions.copy()
    build_complex(lig, pocket)
    assert np.array_equal(before, pocket.positions)
