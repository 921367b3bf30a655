import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings

from pocketdiff.evalgeom import (
    ANALYZED_BONDS,
    CHECK_NAMES,
    REFERENCE_LENGTHS,
    VDW_RADII,
    BondKey,
    CheckReport,
    GeometrySettings,
    Histogram,
    bond_length_histogram,
    geometry_checks,
    histogram_from_values,
    js_divergence,
    make_edges,
    pass_rate,
    reference_length,
)
from pocketdiff.molgraph import MAX_VALENCE, BOND_VALENCE, BondClass, Element, MolecularGraph, Pocket
from pocketdiff.toyset import motif_library, random_rotation

from strategies import random_graph, random_pocket, seeds

S, D = BondClass.SINGLE, BondClass.DOUBLE
EDGES = make_edges(0.02)


def ethene(d=1.34):
    return MolecularGraph.from_atoms(["C", "C"], [[0, 0, 0], [d, 0, 0]], {(0, 1): D})


# --- bond keys -------------------------------------------------------------------


def test_nine_analyzed_kinds():
    assert [str(k) for k in ANALYZED_BONDS] == ["C-C", "C=C", "C-O", "C=O", "C-N", "C=N", "C-Cl", "C-S", "C-F"]


def test_key_canonicalizes_carbon_first():
    assert BondKey.make("O", "C", D) == BondKey.parse("C=O")
    assert str(BondKey.make(Element.Cl, Element.C, S)) == "C-Cl"


def test_reference_table_values():
    assert REFERENCE_LENGTHS[BondKey.parse("C=O")] == 1.21
    assert reference_length("C", "C", BondClass.AROMATIC) == 1.39
    assert VDW_RADII[Element.Br] == 1.85


# --- histograms ------------------------------------------------------------------


def test_edges_cover_range():
    assert len(EDGES) == 126 and EDGES[0] == 0.5 and abs(EDGES[-1] - 3.0) < 1e-12
    with pytest.raises(ValueError):
        make_edges(0.0)
    with pytest.raises(ValueError):
        make_edges(0.03)


def test_ethene_lands_in_its_bin():
    h = bond_length_histogram([ethene()], BondKey.parse("C=C"))
    k = int(np.nonzero(h.counts)[0][0])
    assert h.total == 1 and EDGES[k] <= 1.34 < EDGES[k + 1]


def test_empty_input_histogram():
    h = bond_length_histogram([], BondKey.parse("C-C"))
    assert h.total == 0 and not h.counts.any()


def test_out_of_range_goes_to_overflow_bins():
    h = histogram_from_values([0.1, 3.0, 7.5, 1.0], EDGES)
    assert (h.underflow, h.overflow, int(h.counts.sum())) == (1, 2, 1)


def scan_oracle(graphs, key, edges):
    counts = [0] * (len(edges) - 1)
    under = over = 0
    for g in graphs:
        n = g.n_atoms
        for i in range(n):
            for j in range(i + 1, n):
                c = g.bond(i, j)
                if c in (BondClass.NONE, BondClass.PROXIMITY):
                    continue
                if BondKey.make(g.elements[i], g.elements[j], c) != key:
                    continue
                d = math.dist(g.positions[i], g.positions[j])
                if d < edges[0]:
                    under += 1
                elif d >= edges[-1]:
                    over += 1
                else:
                    k = 0
                    while not (edges[k] <= d < edges[k + 1]):
                        k += 1
                    counts[k] += 1
    return counts, under, over


@pytest.mark.parametrize("seed", range(3))
def test_histograms_match_bond_scan(seed):
    rng = np.random.default_rng(seed)
    graphs = []
    for _ in range(50):
        g = random_graph(rng, int(rng.integers(2, 10)))
        # pull coordinates near bonded distances so most lengths land in range
        graphs.append(MolecularGraph(g.positions * 0.35, g.atom_types, g.bond_matrix))
    for key in ANALYZED_BONDS:
        h = bond_length_histogram(graphs, key)
        counts, under, over = scan_oracle(graphs, key, EDGES)
        assert h.counts.tolist() == counts and h.underflow == under and h.overflow == over


def test_histogram_csv_layout():
    h = histogram_from_values([1.0, 1.01], EDGES)
    lines = h.to_csv().splitlines()
    assert lines[0] == "bin_lo,bin_hi,count"
    assert len(lines) == 1 + len(EDGES) + 1
    assert lines[1].startswith("-inf") and lines[-1].split(",")[1] == "inf"


# --- JSD -------------------------------------------------------------------------


def jsd_oracle(c1, c2):
    s1, s2 = sum(c1), sum(c2)
    total = 0.0
    for a, b in zip(c1, c2):
        p, q = a / s1, b / s2
        m = 0.5 * (p + q)
        if p > 0:
            total += 0.5 * p * math.log(p / m)
        if q > 0:
            total += 0.5 * q * math.log(q / m)
    return total


def random_hist(rng, edges, sparse=False):
    counts = rng.integers(0, 20, len(edges) - 1)
    if sparse:
        counts[rng.random(len(counts)) < 0.7] = 0
    counts[int(rng.integers(len(counts)))] += 1
    return Histogram(edges, counts, int(rng.integers(0, 3)), int(rng.integers(0, 3)))


def test_identical_histograms_zero():
    rng = np.random.default_rng(0)
    h = random_hist(rng, EDGES)
    assert js_divergence(h, h) == 0.0


def test_disjoint_supports_give_ln2():
    a = histogram_from_values([1.0], EDGES)
    b = histogram_from_values([2.0], EDGES)
    assert js_divergence(a, b) == pytest.approx(math.log(2), abs=1e-15)


def test_mismatched_binning_rejected():
    with pytest.raises(ValueError):
        js_divergence(histogram_from_values([1.0], EDGES), histogram_from_values([1.0], make_edges(0.05)))


def test_jsd_matches_oracle_and_bounds():
    rng = np.random.default_rng(1)
    edges = make_edges(0.1)
    for k in range(1000):
        h1, h2 = random_hist(rng, edges, sparse=k % 2 == 0), random_hist(rng, edges, sparse=k % 3 == 0)
        v = js_divergence(h1, h2)
        assert 0.0 <= v <= math.log(2)
        assert abs(v - js_divergence(h2, h1)) < 1e-12
        if k < 100:
            assert abs(v - jsd_oracle(h1.full_counts().tolist(), h2.full_counts().tolist())) < 1e-12


# --- checks ------------------------------------------------------------------------


def test_textbook_ethene_passes():
    r = geometry_checks(ethene())
    assert r.ok and set(r.passed) == set(CHECK_NAMES)


def test_short_bond_fails():
    g = MolecularGraph.from_atoms(["C", "C"], [[0, 0, 0], [0.8, 0, 0]], {(0, 1): S})
    r = geometry_checks(g)
    assert not r.passed["bond_lengths"] and not r.ok


def bfs_hops(n, bonds, start):
    adj = {i: [] for i in range(n)}
    for i, j in bonds:
        adj[i].append(j)
        adj[j].append(i)
    hops = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in hops:
                hops[v] = hops[u] + 1
                queue.append(v)
    return hops


def checks_oracle(g, pocket, s=GeometrySettings()):
    n = g.n_atoms
    elems = g.elements
    pos = g.positions
    bonds = [(i, j) for i in range(n) for j in range(i + 1, n) if g.bond(i, j) not in (BondClass.NONE, BondClass.PROXIMITY)]
    finite = all(math.isfinite(v) for row in pos for v in row)
    out = {}
    ok = finite
    for i, j in bonds:
        ref = reference_length(elems[i], elems[j], g.bond(i, j), s)
        if not abs(math.dist(pos[i], pos[j]) - ref) <= s.bond_tolerance:
            ok = False
    out["bond_lengths"] = ok
    ok = finite
    for i in range(n):
        hops = bfs_hops(n, bonds, i)
        for j in range(i + 1, n):
            if hops.get(j, math.inf) <= s.clash_exclusion_bonds:
                continue
            if math.dist(pos[i], pos[j]) < s.clash_factor * (VDW_RADII[elems[i]] + VDW_RADII[elems[j]]):
                ok = False
    out["internal_clash"] = ok
    ok = finite
    if pocket is not None:
        for i in range(n):
            for k in range(len(pocket)):
                if math.dist(pos[i], pocket.positions[k]) < s.clash_factor * (VDW_RADII[elems[i]] + VDW_RADII[pocket.elements[k]]):
                    ok = False
    out["pocket_clash"] = ok
    out["valence"] = all(
        sum(BOND_VALENCE[g.bond(i, j)] for j in range(n) if j != i) <= MAX_VALENCE[elems[i]] for i in range(n)
    )
    out["connected"] = len(bfs_hops(n, bonds, 0)) == n
    out["finite"] = finite
    return out


def corpus(seed, size=20):
    rng = np.random.default_rng(seed)
    out = []
    lib = list(motif_library().values())
    for k in range(size):
        if k % 2:
            g = lib[int(rng.integers(len(lib)))]
            jitter = rng.normal(0, 0.15, g.positions.shape)
            g = MolecularGraph(g.positions + jitter, g.atom_types, g.bond_matrix)
        else:
            g = random_graph(rng, int(rng.integers(1, 9)), extra_bonds=int(rng.integers(0, 6)))
            g = MolecularGraph(g.positions * rng.uniform(0.2, 0.6), g.atom_types, g.bond_matrix)
        out.append(g)
    return out, random_pocket(rng, n=25, scale=5.0)


@pytest.mark.parametrize("seed", range(5))
def test_checks_match_rule_oracle(seed):
    graphs, pocket = corpus(seed)
    seen = set()
    for g in graphs:
        for p in (None, pocket):
            r = geometry_checks(g, p)
            assert r.passed == checks_oracle(g, p)
            seen.update(name for name, v in r.passed.items() if not v)
            assert r.ok == all(r.passed.values())
    assert {"bond_lengths", "internal_clash"} <= seen


def test_non_finite_coordinates():
    g = ethene()
    pos = np.array(g.positions)
    pos[1, 0] = np.inf
    r = geometry_checks(MolecularGraph(pos, g.atom_types, g.bond_matrix))
    assert not r.passed["finite"] and not r.passed["bond_lengths"] and not r.ok


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_checks_invariant_under_rigid_motion(seed):
    graphs, pocket = corpus(seed, size=4)
    rng = np.random.default_rng(seed)
    R, tau = random_rotation(rng), rng.uniform(-20, 20, 3)
    moved_pocket = Pocket(pocket.positions @ R.T + tau, pocket.elements, pocket.residue_ids)
    for g in graphs:
        moved = MolecularGraph(g.positions @ R.T + tau, g.atom_types, g.bond_matrix)
        assert geometry_checks(moved, moved_pocket).passed == geometry_checks(g, pocket).passed


# --- pass rate -------------------------------------------------------------------


def report(**fails):
    return CheckReport({n: n not in fails for n in CHECK_NAMES})


def test_all_pass_waterfall_constant():
    rate, wf = pass_rate([report()] * 7)
    assert rate == 1.0 and wf.surviving == [7] * 6


def test_single_pocket_clash_failure():
    rate, wf = pass_rate([report()] * 9 + [report(pocket_clash=1)])
    assert rate == 0.9 and wf.surviving == [10, 10, 9, 9, 9, 9]


def test_empty_reports_rejected():
    with pytest.raises(ValueError):
        pass_rate([])


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_waterfall_matches_filter_oracle(seed):
    rng = np.random.default_rng(seed)
    reps = [CheckReport({n: bool(rng.random() < 0.8) for n in CHECK_NAMES}) for _ in range(int(rng.integers(1, 40)))]
    rate, wf = pass_rate(reps)
    expect = []
    for k in range(len(CHECK_NAMES)):
        expect.append(sum(1 for r in reps if all(r.passed[n] for n in CHECK_NAMES[: k + 1])))
    assert wf.surviving == expect
    assert rate == sum(r.ok for r in reps) / len(reps)


def test_waterfall_csv():
    _, wf = pass_rate([report(), report(valence=1)])
    lines = wf.to_csv().splitlines()
    assert lines[0] == "step,check,surviving,fraction_of_previous,cumulative_fraction"
    assert lines[5] == "4,valence,1,0.500000,0.500000"
