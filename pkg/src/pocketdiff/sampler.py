"""Reverse diffusion inside a fixed pocket, with optional clamped atoms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import networkx as nx
import numpy as np

from .denoiser import DenoiserConfig, NumericalError, Params, forward
from .diffusion import DiffusionState, NoiseSchedule, apply_mask, symmetric_bond_noise
from .molgraph import (
    N_BOND_CLASSES,
    N_ELEMENTS,
    BondClass,
    MolecularGraph,
    Pocket,
    validate,
)


@dataclass(frozen=True, eq=False)
class FixedAtoms:
    """Reference ligand whose masked atoms are clamped during sampling.

    Reference atom ``k`` occupies generated atom slot ``k``.
    """

    reference: MolecularGraph
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != (self.reference.n_atoms,):
            raise ValueError("fixed mask length must equal reference atom count")
        object.__setattr__(self, "mask", mask)


@dataclass(eq=False)
class SampleRequest:
    pocket: Pocket
    params: Params
    config: DenoiserConfig
    schedule: NoiseSchedule
    n_atoms: int | str = "auto"
    rng_seed: int = 0
    fixed: FixedAtoms | None = None
    init_center: np.ndarray | None = None  # defaults to the pocket centroid
    atom_count_stats: Mapping[int, float] | None = None
    # rotate every position-noise draw; used to test rigid-motion covariance
    noise_rotation: np.ndarray | None = None


@dataclass
class SampleSummary:
    seed: int
    schedule: str
    n_atoms: int
    displacement: list[float] = field(default_factory=list)
    connected: bool = True
    valid: bool = True
    violations: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "schedule": self.schedule,
            "n_atoms": self.n_atoms,
            "displacement": self.displacement,
            "connected": self.connected,
            "valid": self.valid,
            "violations": self.violations,
        }


def n_atoms_auto(stats: Mapping[int, float], rng=None) -> int:
    """Draw an atom count from an empirical histogram ``{count: weight}``."""
    if not stats:
        raise ValueError("empty atom-count statistics")
    keys = sorted(int(k) for k in stats)
    w = np.array([float(stats[k]) for k in keys])
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("atom-count weights must be nonnegative with positive sum")
    rng = np.random.default_rng(rng)
    return keys[int(rng.choice(len(keys), p=w / w.sum()))]


def atom_count_stats(graphs) -> dict[int, float]:
    counts: dict[int, float] = {}
    for g in graphs:
        counts[g.n_atoms] = counts.get(g.n_atoms, 0.0) + 1.0
    total = sum(counts.values())
    return {k: v / total for k, v in sorted(counts.items())}


def decode(state: DiffusionState, origin=None, name: str = "") -> MolecularGraph:
    """Argmax decoding of a continuous state.

    Ties go to the lowest class index. Proximity and none both decode to no
    covalent bond. Only the upper triangle of ``b`` is read.
    """
    n = state.n_atoms
    types = np.zeros((n, N_ELEMENTS))
    types[np.arange(n), np.argmax(state.a, axis=1)] = 1.0
    mat = np.full((n, n), BondClass.NONE, dtype=np.int8)
    iu, ju = np.triu_indices(n, k=1)
    if len(iu):
        cls = np.argmax(state.b[iu, ju], axis=1)
        cls = np.where(cls <= BondClass.AROMATIC, cls, BondClass.NONE)
        mat[iu, ju] = cls
        mat[ju, iu] = cls
    r = np.array(state.r, dtype=float)
    if origin is not None:
        r = r + np.asarray(origin, dtype=float)
    return MolecularGraph(r, types, mat, name)


def is_connected(graph: MolecularGraph) -> bool:
    g = nx.from_numpy_array(graph.covalent_adjacency().astype(int))
    return nx.is_connected(g)


def largest_component(graph: MolecularGraph) -> MolecularGraph:
    """Largest covalent component; ties go to the one with the lowest atom index."""
    g = nx.from_numpy_array(graph.covalent_adjacency().astype(int))
    comps = sorted(nx.connected_components(g), key=lambda c: (-len(c), min(c)))
    keep = np.array(sorted(comps[0]))
    return MolecularGraph(
        graph.positions[keep], graph.atom_types[keep], graph.bond_matrix[np.ix_(keep, keep)], graph.name
    )


def refine_noop(graph: MolecularGraph, pocket: Pocket) -> MolecularGraph:
    """Post-generation refinement hook; identity here.

    An external pocket-aware optimizer can be plugged in through
    ``sample(..., refine=...)`` with this signature.
    """
    return graph


def _reference_state(fixed: FixedAtoms, n: int, origin: np.ndarray) -> tuple[DiffusionState, np.ndarray]:
    ref = DiffusionState.from_graph(fixed.reference, origin=origin)
    k = fixed.reference.n_atoms
    r = np.zeros((n, 3))
    a = np.zeros((n, N_ELEMENTS))
    b = np.zeros((n, n, N_BOND_CLASSES))
    r[:k], a[:k], b[:k, :k] = ref.r, ref.a, ref.b
    mask = np.zeros(n, dtype=bool)
    mask[:k] = fixed.mask
    return DiffusionState(r, a, b, 0, mask), mask


def sample(request: SampleRequest, refine: Callable[[MolecularGraph, Pocket], MolecularGraph] = refine_noop):
    """Generate one ligand by ancestral sampling from ``t = T`` down to 1.

    Positions start from ``N(init_center, I)``, type and bond vectors from
    ``N(0, I)``. Each step draws ``x^{t-1} ~ N(pred, beta_tilde_t I)`` and then
    re-imposes fixed atoms. Returns ``(graph, summary)``.
    """
    pocket, sched, cfg = request.pocket, request.schedule, request.config
    rng = np.random.default_rng(request.rng_seed)
    if request.n_atoms == "auto":
        if request.atom_count_stats is None:
            raise ValueError("n_atoms='auto' needs atom_count_stats")
        n = n_atoms_auto(request.atom_count_stats, rng)
    else:
        n = int(request.n_atoms)
    if request.fixed is not None and request.fixed.reference.n_atoms > n:
        if request.n_atoms != "auto":
            raise ValueError("fixed reference has more atoms than n_atoms")
        n = request.fixed.reference.n_atoms
    if n < 1:
        raise ValueError("n_atoms must be >= 1")

    origin = pocket.centroid()
    local = Pocket(pocket.positions - origin, pocket.elements, pocket.residue_ids, pocket.atom_names, pocket.n_dropped)
    center = np.zeros(3) if request.init_center is None else np.asarray(request.init_center, float) - origin
    rot = request.noise_rotation

    def pos_noise():
        z = rng.standard_normal((n, 3))
        return z if rot is None else z @ np.asarray(rot).T

    r = center + pos_noise()
    a = rng.standard_normal((n, N_ELEMENTS))
    b = symmetric_bond_noise(n, rng)
    state = DiffusionState(r, a, b, sched.T)
    ref, mask = (None, np.zeros(n, dtype=bool))
    if request.fixed is not None:
        ref, mask = _reference_state(request.fixed, n, origin)
        state = apply_mask(state, mask, ref)

    trace = []
    for t in range(sched.T, 0, -1):
        pred = forward(request.params, state, local, t, cfg, sched)
        sd = math.sqrt(sched.posterior_variance(t))
        r = pred.r_hat + sd * pos_noise()
        a = pred.a_hat + sd * rng.standard_normal((n, N_ELEMENTS))
        b = pred.b_hat + sd * symmetric_bond_noise(n, rng)
        new = DiffusionState(r, a, b, t - 1, mask)
        if ref is not None:
            new = apply_mask(new, mask, ref)
        if not (np.all(np.isfinite(new.r)) and np.all(np.isfinite(new.a)) and np.all(np.isfinite(new.b))):
            raise NumericalError(f"non-finite sampling state at step t={t}")
        trace.append(float(np.mean(np.linalg.norm(new.r - state.r, axis=1))))
        state = new

    graph = decode(state, origin)
    if request.fixed is not None and mask.any():
        # undo frame round-off so clamped atoms match the reference bit-exactly
        k = request.fixed.reference.n_atoms
        pos = np.array(graph.positions)
        types = np.array(graph.atom_types)
        fm = np.nonzero(mask[:k])[0]
        pos[fm] = request.fixed.reference.positions[fm]
        types[fm] = request.fixed.reference.atom_types[fm]
        graph = MolecularGraph(pos, types, graph.bond_matrix, graph.name)
    graph = refine(graph, pocket)

    report = validate(graph)
    summary = SampleSummary(
        seed=int(request.rng_seed),
        schedule=sched.ident,
        n_atoms=n,
        displacement=trace,
        connected=is_connected(graph),
        valid=report.ok,
        violations=[f"{v.rule}:{','.join(map(str, v.atoms))}" for v in report.violations],
    )
    return graph, summary


def element_multiset(graph: MolecularGraph) -> list[str]:
    return sorted(e.value for e in graph.elements)

