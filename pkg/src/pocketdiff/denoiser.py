"""E(3)-equivariant graph denoiser over ligand + pocket atoms.

Nodes are ligand atoms followed by the pocket atoms that have at least one
ligand atom within ``message_cutoff``. Edges are every ligand-ligand pair
plus the ligand-pocket pairs inside the cutoff; both are undirected and
carry a feature vector that is updated symmetrically, so the bond output is
symmetric by construction. Pocket coordinates never move.

Each layer::

    m_ij = phi_e(h_i, h_j, |r_i - r_j|^2, e_ij)
    r_i += sum_j (r_i - r_j) * phi_x(m_ij) / (|r_i - r_j| + 1)     (ligand only)
    h_i += phi_h(h_i, sum_j m_ij)
    e_ij += phi_b(e_ij, h_i + h_j)

The output is an estimate of the state at ``t - 1``. With the default
``posterior`` parameterization the layers produce a clean-structure guess
``x0_hat`` which is mapped through the analytic posterior mean
``c0(t) * x0_hat + ct(t) * x_t``, taken about the pocket centroid so that the
map stays equivariant. ``direct`` emits the layer output as-is.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import autodiff as ad
from .diffusion import DiffusionState, NoiseSchedule, forward_jump, forward_step, posterior_coefficients, posterior_params
from .molgraph import N_BOND_CLASSES, N_ELEMENTS, BondClass, MolecularGraph, Pocket
from . import kernels

DEFAULT_LAMBDA_ATOM = 30.0
DEFAULT_LAMBDA_BOND = 30.0

_PROXIMITY = np.eye(N_BOND_CLASSES)[BondClass.PROXIMITY]


class NumericalError(FloatingPointError):
    """Non-finite value in a forward pass, gradient or loss."""


@dataclass(frozen=True)
class DenoiserConfig:
    layers: int = 6
    hidden_dim: int = 32
    time_embed_dim: int = 16
    edge_hidden_dim: int = 16
    message_cutoff: float = 5.0
    activation: str = "silu"
    parameterization: str = "posterior"
    radial_basis: int = 16  # Gaussian distance features appended to each message input, 0 disables

    def __post_init__(self):
        if self.layers < 1 or min(self.hidden_dim, self.time_embed_dim, self.edge_hidden_dim) < 1:
            raise ValueError("layers and dims must be >= 1")
        if self.time_embed_dim % 2:
            raise ValueError("time_embed_dim must be even")
        if self.message_cutoff <= 0:
            raise ValueError("message_cutoff must be positive")
        if self.activation != "silu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if self.radial_basis < 0:
            raise ValueError("radial_basis must be >= 0")
        if self.parameterization not in ("posterior", "direct"):
            raise ValueError(f"unknown parameterization {self.parameterization!r}")


Params = dict  # ordered name -> float64 array, declaration order is the checkpoint order


def param_shapes(cfg: DenoiserConfig) -> list[tuple[str, tuple[int, ...]]]:
    H, E, D = cfg.hidden_dim, cfg.edge_hidden_dim, cfg.time_embed_dim
    shapes = [
        ("embed.node.W", (N_ELEMENTS + D + 1, H)), ("embed.node.b", (H,)),
        ("embed.edge.W", (N_BOND_CLASSES, E)), ("embed.edge.b", (E,)),
    ]
    for k in range(cfg.layers):
        p = f"layer{k}."
        shapes += [
            (p + "msg.W1", (2 * H + 1 + E + cfg.radial_basis, H)), (p + "msg.b1", (H,)),
            (p + "msg.W2", (H, H)), (p + "msg.b2", (H,)),
            (p + "coord.W1", (H, H)), (p + "coord.b1", (H,)),
            (p + "coord.W2", (H, 1)), (p + "coord.b2", (1,)),
            (p + "node.W1", (2 * H, H)), (p + "node.b1", (H,)),
            (p + "node.W2", (H, H)), (p + "node.b2", (H,)),
            (p + "edge.W1", (E + H, E)), (p + "edge.b1", (E,)),
            (p + "edge.W2", (E, E)), (p + "edge.b2", (E,)),
        ]
    shapes += [
        ("head.atom.W1", (H, H)), ("head.atom.b1", (H,)),
        ("head.atom.W2", (H, N_ELEMENTS)), ("head.atom.b2", (N_ELEMENTS,)),
        ("head.bond.W1", (E, E)), ("head.bond.b1", (E,)),
        ("head.bond.W2", (E, N_BOND_CLASSES)), ("head.bond.b2", (N_BOND_CLASSES,)),
    ]
    return shapes


def init_params(cfg: DenoiserConfig, rng=None) -> Params:
    """Uniform init in +-1/sqrt(fan_in); biases use their layer's fan-in."""
    rng = np.random.default_rng(rng)
    params: Params = {}
    fan_in = 1
    for name, shape in param_shapes(cfg):
        if len(shape) == 2:
            fan_in = shape[0]
        bound = 1.0 / math.sqrt(fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def n_params(params: Params) -> int:
    return sum(v.size for v in params.values())


# ---------------------------------------------------------------------------
# inputs


def time_embedding(t: float, dim: int) -> np.ndarray:
    """Interleaved ``(sin(t w_k), cos(t w_k))`` with ``w_k = 10000^(-2k/dim)``."""
    k = np.arange(dim // 2)
    w = 10000.0 ** (-2.0 * k / dim)
    out = np.empty(dim)
    out[0::2] = np.sin(t * w)
    out[1::2] = np.cos(t * w)
    return out


@dataclass
class Graph:
    """Featurized complex for one forward pass."""

    n_lig: int
    node_pos: np.ndarray      # (N, 3)
    node_feat: np.ndarray     # (N, 8 + D + 1)
    edge_feat: np.ndarray     # (K, 6)
    edge_u: np.ndarray        # (K,)
    edge_v: np.ndarray        # (K,)
    n_lig_pairs: int          # first n_lig_pairs edges are ligand pairs (upper triangle order)
    pocket_index: np.ndarray  # pocket atom index of each pocket node

    @property
    def n_nodes(self) -> int:
        return len(self.node_pos)


def embed_inputs(state: DiffusionState, pocket: Pocket | None, t: float, cfg: DenoiserConfig) -> Graph:
    """Node and edge features for the complex at timestep ``t``.

    ``pocket`` must be expressed in the same frame as ``state.r``.
    """
    n = state.n_atoms
    temb = time_embedding(t, cfg.time_embed_dim)
    if pocket is not None and len(pocket):
        cross = kernels.pairs_within(state.r, pocket.positions, cfg.message_cutoff)
    else:
        cross = np.empty((0, 2), dtype=np.int64)
    used = np.unique(cross[:, 1])
    remap = np.full(len(pocket) if pocket is not None else 0, -1, dtype=np.int64)
    remap[used] = np.arange(len(used)) + n

    lig_feat = np.concatenate([state.a, np.tile(temb, (n, 1)), np.zeros((n, 1))], axis=1)
    if len(used):
        ptypes = pocket.type_matrix[used]
        poc_feat = np.concatenate([ptypes, np.tile(temb, (len(used), 1)), np.ones((len(used), 1))], axis=1)
        node_feat = np.concatenate([lig_feat, poc_feat])
        node_pos = np.concatenate([state.r, pocket.positions[used]])
    else:
        node_feat, node_pos = lig_feat, np.array(state.r, dtype=float)

    iu, ju = np.triu_indices(n, k=1)
    edge_u = np.concatenate([iu, cross[:, 0]]).astype(np.int64)
    edge_v = np.concatenate([ju, remap[cross[:, 1]]]).astype(np.int64)
    edge_feat = np.concatenate([state.b[iu, ju], np.tile(_PROXIMITY, (len(cross), 1))])
    return Graph(n, node_pos, node_feat, edge_feat.reshape(-1, N_BOND_CLASSES), edge_u, edge_v, len(iu), used)


# ---------------------------------------------------------------------------
# network


@dataclass
class Prediction:
    r_hat: np.ndarray
    a_hat: np.ndarray
    b_hat: np.ndarray


def radial_centers(cfg: DenoiserConfig) -> tuple[np.ndarray, float]:
    """Evenly spaced centres on ``[0, message_cutoff]`` and the matching width."""
    k = max(cfg.radial_basis, 1)
    centers = np.linspace(0.0, cfg.message_cutoff, k)
    spacing = cfg.message_cutoff / max(k - 1, 1)
    return centers, 1.0 / (2.0 * spacing * spacing)


def _mlp(x, P, prefix, final_act=False):
    h = ad.silu(ad.matmul(x, P[prefix + "W1"]) + P[prefix + "b1"])
    h = ad.matmul(h, P[prefix + "W2"]) + P[prefix + "b2"]
    return ad.silu(h) if final_act else h


def _check(x: ad.Tensor, where: str):
    if not np.all(np.isfinite(x.value)):
        raise NumericalError(f"non-finite values in {where}")


def _network(P, g: Graph, cfg: DenoiserConfig, state: DiffusionState, pocket, t, schedule):
    """Build the differentiable graph; returns (r_hat, a_hat, b_pairs) tensors."""
    N, n = g.n_nodes, g.n_lig
    K = len(g.edge_u)
    h = ad.matmul(g.node_feat, P["embed.node.W"]) + P["embed.node.b"]
    e = ad.matmul(g.edge_feat, P["embed.edge.W"]) + P["embed.edge.b"] if K else None
    r = ad.Tensor(g.node_pos)
    lig_mask = np.zeros((N, 1))
    lig_mask[:n] = 1.0
    # directed messages: both orientations of every undirected edge
    dst = np.concatenate([g.edge_u, g.edge_v])
    src = np.concatenate([g.edge_v, g.edge_u])
    eid = np.concatenate([np.arange(K), np.arange(K)])
    centers, gamma = radial_centers(cfg)
    for k in range(cfg.layers):
        p = f"layer{k}."
        L = {name[len(p):]: v for name, v in P.items() if name.startswith(p)}
        if K:
            diff = ad.gather(r, dst) - ad.gather(r, src)
            d2 = ad.sum(ad.square(diff), axis=1, keepdims=True)
            dist = ad.sqrt(d2)
            parts = [ad.gather(h, dst), ad.gather(h, src), d2, ad.gather(e, eid)]
            if cfg.radial_basis:
                parts.append(ad.exp(ad.square(dist - centers) * -gamma))
            m = _mlp(ad.concat(parts), L, "msg.", final_act=True)
            w = _mlp(m, L, "coord.")
            step = diff * w / (dist + 1.0)
            r = r + ad.segment_sum(step, dst, N) * lig_mask
            agg = ad.segment_sum(m, dst, N)
        else:
            agg = ad.Tensor(np.zeros((N, cfg.hidden_dim)))
        h = h + _mlp(ad.concat([h, agg]), L, "node.")
        if K:
            hu_hv = ad.gather(h, g.edge_u) + ad.gather(h, g.edge_v)
            e = e + _mlp(ad.concat([e, hu_hv]), L, "edge.")
        _check(h, f"layer {k} node features")
        _check(r, f"layer {k} coordinates")
    r_out = ad.gather(r, slice(0, n))
    a_out = _mlp(ad.gather(h, slice(0, n)), P, "head.atom.")
    b_out = None
    iu, ju = np.triu_indices(n, k=1)
    if g.n_lig_pairs:
        b_out = _mlp(ad.gather(e, slice(0, g.n_lig_pairs)), P, "head.bond.")
    if cfg.parameterization == "direct":
        return r_out, a_out + state.a, None if b_out is None else b_out + state.b[iu, ju]
    if schedule is None:
        raise ValueError("posterior parameterization needs the noise schedule")
    origin = pocket.centroid() if pocket is not None and len(pocket) else state.r.mean(axis=0)
    c0, ct, _ = posterior_coefficients(schedule, int(t))
    r_hat = (r_out - origin) * c0 + (ct * (state.r - origin) + origin)
    a_hat = a_out * c0 + ct * state.a
    b_hat = None if b_out is None else b_out * c0 + ct * state.b[iu, ju]
    return r_hat, a_hat, b_hat


def _as_tensors(params: Params, requires_grad: bool) -> dict[str, ad.Tensor]:
    return {k: ad.Tensor(v, requires_grad=requires_grad) for k, v in params.items()}


def _pairs_to_tensor(n: int, pairs: np.ndarray | None) -> np.ndarray:
    b = np.zeros((n, n, N_BOND_CLASSES))
    if pairs is not None:
        iu, ju = np.triu_indices(n, k=1)
        b[iu, ju] = pairs
        b[ju, iu] = pairs
    return b


def forward(params: Params, state: DiffusionState, pocket: Pocket | None, t: int, cfg: DenoiserConfig, schedule: NoiseSchedule | None = None) -> Prediction:
    """Predict the ligand state at ``t - 1``.

    ``pocket`` must share the frame of ``state.r``. With a single ligand atom
    and no pocket atom in range the coordinates pass through unchanged.
    """
    g = embed_inputs(state, pocket, t, cfg)
    r, a, b = _network(_as_tensors(params, False), g, cfg, state, pocket, t, schedule)
    return Prediction(r.value, a.value, _pairs_to_tensor(state.n_atoms, None if b is None else b.value))


# ---------------------------------------------------------------------------
# loss and gradients


@dataclass
class LossTerms:
    pos: float
    atom: float
    bond: float
    total: float


def _loss_tensors(r, a, b_pairs, target: DiffusionState, lam_a, lam_b):
    n = target.n_atoms
    l_pos = ad.sum(ad.square(r - target.r)) * (1.0 / n)
    l_atom = ad.sum(ad.square(a - target.a)) * (1.0 / n)
    if b_pairs is not None:
        iu, ju = np.triu_indices(n, k=1)
        l_bond = ad.sum(ad.square(b_pairs - target.b[iu, ju])) * (1.0 / len(iu))
    else:
        l_bond = ad.Tensor(0.0)
    total = l_pos + l_atom * lam_a + l_bond * lam_b
    return l_pos, l_atom, l_bond, total


def loss(pred: Prediction, target: DiffusionState, lam_a: float = DEFAULT_LAMBDA_ATOM, lam_b: float = DEFAULT_LAMBDA_BOND) -> LossTerms:
    """Squared-error loss; bond term averages over unordered ligand pairs."""
    n = target.n_atoms
    iu, ju = np.triu_indices(n, k=1)
    b_pairs = pred.b_hat[iu, ju] if len(iu) else None
    terms = _loss_tensors(ad.Tensor(pred.r_hat), ad.Tensor(pred.a_hat), None if b_pairs is None else ad.Tensor(b_pairs), target, lam_a, lam_b)
    return LossTerms(*(float(x.value) for x in terms))


@dataclass
class Example:
    """One training/gradient item: noisy state, its ``t - 1`` target, context."""

    state: DiffusionState
    target: DiffusionState
    pocket: Pocket | None
    t: int
    schedule: NoiseSchedule | None = None


def loss_and_grad(params: Params, example: Example, cfg: DenoiserConfig, lam_a=DEFAULT_LAMBDA_ATOM, lam_b=DEFAULT_LAMBDA_BOND):
    P = _as_tensors(params, True)
    g = embed_inputs(example.state, example.pocket, example.t, cfg)
    r, a, b = _network(P, g, cfg, example.state, example.pocket, example.t, example.schedule)
    terms = _loss_tensors(r, a, b, example.target, lam_a, lam_b)
    terms[-1].backward()
    grads = {k: (v.grad if v.grad is not None else np.zeros_like(v.value)) for k, v in P.items()}
    return LossTerms(*(float(x.value) for x in terms)), grads


def grad(params: Params, batch: list[Example], cfg: DenoiserConfig, lam_a=DEFAULT_LAMBDA_ATOM, lam_b=DEFAULT_LAMBDA_BOND):
    """Gradient of the mean batch loss; items are reduced in list order."""
    if not batch:
        raise ValueError("empty batch")
    total = {k: np.zeros_like(v) for k, v in params.items()}
    terms = np.zeros(4)
    for ex in batch:
        lt, g = loss_and_grad(params, ex, cfg, lam_a, lam_b)
        for k in total:
            total[k] += g[k]
        terms += (lt.pos, lt.atom, lt.bond, lt.total)
    scale = 1.0 / len(batch)
    for k, v in total.items():
        v *= scale
        if not np.all(np.isfinite(v)):
            raise NumericalError(f"non-finite gradient for {k}")
    return LossTerms(*(terms * scale)), total


def batch_loss(params: Params, batch: list[Example], cfg: DenoiserConfig, lam_a=DEFAULT_LAMBDA_ATOM, lam_b=DEFAULT_LAMBDA_BOND) -> float:
    vals = []
    for ex in batch:
        pred = forward(params, ex.state, ex.pocket, ex.t, cfg, ex.schedule)
        vals.append(loss(pred, ex.target, lam_a, lam_b).total)
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainItem:
    """A template ligand and its pocket, both in the pocket-centroid frame."""

    x0: DiffusionState
    pocket: Pocket | None
    origin: np.ndarray

    @classmethod
    def from_pair(cls, ligand: MolecularGraph, pocket: Pocket | None) -> "TrainItem":
        origin = pocket.centroid() if pocket is not None else ligand.positions.mean(axis=0)
        centered = None
        if pocket is not None:
            centered = Pocket(pocket.positions - origin, pocket.elements, pocket.residue_ids, pocket.atom_names, pocket.n_dropped)
        return cls(DiffusionState.from_graph(ligand, origin=origin), centered, origin)


@dataclass
class TrainConfig:
    steps: int = 1000
    learning_rate: float = 1e-3
    batch_size: int = 1
    lambda_atom: float = DEFAULT_LAMBDA_ATOM
    lambda_bond: float = DEFAULT_LAMBDA_BOND
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float = 0.0  # global-norm clip, 0 disables
    # "sample": regress on the drawn x^{t-1}; "posterior_mean": on E[x^{t-1} | x^t, x^0],
    # which has the same expected gradient without the target's own noise
    target: str = "posterior_mean"
    lr_decay: str = "none"  # "cosine" anneals the step size to zero over the run
    # t is drawn with probability proportional to c0(t)^-power, where c0 is the
    # x0 coefficient of the posterior mean; 0 gives uniform draws
    t_power: float = 0.0
    # exponential moving average of the weights, returned instead of the raw
    # iterate when > 0
    ema_decay: float = 0.0

    def __post_init__(self):
        if self.target not in ("sample", "posterior_mean"):
            raise ValueError(f"unknown training target {self.target!r}")
        if self.lr_decay not in ("none", "cosine"):
            raise ValueError(f"unknown learning-rate decay {self.lr_decay!r}")
        if self.steps < 0 or self.batch_size < 1:
            raise ValueError("steps must be >= 0 and batch_size >= 1")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError("ema_decay must be in [0, 1)")
        if not (math.isfinite(self.t_power) and self.t_power >= 0):
            raise ValueError("t_power must be finite and >= 0")


def timestep_probs(schedule: NoiseSchedule, power: float) -> np.ndarray:
    """Draw probabilities for t = 1..T, proportional to c0(t)^-power."""
    c0 = np.array([posterior_coefficients(schedule, t)[0] for t in range(1, schedule.T + 1)])
    w = c0 ** -power
    return w / w.sum()


def make_example(item: TrainItem, schedule: NoiseSchedule, t: int, rng: np.random.Generator, target: str = "sample") -> Example:
    """Draw ``x^{t-1}`` by a jump from ``x^0`` and ``x^t`` by one more step."""
    prev = forward_jump(item.x0, schedule, t - 1, rng)
    cur = forward_step(prev, schedule, t, rng)
    if target == "posterior_mean":
        x0 = item.x0
        prev = DiffusionState(
            posterior_params(x0.r, cur.r, t, schedule)[0],
            posterior_params(x0.a, cur.a, t, schedule)[0],
            posterior_params(x0.b, cur.b, t, schedule)[0],
            t - 1,
        )
    return Example(cur, prev, item.pocket, t, schedule)


class Adam:
    def __init__(self, params: Params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: Params, grads: Params) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k in params:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] = params[k] - self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def train(items, cfg: DenoiserConfig, schedule: NoiseSchedule, tcfg: TrainConfig, rng=None, params: Params | None = None, callback=None):
    """Adam training on random (molecule, t) draws.

    Returns ``(params, trace)`` where ``trace`` holds one :class:`LossTerms`
    per step.
    """
    items = list(items)
    if not items:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(rng)
    params = {k: np.array(v) for k, v in (params or init_params(cfg, rng)).items()}
    opt = Adam(params, tcfg.learning_rate, tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps)
    trace: list[LossTerms] = []
    probs = timestep_probs(schedule, tcfg.t_power) if tcfg.t_power > 0 else None
    ema = {k: v.copy() for k, v in params.items()} if tcfg.ema_decay > 0 else None
    for step in range(tcfg.steps):
        batch = []
        for _ in range(tcfg.batch_size):
            item = items[int(rng.integers(len(items)))]
            t = int(rng.integers(1, schedule.T + 1)) if probs is None else 1 + int(rng.choice(schedule.T, p=probs))
            batch.append(make_example(item, schedule, t, rng, tcfg.target))
        terms, grads = grad(params, batch, cfg, tcfg.lambda_atom, tcfg.lambda_bond)
        if not math.isfinite(terms.total):
            raise NumericalError(f"loss diverged at step {step}")
        if tcfg.grad_clip > 0:
            norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if norm > tcfg.grad_clip:
                grads = {k: g * (tcfg.grad_clip / norm) for k, g in grads.items()}
        if tcfg.learning_rate != 0.0:
            if tcfg.lr_decay == "cosine":
                opt.lr = 0.5 * tcfg.learning_rate * (1.0 + math.cos(math.pi * step / tcfg.steps))
            opt.step(params, grads)
        if ema is not None:
            for k in ema:
                ema[k] += (1.0 - tcfg.ema_decay) * (params[k] - ema[k])
        trace.append(terms)
        if callback is not None:
            callback(step, terms)
    return (ema if ema is not None else params), trace


# ---------------------------------------------------------------------------
# checkpoints

MAGIC = b"PDCKPT\x00\x01"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(params: Params, cfg: DenoiserConfig, extra: dict | None = None) -> bytes:
    """Header (magic, version, JSON config) then little-endian float64 blocks."""
    header = json.dumps({"config": asdict(cfg), "extra": extra or {}}, sort_keys=True).encode()
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", VERSION, len(header)))
    buf.write(header)
    for name, shape in param_shapes(cfg):
        arr = np.asarray(params[name], dtype="<f8")
        if arr.shape != shape:
            raise CheckpointError(f"{name} has shape {arr.shape}, config expects {shape}")
        buf.write(arr.tobytes(order="C"))
    return buf.getvalue()


def load_checkpoint(data: bytes) -> tuple[Params, DenoiserConfig, dict]:
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a pocketdiff checkpoint")
    off = len(MAGIC)
    version, hlen = struct.unpack_from("<II", data, off)
    if version != VERSION:
        raise CheckpointError(f"checkpoint version {version} != supported {VERSION}")
    off += 8
    header = json.loads(data[off: off + hlen])
    off += hlen
    known = {f.name for f in fields(DenoiserConfig)}
    cfg = DenoiserConfig(**{k: v for k, v in header["config"].items() if k in known})
    params: Params = {}
    for name, shape in param_shapes(cfg):
        count = int(np.prod(shape))
        if off + 8 * count > len(data):
            raise CheckpointError(f"checkpoint truncated in {name}")
        params[name] = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape).astype(np.float64)
        off += 8 * count
    if off != len(data):
        raise CheckpointError("trailing bytes after parameter blocks")
    return params, cfg, header.get("extra", {})
