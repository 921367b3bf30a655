"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def _sqdist(a, b):
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def pairs_within(a, b, cutoff):
    """Index pairs ``(i, j)`` with ``|a[i] - b[j]| <= cutoff``, row-major order."""
    if len(a) == 0 or len(b) == 0:
        return np.empty((0, 2), dtype=np.int64)
    i, j = np.nonzero(_sqdist(a, b) <= cutoff * cutoff)
    return np.stack([i, j], axis=1).astype(np.int64)


def min_distances(a, b):
    """Distance from every point of ``a`` to its nearest point in ``b``."""
    if len(b) == 0:
        return np.full(len(a), np.inf)
    if len(a) == 0:
        return np.empty(0)
    return np.sqrt(_sqdist(a, b).min(axis=1))


def clash_pairs(a, b, ra, rb, factor):
    """Pairs closer than ``factor * (ra[i] + rb[j])``."""
    if len(a) == 0 or len(b) == 0:
        return np.empty((0, 2), dtype=np.int64)
    lim = factor * (ra[:, None] + rb[None, :])
    i, j = np.nonzero(_sqdist(a, b) < lim * lim)
    return np.stack([i, j], axis=1).astype(np.int64)


def segment_sum(values, index, n):
    """Row-wise scatter-add of ``values`` into ``n`` buckets."""
    out = np.zeros((n, values.shape[1]))
    np.add.at(out, index, values)
    return out
