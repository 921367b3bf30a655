"""Hot geometry kernels with a compiled backend when available.

The compiled extension is built from ``_kernels.pyx`` at install time. When
it is missing, or when ``POCKETDIFF_PURE_PYTHON=1`` is set, the numpy
implementations in :mod:`pocketdiff._kernels_py` are used instead. Both
backends return identical index sets and agree on sums to rounding.
"""

import os

import numpy as np

from . import _kernels_py

_impl = _kernels_py
BACKEND = "python"

if os.environ.get("POCKETDIFF_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _kernels_py


def _coords(x):
    return np.ascontiguousarray(x, dtype=np.float64).reshape(-1, 3)


def pairs_within(a, b, cutoff, impl=None):
    """All ``(i, j)`` with ``||a[i] - b[j]|| <= cutoff``, sorted row-major."""
    impl = impl or _impl
    return impl.pairs_within(_coords(a), _coords(b), float(cutoff))


def min_distances(a, b, impl=None):
    impl = impl or _impl
    return impl.min_distances(_coords(a), _coords(b))


def clash_pairs(a, b, radii_a, radii_b, factor, impl=None):
    """Pairs whose distance is below ``factor`` times the summed radii."""
    impl = impl or _impl
    ra = np.ascontiguousarray(radii_a, dtype=np.float64)
    rb = np.ascontiguousarray(radii_b, dtype=np.float64)
    return impl.clash_pairs(_coords(a), _coords(b), ra, rb, float(factor))


def segment_sum(values, index, n, impl=None):
    """Sum rows of ``values`` into ``n`` output rows selected by ``index``."""
    impl = impl or _impl
    values = np.asarray(values, dtype=np.float64)
    shape = values.shape
    flat = np.ascontiguousarray(values.reshape(shape[0], -1))
    idx = np.ascontiguousarray(index, dtype=np.int64)
    return impl.segment_sum(flat, idx, int(n)).reshape((n,) + shape[1:])
