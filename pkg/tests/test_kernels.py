import numpy as np
import pytest
from hypothesis import given, settings

from pocketdiff import _kernels_py, kernels

from strategies import seeds

try:
    from pocketdiff import _kernels as compiled
except ImportError:  # pragma: no cover - depends on build
    compiled = None

BACKENDS = [_kernels_py] + ([compiled] if compiled is not None else [])


def test_backend_is_reported():
    assert kernels.BACKEND in ("python", "cython")
    if compiled is not None:
        assert kernels.BACKEND == "cython" or kernels._impl is _kernels_py


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__)
def test_pairs_within_brute_force(impl):
    rng = np.random.default_rng(0)
    a, b = rng.uniform(-5, 5, (30, 3)), rng.uniform(-5, 5, (40, 3))
    got = kernels.pairs_within(a, b, 3.0, impl=impl)
    want = [(i, j) for i in range(30) for j in range(40) if np.linalg.norm(a[i] - b[j]) <= 3.0]
    assert [tuple(p) for p in got.tolist()] == want


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__)
def test_empty_inputs(impl):
    e = np.empty((0, 3))
    x = np.zeros((2, 3))
    assert kernels.pairs_within(e, x, 1.0, impl=impl).shape == (0, 2)
    assert kernels.clash_pairs(x, e, np.ones(2), np.ones(0), 0.75, impl=impl).shape == (0, 2)
    assert np.all(np.isinf(kernels.min_distances(x, e, impl=impl)))


@pytest.mark.skipif(compiled is None, reason="compiled kernels not built")
@settings(max_examples=50, deadline=None)
@given(seeds)
def test_backends_agree(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-6, 6, (int(rng.integers(1, 40)), 3))
    b = rng.uniform(-6, 6, (int(rng.integers(1, 40)), 3))
    ra, rb = rng.uniform(1.4, 1.9, len(a)), rng.uniform(1.4, 1.9, len(b))
    cut = float(rng.uniform(0.5, 6))
    assert np.array_equal(kernels.pairs_within(a, b, cut, impl=compiled), kernels.pairs_within(a, b, cut, impl=_kernels_py))
    assert np.array_equal(
        kernels.clash_pairs(a, b, ra, rb, 0.75, impl=compiled), kernels.clash_pairs(a, b, ra, rb, 0.75, impl=_kernels_py)
    )
    assert np.allclose(kernels.min_distances(a, b, impl=compiled), kernels.min_distances(a, b, impl=_kernels_py), rtol=1e-14, atol=0)
    vals = rng.standard_normal((len(a), 4))
    idx = rng.integers(0, 7, len(a))
    assert np.allclose(kernels.segment_sum(vals, idx, 7, impl=compiled), kernels.segment_sum(vals, idx, 7, impl=_kernels_py), rtol=0, atol=1e-13)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__)
def test_segment_sum_keeps_trailing_shape(impl):
    vals = np.arange(24.0).reshape(4, 3, 2)
    out = kernels.segment_sum(vals, np.array([1, 1, 0, 2]), 3, impl=impl)
    assert out.shape == (3, 3, 2)
    assert np.array_equal(out[1], vals[0] + vals[1])
