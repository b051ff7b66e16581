import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from modclass import _pykernels, kernels

try:
    from modclass import _ckernels
except ImportError:
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")


def test_region_counts_brute_force():
    z = np.array([[1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 5.0, 2.0]])
    t = np.array([1.0, 2.5])
    want = [[1, 1, 2], [2, 1, 1]]
    assert _pykernels.region_counts(z, t).tolist() == want
    if _ckernels is not None:
        assert _ckernels.region_counts(z, t).tolist() == want


finite = st.floats(-5, 5, allow_nan=False, width=64)


@needs_ext
@settings(max_examples=80, deadline=None)
@given(z=arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 40)), elements=finite),
       t=st.lists(finite, min_size=1, max_size=10))
def test_region_counts_backends_agree(z, t):
    t = np.array(sorted(t))
    z = np.ascontiguousarray(z)
    a = _pykernels.region_counts(z, t)
    b = _ckernels.region_counts(z, t)
    np.testing.assert_array_equal(a, b)
    assert np.all(a.sum(axis=1) == z.shape[1])


@needs_ext
@settings(max_examples=40, deadline=None)
@given(z=arrays(np.float64, st.integers(1, 50), elements=finite),
       scale=st.floats(0.05, 3.0))
def test_mixture_cdf_backends_agree(z, scale):
    means = np.array([-0.9, -0.3, 0.3, 0.9])
    w = np.full(4, 0.25)
    np.testing.assert_allclose(_ckernels.mixture_cdf(z, means, w, scale),
                               _pykernels.mixture_cdf(z, means, w, scale), rtol=1e-13, atol=1e-16)


@needs_ext
@settings(max_examples=40, deadline=None)
@given(F=arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 30)),
                elements=st.floats(0, 1)))
def test_kuiper_backends_agree(F):
    F = np.ascontiguousarray(np.sort(F, axis=1))
    np.testing.assert_allclose(_ckernels.kuiper_from_sorted_cdf(F),
                               _pykernels.kuiper_from_sorted_cdf(F), atol=1e-15)
