import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from modclass.distributions import (
    EPS_P,
    SampledEcdf,
    TestpointGuardError,
    TestpointSet,
    TheoreticalCdf,
    cdf_at,
    check_testpoints,
    pdf_at,
    region_probabilities,
    sampled_ecdf,
    theoretical_cdf,
)
from modclass.signal import ChannelConfig, quadrature_feature, standard_constellation, transmit_batch

from conftest import cdfs_at


def _phi(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def test_4qam_mixture_collapses_to_two_components():
    F = theoretical_cdf(standard_constellation("4QAM"), 1.0)
    np.testing.assert_allclose(F.means, [-1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-15)
    np.testing.assert_allclose(F.weights, [0.5, 0.5])
    assert F.scale == pytest.approx(1 / np.sqrt(2))


@pytest.mark.parametrize("name", ["4QAM", "16QAM", "64QAM"])
def test_mixture_weights_and_means(name):
    c = standard_constellation(name)
    F = theoretical_cdf(c, 0.3)
    assert F.weights.sum() == pytest.approx(1.0, abs=1e-12)
    pooled = np.concatenate([c.points.real, c.points.imag])
    for m, w in zip(F.means, F.weights):
        assert w == pytest.approx(np.mean(pooled == m))


def test_limits_and_symmetry(backend):
    for F in cdfs_at(0.0, "4QAM", "16QAM", "64QAM"):
        assert cdf_at(F, -1e6) == 0.0
        assert cdf_at(F, 1e6) == 1.0
        assert cdf_at(F, 0.0) == pytest.approx(0.5, abs=1e-15)


def test_16qam_median_zero():
    F = theoretical_cdf(standard_constellation("16QAM"), 1.0)
    assert cdf_at(F, 0.0) == pytest.approx(0.5, abs=1e-15)


def test_cdf_known_value(backend):
    # 0.5*Phi(0) + 0.5*Phi(2), Phi from math.erf
    F = theoretical_cdf(standard_constellation("4QAM"), 1.0)
    expected = 0.25 + 0.5 * _phi(2.0)
    assert expected == pytest.approx(0.7386249340259105, abs=1e-15)
    assert cdf_at(F, 1 / np.sqrt(2)) == pytest.approx(expected, abs=1e-14)


def test_cdf_matches_erf_oracle_pointwise(backend):
    F = theoretical_cdf(standard_constellation("64QAM"), 0.4)
    z = np.linspace(-3, 3, 41)
    oracle = [sum(w * _phi((v - m) / F.scale) for m, w in zip(F.means, F.weights)) for v in z]
    np.testing.assert_allclose(cdf_at(F, z), oracle, rtol=1e-12, atol=1e-15)


def test_cdf_shape_handling():
    F = cdfs_at(0.0, "4QAM")[0]
    assert isinstance(cdf_at(F, 0.1), float)
    assert cdf_at(F, np.zeros((2, 3))).shape == (2, 3)


def test_cdf_monotone_and_pdf_nonnegative(backend):
    for F in cdfs_at(-3.0, "4QAM", "16QAM", "64QAM"):
        z = np.linspace(-6, 6, 5001)
        assert np.all(np.diff(cdf_at(F, z)) >= 0)
        assert np.all(pdf_at(F, z) >= 0)


def test_pdf_integrates_to_one():
    for F in cdfs_at(2.0, "4QAM", "16QAM", "64QAM"):
        lo, hi = F.support(12.0)
        val, _ = integrate.quad(lambda v: pdf_at(F, v), lo, hi, limit=200, epsabs=1e-12)
        assert val == pytest.approx(1.0, abs=1e-6)


def test_pdf_is_cdf_derivative(backend):
    h = 1e-4
    for F in cdfs_at(0.0, "4QAM", "16QAM"):
        z = np.linspace(-3, 3, 61)
        fd = (cdf_at(F, z + h) - cdf_at(F, z - h)) / (2 * h)
        np.testing.assert_allclose(fd, pdf_at(F, z), atol=1e-6)


def test_pdf_symmetric_4qam():
    F = theoretical_cdf(standard_constellation("4QAM"), 1.0)
    z = np.linspace(0, 4, 17)
    np.testing.assert_allclose(pdf_at(F, z), pdf_at(F, -z), rtol=1e-14)


def test_sampled_ecdf_examples(backend):
    assert sampled_ecdf([1, 2, 3, 4], [2.5]).x.tolist() == [0.5]
    assert sampled_ecdf([1, 2, 3, 4], [1, 3]).x.tolist() == [0.25, 0.75]
    e = sampled_ecdf([1, 2, 3, 4], [0.0, 10.0])
    assert e.x.tolist() == [0.0, 1.0] and e.N == 4


@settings(max_examples=60, deadline=None)
@given(z=st.lists(st.integers(-20, 20), min_size=1, max_size=60),
       t=st.lists(st.integers(-22, 22), min_size=1, max_size=8))
def test_sampled_ecdf_matches_brute_force(z, t):
    t = sorted(set(t))
    z = [v / 4 for v in z]
    t = [v / 4 for v in t]
    got = sampled_ecdf(z, t)
    want = [sum(v <= ti for v in z) / len(z) for ti in t]
    assert got.x.tolist() == want
    assert np.all(np.diff(got.x) >= 0)
    np.testing.assert_allclose(got.x * got.N, np.round(got.x * got.N))


def test_sampled_ecdf_validation():
    with pytest.raises(ValueError):
        SampledEcdf([0.5, 0.25], 4)
    with pytest.raises(ValueError):
        SampledEcdf([0.3], 4)
    with pytest.raises(ValueError):
        sampled_ecdf([], [0.0])


def test_testpoint_set_invariants_and_json():
    with pytest.raises(ValueError):
        TestpointSet([1.0, 0.0], 0.0)
    with pytest.raises(ValueError):
        TestpointSet([], 0.0)
    tp = TestpointSet([-0.5, 0.1, 0.7], snr_db=3.0)
    doc = json.loads(tp.to_json())
    assert doc == {"snr_db": 3.0, "feature": "quadrature", "t": [-0.5, 0.1, 0.7]}
    assert TestpointSet.from_json(tp.to_json()) == tp


def test_guard_names_the_region(qam_pair_0db):
    with pytest.raises(TestpointGuardError, match=r"t\[0\].*t\[1\]"):
        check_testpoints(qam_pair_0db, [0.1, 0.1])
    with pytest.raises(TestpointGuardError, match=r"-inf"):
        check_testpoints(qam_pair_0db, [-40.0])
    check_testpoints(qam_pair_0db, [-0.5, 0.5])


def test_region_probabilities_sum():
    F = cdfs_at(0.0, "16QAM")[0]
    p = region_probabilities(F, [-1.0, 0.0, 1.0])
    assert p.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(p >= EPS_P)


def test_mixture_validation():
    with pytest.raises(ValueError):
        TheoreticalCdf("x", 0.0, [0.0], [1.0])
    with pytest.raises(ValueError):
        TheoreticalCdf("x", 1.0, [0.0, 1.0], [0.5, 0.6])


def test_ecdf_mean_is_unbiased(backend):
    # E[x_i] = F(t_i): mean over 1e4 blocks within 5 standard errors
    c = standard_constellation("16QAM")
    ch = ChannelConfig(0.0)
    F = theoretical_cdf(c, ch.noise_variance)
    t = np.array([-1.2, -0.3, 0.4, 1.5])
    Z = quadrature_feature(transmit_batch(c, ch, 200, 10_000, np.random.default_rng(5)))
    X = np.array([sampled_ecdf(z, t).x for z in Z[:10]])
    from modclass import kernels
    counts = kernels.region_counts(np.ascontiguousarray(Z), t)
    X_all = np.cumsum(counts, axis=1)[:, :-1] / Z.shape[1]
    np.testing.assert_array_equal(X, X_all[:10])
    mu = cdf_at(F, t)
    se = np.sqrt(mu * (1 - mu) / Z.shape[1] / Z.shape[0])
    assert np.all(np.abs(X_all.mean(axis=0) - mu) < 5 * se)
