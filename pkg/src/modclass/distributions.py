"""Theoretical mixture CDFs of the quadrature feature and sampled ECDFs."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .signal import Constellation

__all__ = [
    "EPS_P",
    "TestpointGuardError",
    "TheoreticalCdf",
    "TestpointSet",
    "SampledEcdf",
    "theoretical_cdf",
    "cdf_at",
    "pdf_at",
    "sampled_ecdf",
    "region_probabilities",
    "check_testpoints",
]

#: Minimum probability mass any class may place in a testpoint region.
EPS_P = 1e-6

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class TestpointGuardError(ValueError):
    """Testpoints leave a region with less than ``EPS_P`` mass for some class."""

    __test__ = False


@dataclass(frozen=True, eq=False)
class TheoreticalCdf:
    """Equal-variance Gaussian mixture: the marginal law of one feature entry.

    ``means``/``weights`` hold the pooled real and imaginary symbol
    coordinates, with duplicates merged. Every component has standard
    deviation ``sqrt(sigma2 / 2)``.
    """

    class_ref: str
    sigma2: float
    means: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2!r}")
        m = np.ascontiguousarray(self.means, dtype=np.float64)
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if m.shape != w.shape or m.ndim != 1 or m.size == 0:
            raise ValueError("means and weights must be equal-length 1-D arrays")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        m.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "weights", w)

    @property
    def scale(self) -> float:
        """Common component standard deviation."""
        return float(np.sqrt(self.sigma2 / 2.0))

    def cdf(self, z):
        return cdf_at(self, z)

    def pdf(self, z):
        return pdf_at(self, z)

    def support(self, width: float = 5.0):
        """Interval holding every component mean +- ``width`` std devs."""
        return (float(self.means.min() - width * self.scale),
                float(self.means.max() + width * self.scale))


@dataclass(frozen=True, eq=False)
class TestpointSet:
    __test__ = False

    t: np.ndarray
    snr_db: float
    feature: str = "quadrature"

    def __post_init__(self):
        t = np.array(self.t, dtype=np.float64).ravel()
        if t.size < 1:
            raise ValueError("need at least one testpoint")
        if not np.all(np.isfinite(t)):
            raise ValueError("testpoints must be finite")
        if np.any(np.diff(t) < 0):
            raise ValueError(f"testpoints must be non-decreasing, got {t.tolist()}")
        if self.feature != "quadrature":
            raise ValueError(f"unsupported feature map {self.feature!r}")
        t.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "snr_db", float(self.snr_db))

    def __len__(self):
        return self.t.size

    def __eq__(self, other):
        if not isinstance(other, TestpointSet):
            return NotImplemented
        return (self.snr_db == other.snr_db and self.feature == other.feature
                and np.array_equal(self.t, other.t))

    def to_dict(self) -> dict:
        return {"snr_db": self.snr_db, "feature": self.feature,
                "t": [float(v) for v in self.t]}

    @classmethod
    def from_dict(cls, data: dict) -> "TestpointSet":
        return cls(np.asarray(data["t"], dtype=float), data["snr_db"],
                   data.get("feature", "quadrature"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TestpointSet":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class SampledEcdf:
    """ECDF values at the testpoints, ``x[i] = F_N(t[i])``."""

    x: np.ndarray
    N: int

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64).ravel()
        N = int(self.N)
        if N < 1:
            raise ValueError("N must be >= 1")
        if np.any(x < 0) or np.any(x > 1) or np.any(np.diff(x) < 0):
            raise ValueError("ECDF samples must be non-decreasing within [0, 1]")
        k = x * N
        if np.any(np.abs(k - np.round(k)) > 1e-9 * N):
            raise ValueError("ECDF samples must be multiples of 1/N")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "N", N)

    def __len__(self):
        return self.x.size

    @classmethod
    def from_counts(cls, counts) -> "SampledEcdf":
        """Build from region counts ``n_1..n_{L+1}``."""
        counts = np.asarray(counts, dtype=np.int64)
        N = int(counts.sum())
        return cls(np.cumsum(counts[:-1]) / N, N)


def theoretical_cdf(c: Constellation, sigma2: float) -> TheoreticalCdf:
    """Mixture law of one entry of the quadrature feature under class ``c``."""
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2!r}")
    pooled = np.concatenate([c.points.real, c.points.imag])
    means, inverse = np.unique(pooled, return_inverse=True)
    weights = np.bincount(inverse, minlength=means.size) / pooled.size
    return TheoreticalCdf(c.name, float(sigma2), means, weights)


def cdf_at(F: TheoreticalCdf, z):
    """Mixture CDF; scalar in, scalar out, array in, array out."""
    arr = np.asarray(z, dtype=np.float64)
    flat = np.ascontiguousarray(arr.ravel())
    out = kernels.mixture_cdf(flat, F.means, F.weights, F.scale)
    out = np.clip(out, 0.0, 1.0).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def pdf_at(F: TheoreticalCdf, z):
    arr = np.asarray(z, dtype=np.float64)
    s = F.scale
    u = (arr[..., None] - F.means) / s
    out = (np.exp(-0.5 * u * u) @ F.weights) * (_INV_SQRT_2PI / s)
    return float(out) if out.ndim == 0 else out


def _as_t(t) -> np.ndarray:
    if isinstance(t, TestpointSet):
        return t.t
    return np.ascontiguousarray(t, dtype=np.float64).ravel()


def sampled_ecdf(z, t) -> SampledEcdf:
    """Fraction of ``z`` at or below each testpoint, by one bin-counting pass."""
    z = np.ascontiguousarray(z, dtype=np.float64).ravel()
    if z.size < 1:
        raise ValueError("need at least one sample")
    counts = kernels.region_counts(z[None, :], np.ascontiguousarray(_as_t(t)))[0]
    return SampledEcdf.from_counts(counts)


def region_probabilities(F: TheoreticalCdf, t) -> np.ndarray:
    """Mass of each of the L+1 regions cut by ``t`` under ``F``."""
    cdf = np.concatenate([[0.0], np.atleast_1d(cdf_at(F, _as_t(t))), [1.0]])
    return np.diff(cdf)


def check_testpoints(cdfs: Sequence[TheoreticalCdf], t, eps: float = EPS_P) -> None:
    """Raise :class:`TestpointGuardError` if any class leaves a region below ``eps``.

    Regions include the two unbounded ones, so every class has
    ``eps <= F(t_1)`` and ``F(t_L) <= 1 - eps`` as well.
    """
    tt = _as_t(t)
    for F in cdfs:
        p = region_probabilities(F, tt)
        bad = np.flatnonzero(p < eps)
        if bad.size:
            l = int(bad[0])
            lo = "-inf" if l == 0 else f"t[{l - 1}]={tt[l - 1]:.6g}"
            hi = "+inf" if l == tt.size else f"t[{l}]={tt[l]:.6g}"
            raise TestpointGuardError(
                f"class {F.class_ref}: region ({lo}, {hi}] has mass {p[l]:.3g} < {eps:g}"
            )
