"""Bayes classification of sampled-ECDF features.

Two routes are provided. :func:`exact_bayes_classify` scores the region
counts with the exact multinomial likelihood. :func:`discriminant_classify`
uses the large-N Gaussian law of the ECDF vector, which turns the Bayes rule
into one quadratic discriminant per class.

Features stay in ECDF units throughout: ``mu[i] = F(t_i)`` and the
covariance carries the ``1/N`` factor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.special import gammaln, logsumexp, xlogy

from .distributions import (
    EPS_P,
    SampledEcdf,
    TestpointSet,
    TheoreticalCdf,
    cdf_at,
    check_testpoints,
)

__all__ = [
    "RegionProbabilities",
    "ClassStatistics",
    "ClassDiscriminant",
    "DiscriminantModel",
    "region_counts",
    "multinomial_log_pmf",
    "exact_bayes_classify",
    "exact_bayes_scores",
    "class_statistics",
    "build_discriminant_model",
    "discriminant_classify",
    "discriminant_scores",
    "normalize_priors",
]


def normalize_priors(priors, K: int) -> np.ndarray:
    """Validate priors (uniform when ``None``)."""
    if priors is None:
        return np.full(K, 1.0 / K)
    p = np.asarray(priors, dtype=np.float64).ravel()
    if p.size != K:
        raise ValueError(f"expected {K} priors, got {p.size}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("priors must be nonnegative and sum to 1")
    return p


@dataclass(frozen=True, eq=False)
class RegionProbabilities:
    """Probability of a sample landing in each of the L+1 testpoint regions."""

    p: np.ndarray
    class_ref: str = ""

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64).ravel()
        if p.size < 2:
            raise ValueError("need at least two regions")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("region probabilities must be nonnegative and sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    def __len__(self):
        return self.p.size

    @classmethod
    def from_cdf(cls, F: TheoreticalCdf, t, eps: float = EPS_P) -> "RegionProbabilities":
        check_testpoints([F], t, eps)
        tt = t.t if isinstance(t, TestpointSet) else np.asarray(t, dtype=float)
        cdf = np.concatenate([[0.0], np.atleast_1d(cdf_at(F, tt)), [1.0]])
        p = np.diff(cdf)
        # absorb rounding so the sum is 1 to machine precision
        p[-1] = 1.0 - cdf[-2]
        return cls(p, F.class_ref)


def region_counts(x: SampledEcdf) -> np.ndarray:
    """Samples per region, ``n_i = N (x_i - x_{i-1})`` with ``x_0 = 0, x_{L+1} = 1``."""
    edges = np.concatenate([[0.0], x.x, [1.0]])
    n = np.rint(x.N * np.diff(edges)).astype(np.int64)
    # rounding of each difference is exact for valid inputs; keep the total pinned
    n[-1] = x.N - n[:-1].sum()
    return n


def multinomial_log_pmf(n, p) -> float:
    """Log multinomial probability of counts ``n`` under cell probabilities ``p``."""
    n = np.asarray(n, dtype=np.float64).ravel()
    p = np.asarray(p.p if isinstance(p, RegionProbabilities) else p, dtype=np.float64).ravel()
    if n.size != p.size:
        raise ValueError(f"{n.size} counts but {p.size} probabilities")
    if np.any(n < 0):
        raise ValueError("counts must be nonnegative")
    N = n.sum()
    with np.errstate(divide="ignore"):
        loglik = xlogy(n, p).sum()
    return float(gammaln(N + 1) - gammaln(n + 1).sum() + loglik)


def _probability_matrix(classes) -> np.ndarray:
    rows = [c.p if isinstance(c, RegionProbabilities) else np.asarray(c, dtype=float)
            for c in classes]
    P = np.vstack(rows)
    return P


def exact_bayes_scores(counts, classes, priors=None) -> np.ndarray:
    """Unnormalized log posteriors for a (B, L+1) batch of region counts."""
    P = _probability_matrix(classes)
    counts = np.atleast_2d(np.asarray(counts, dtype=np.float64))
    if counts.shape[1] != P.shape[1]:
        raise ValueError(f"{counts.shape[1]} regions in counts, {P.shape[1]} in classes")
    with np.errstate(divide="ignore"):
        log_prior = np.log(normalize_priors(priors, P.shape[0]))
    N = counts.sum(axis=1, keepdims=True)
    base = gammaln(N + 1) - gammaln(counts + 1).sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        loglik = xlogy(counts[:, None, :], P[None, :, :]).sum(axis=2)
        return base + loglik + log_prior[None, :]


def exact_bayes_classify(x: SampledEcdf, classes: Sequence, priors=None):
    """Maximum-posterior class under the exact multinomial law of the counts.

    Returns ``(k, log_posterior)``. Ties go to the lowest class index.
    """
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    scores = exact_bayes_scores(region_counts(x)[None, :], classes, priors)[0]
    k = int(np.argmax(scores))
    total = logsumexp(scores)
    post = scores - total if np.isfinite(total) else scores
    return k, post


@dataclass(frozen=True, eq=False)
class ClassStatistics:
    """Mean and covariance of the sampled-ECDF vector under one class."""

    mu: np.ndarray
    sigma: np.ndarray
    N: int
    class_ref: str = ""
    testpoints: Optional[TestpointSet] = None

    def __post_init__(self):
        mu = np.array(self.mu, dtype=np.float64).ravel()
        sigma = np.array(self.sigma, dtype=np.float64).reshape(mu.size, mu.size)
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-15 * max(1.0, np.abs(sigma).max())):
            raise ValueError("covariance must be symmetric")
        mu.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def __len__(self):
        return self.mu.size


def class_statistics(F: TheoreticalCdf, t: TestpointSet, N: int) -> ClassStatistics:
    """Asymptotic Gaussian law of the ECDF at ``t`` for ``N`` samples of ``F``.

    ``Sigma[i, j] = F(t_min) (1 - F(t_max)) / N``, the cumulative-sum
    transform of the multinomial count covariance.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    tt = t.t if isinstance(t, TestpointSet) else np.asarray(t, dtype=float)
    check_testpoints([F], tt)
    mu = np.atleast_1d(cdf_at(F, tt))
    lo = np.minimum.outer(mu, mu)
    hi = np.maximum.outer(mu, mu)
    sigma = lo * (1.0 - hi) / N
    if not isinstance(t, TestpointSet):
        t = TestpointSet(tt, snr_db=float("nan"))
    return ClassStatistics(mu, sigma, int(N), F.class_ref, t)


def _cholesky(sigma, name=""):
    try:
        return linalg.cho_factor(sigma, lower=True, check_finite=True)
    except linalg.LinAlgError:
        raise ValueError(f"covariance of class {name!r} is not positive definite") from None


@dataclass(frozen=True, eq=False)
class ClassDiscriminant:
    """``g(x) = x'Wx + w'x + w0`` for one class."""

    name: str
    mu: np.ndarray
    sigma: np.ndarray
    W: np.ndarray
    w: np.ndarray
    w0: float

    def score(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.einsum("...i,ij,...j->...", x, self.W, x) + x @ self.w + self.w0


@dataclass(frozen=True, eq=False)
class DiscriminantModel:
    classes: List[ClassDiscriminant]
    priors: np.ndarray
    testpoints: TestpointSet
    N: int
    sigma2: Optional[float] = None

    @property
    def names(self):
        return [c.name for c in self.classes]

    @property
    def snr_db(self) -> float:
        return self.testpoints.snr_db

    def __len__(self):
        return len(self.classes)

    def to_dict(self) -> dict:
        def mat(a):
            return [[float(v) for v in row] for row in np.atleast_2d(a)]

        return {
            "snr_db": self.snr_db,
            "N": self.N,
            "sigma2": self.sigma2,
            "testpoints": self.testpoints.to_dict(),
            "priors": [float(p) for p in self.priors],
            "classes": [
                {"name": c.name, "mu": [float(v) for v in c.mu], "sigma": mat(c.sigma),
                 "W": mat(c.W), "w": [float(v) for v in c.w], "w0": float(c.w0)}
                for c in self.classes
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DiscriminantModel":
        tp = TestpointSet.from_dict(data["testpoints"])
        classes = [
            ClassDiscriminant(c["name"], np.asarray(c["mu"], float), np.asarray(c["sigma"], float),
                              np.asarray(c["W"], float), np.asarray(c["w"], float), float(c["w0"]))
            for c in data["classes"]
        ]
        return cls(classes, np.asarray(data["priors"], float), tp, int(data["N"]),
                   data.get("sigma2"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DiscriminantModel":
        return cls.from_dict(json.loads(text))

    def statistics(self) -> List[ClassStatistics]:
        return [ClassStatistics(c.mu, c.sigma, self.N, c.name, self.testpoints)
                for c in self.classes]

    def with_sample_count(self, N: int) -> "DiscriminantModel":
        """Same classes and testpoints, rebuilt for ``N`` feature samples."""
        if N == self.N:
            return self
        stats = [ClassStatistics(s.mu, s.sigma * (self.N / N), N, s.class_ref, s.testpoints)
                 for s in self.statistics()]
        return build_discriminant_model(stats, self.priors, sigma2=self.sigma2)


def build_discriminant_model(stats: Sequence[ClassStatistics], priors=None,
                             sigma2=None) -> DiscriminantModel:
    """Quadratic discriminant coefficients from per-class Gaussian statistics."""
    if len(stats) < 1:
        raise ValueError("need at least one class")
    L = len(stats[0])
    if any(len(s) != L for s in stats):
        raise ValueError("all classes must share the testpoint count")
    pri = normalize_priors(priors, len(stats))
    classes = []
    for s, prior in zip(stats, pri):
        cf = _cholesky(s.sigma, s.class_ref)
        inv = linalg.cho_solve(cf, np.eye(L))
        inv = 0.5 * (inv + inv.T)
        logdet = 2.0 * np.log(np.diag(cf[0])).sum()
        w = inv @ s.mu
        with np.errstate(divide="ignore"):
            w0 = -0.5 * s.mu @ w - 0.5 * logdet + np.log(prior)
        classes.append(ClassDiscriminant(s.class_ref, s.mu, s.sigma, -0.5 * inv, w, float(w0)))
    tp = stats[0].testpoints
    if tp is None:
        tp = TestpointSet(np.arange(L, dtype=float), float("nan"))
    return DiscriminantModel(classes, pri, tp, int(stats[0].N), sigma2)


def discriminant_scores(model: DiscriminantModel, X) -> np.ndarray:
    """Scores ``g_k`` for a (B, L) batch of ECDF vectors, shape (B, K)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    L = len(model.testpoints)
    if X.shape[1] != L:
        raise ValueError(f"feature has length {X.shape[1]}, model expects {L}")
    return np.stack([c.score(X) for c in model.classes], axis=1)


def discriminant_classify(model: DiscriminantModel, x):
    """Class with the largest quadratic discriminant; ties to the lowest index."""
    xv = x.x if isinstance(x, SampledEcdf) else np.asarray(x, dtype=float).ravel()
    g = discriminant_scores(model, xv[None, :])[0]
    return int(np.argmax(g)), g
