"""Reference classifiers: exact ML, full-ECDF Kuiper, rcK and VD."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .bayes import normalize_priors
from .distributions import SampledEcdf, TestpointSet, TheoreticalCdf, cdf_at
from .signal import Constellation, SymbolBlock
from .testpoints import pdf_crossings

__all__ = [
    "VdModel",
    "build_vd_model",
    "ml_log_likelihoods",
    "ml_classify",
    "kuiper_distances",
    "kuiper_statistic",
    "kuiper_classify",
    "rck_distances",
    "rck_classify",
    "vd_distances",
    "vd_classify",
]

_ML_CHUNK = 1 << 21


def ml_log_likelihoods(R, classes: Sequence[Tuple[Constellation, float]], priors=None) -> np.ndarray:
    """Log likelihood plus log prior of each block row of ``R`` under each class.

    ``R`` is a (B, M) complex array (or one block). Shape of the result is (B, K).
    """
    R = np.atleast_2d(R.received if isinstance(R, SymbolBlock) else np.asarray(R))
    B, M = R.shape
    log_prior = np.log(normalize_priors(priors, len(classes)))
    out = np.empty((B, len(classes)))
    for k, (c, sigma2) in enumerate(classes):
        pts = c.points
        rows = max(1, _ML_CHUNK // (M * pts.size))
        const = -np.log(pts.size) - np.log(np.pi * sigma2)
        for s in range(0, B, rows):
            r = R[s:s + rows, :, None]
            d2 = (r.real - pts.real) ** 2 + (r.imag - pts.imag) ** 2
            ll = logsumexp(-d2 / sigma2, axis=2) + const
            out[s:s + rows, k] = ll.sum(axis=1)
        out[:, k] += log_prior[k]
    return out


def ml_classify(block, classes: Sequence[Tuple[Constellation, float]], priors=None) -> int:
    """Maximum-likelihood (MAP with ``priors``) constellation for one block."""
    return int(np.argmax(ml_log_likelihoods(block, classes, priors)[0]))


def kuiper_distances(Z, classes: Sequence[TheoreticalCdf]) -> np.ndarray:
    """Kuiper distance between each row's full ECDF and each candidate CDF.

    Suprema are taken at the order statistics on both sides of each jump,
    which is exact for a step function against a continuous CDF.
    """
    Z = np.sort(np.atleast_2d(np.asarray(Z, dtype=np.float64)), axis=1)
    flat = np.ascontiguousarray(Z.ravel())
    out = np.empty((Z.shape[0], len(classes)))
    for k, F in enumerate(classes):
        Fz = np.ascontiguousarray(cdf_at(F, flat).reshape(Z.shape))
        out[:, k] = kernels.kuiper_from_sorted_cdf(Fz)
    return out


def kuiper_statistic(z, cdf) -> float:
    """Kuiper distance between the ECDF of ``z`` and any vectorized ``cdf``."""
    zs = np.sort(np.asarray(z, dtype=np.float64).ravel())
    Fz = np.ascontiguousarray(np.asarray(cdf(zs), dtype=np.float64)[None, :])
    return float(kernels.kuiper_from_sorted_cdf(Fz)[0])


def kuiper_classify(z, classes: Sequence[TheoreticalCdf]) -> int:
    return int(np.argmin(kuiper_distances(np.asarray(z)[None, :], classes)[0]))


def _means(classes) -> np.ndarray:
    return np.vstack([getattr(c, "mu", c) for c in classes])


def rck_distances(X, classes) -> np.ndarray:
    """Kuiper distance restricted to the testpoints, shape (B, K).

    ``classes`` holds either :class:`ClassStatistics` or plain mean vectors.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    D = X[:, None, :] - _means(classes)[None, :, :]
    return np.maximum(D.max(axis=2), 0.0) + np.maximum((-D).max(axis=2), 0.0)


def rck_classify(x, classes) -> int:
    """Reduced-complexity Kuiper decision on a sampled ECDF.

    This reading of rcK sums the largest positive and largest negative
    deviation of ``x`` from each class's CDF values at the testpoints.
    """
    xv = x.x if isinstance(x, SampledEcdf) else np.asarray(x, dtype=float)
    return int(np.argmin(rck_distances(xv[None, :], classes)[0]))


@dataclass(frozen=True, eq=False)
class VdModel:
    """pdf-crossing testpoints with each class's expected region masses."""

    testpoints: TestpointSet
    p: np.ndarray
    names: List[str]

    def to_dict(self) -> dict:
        return {"testpoints": self.testpoints.to_dict(), "names": list(self.names),
                "p": [[float(v) for v in row] for row in self.p]}

    @classmethod
    def from_dict(cls, data: dict) -> "VdModel":
        return cls(TestpointSet.from_dict(data["testpoints"]),
                   np.asarray(data["p"], dtype=float), list(data["names"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "VdModel":
        return cls.from_dict(json.loads(text))


def build_vd_model(classes: Sequence[TheoreticalCdf], snr_db: float = float("nan")) -> VdModel:
    """Testpoints at the pdf-crossings of every class pair (merged, sorted)."""
    cross = sorted({round(c, 12) for A, B in itertools.combinations(classes, 2)
                    for c in pdf_crossings(A, B)})
    if not cross:
        raise ValueError("classes have no pdf-crossings; VD needs at least one")
    tp = TestpointSet(np.array(cross), snr_db)
    p = []
    for F in classes:
        cdf = np.concatenate([[0.0], np.atleast_1d(cdf_at(F, tp.t)), [1.0]])
        p.append(np.diff(cdf))
    return VdModel(tp, np.vstack(p), [F.class_ref for F in classes])


def vd_distances(X, model: VdModel) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    B = X.shape[0]
    d = np.diff(np.hstack([np.zeros((B, 1)), X, np.ones((B, 1))]), axis=1)
    return np.abs(d[:, None, :] - model.p[None, :, :]).sum(axis=2)


def vd_classify(x, model: VdModel) -> int:
    """Class whose expected region masses are closest in L1 to the observed ones."""
    xv = x.x if isinstance(x, SampledEcdf) else np.asarray(x, dtype=float)
    return int(np.argmin(vd_distances(xv[None, :], model)[0]))
