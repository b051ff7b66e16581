"""Testpoint placement.

Two placements are supported: the pdf-crossings of a class pair (the extrema
of their CDF difference), and numerically optimized locations that maximize
the Bhattacharyya distance between the Gaussian laws of the sampled-ECDF
vector under each class.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.special import erfc

from .bayes import ClassStatistics, class_statistics
from .distributions import (
    EPS_P,
    TestpointGuardError,
    TestpointSet,
    TheoreticalCdf,
    cdf_at,
    pdf_at,
)

__all__ = [
    "PairContext",
    "pdf_crossings",
    "bhattacharyya",
    "bhattacharyya_at",
    "crossing_start",
    "greedy_start",
    "default_starts",
    "nested_starts",
    "optimize_testpoints",
    "multiclass_testpoints",
]

log = logging.getLogger(__name__)

GRID_POINTS = 2048
ROOT_XTOL = 1e-10
MAX_EVALS = 2000
F_TOL = 1e-9
X_TOL = 1e-8
#: Smallest expected sample count any class may have in a region during the
#: search. Below a handful of samples the Gaussian law of the counts fails and
#: the covariance term of D_B rewards piling testpoints into the tails.
MIN_REGION_COUNT = 5.0
#: Mixture quantile levels offered to the greedy start besides the crossings.
GREEDY_LEVELS = np.linspace(0.01, 0.99, 99)

_SQRT1_2 = np.sqrt(0.5)


@dataclass(frozen=True)
class PairContext:
    A: TheoreticalCdf
    B: TheoreticalCdf
    N: int
    L: int
    snr_db: float = float("nan")

    def __post_init__(self):
        if self.N < 1 or self.L < 1:
            raise ValueError("N and L must be >= 1")
        if _same_law(self.A, self.B):
            raise ValueError("class pair must hold two distinct distributions")


def _same_law(A: TheoreticalCdf, B: TheoreticalCdf) -> bool:
    return (A.sigma2 == B.sigma2 and A.means.shape == B.means.shape
            and np.allclose(A.means, B.means, rtol=0, atol=1e-14)
            and np.allclose(A.weights, B.weights, rtol=0, atol=1e-14))


def _window(cdfs: Sequence[TheoreticalCdf], width: float = 5.0) -> Tuple[float, float]:
    lo = min(F.support(width)[0] for F in cdfs)
    hi = max(F.support(width)[1] for F in cdfs)
    return lo, hi


def pdf_crossings(A: TheoreticalCdf, B: TheoreticalCdf) -> List[float]:
    """Points where the two densities cross, i.e. extrema of ``F_A - F_B``.

    Sign changes of ``pdf_A - pdf_B`` are bracketed on a uniform grid over
    both supports and refined by bisection. Identical laws give ``[]``.
    """
    if _same_law(A, B):
        return []
    lo, hi = _window([A, B])
    grid = np.linspace(lo, hi, GRID_POINTS)

    def diff(z):
        return pdf_at(A, z) - pdf_at(B, z)

    f = diff(grid)
    peak = np.abs(f).max()
    if peak == 0:
        return []
    s = np.sign(f)
    roots = []
    for i in range(GRID_POINTS - 1):
        if s[i] == 0:
            if 0 < i and s[i - 1] * s[i + 1] < 0:
                roots.append(float(grid[i]))
        elif s[i] * s[i + 1] < 0:
            roots.append(float(optimize.bisect(diff, grid[i], grid[i + 1], xtol=ROOT_XTOL)))
    return roots


def _db_moments(mu_a, s_a, mu_b, s_b) -> float:
    avg = 0.5 * (s_a + s_b)
    try:
        ca = np.linalg.cholesky(s_a)
        cb = np.linalg.cholesky(s_b)
        cm = np.linalg.cholesky(avg)
    except np.linalg.LinAlgError:
        raise ValueError("Bhattacharyya distance needs positive definite covariances") from None
    d = np.linalg.solve(cm, mu_a - mu_b)
    logdet_a = 2.0 * np.log(np.diag(ca)).sum()
    logdet_b = 2.0 * np.log(np.diag(cb)).sum()
    logdet_m = 2.0 * np.log(np.diag(cm)).sum()
    return float(0.125 * d @ d + 0.5 * (logdet_m - 0.5 * (logdet_a + logdet_b)))


def bhattacharyya(stats_a: ClassStatistics, stats_b: ClassStatistics) -> float:
    """Bhattacharyya distance between two Gaussian feature laws.

    The Mahalanobis term uses the average covariance.
    """
    if len(stats_a) != len(stats_b):
        raise ValueError("statistics have different dimensions")
    return _db_moments(stats_a.mu, stats_a.sigma, stats_b.mu, stats_b.sigma)


def _pairwise_db(cdfs, t, N) -> float:
    stats = [class_statistics(F, t, N) for F in cdfs]
    return sum(bhattacharyya(a, b) for a, b in itertools.combinations(stats, 2))


def bhattacharyya_at(cdfs: Sequence[TheoreticalCdf], t, N: int) -> float:
    """Sum of pairwise Bhattacharyya distances at testpoints ``t``."""
    return _pairwise_db(cdfs, t.t if isinstance(t, TestpointSet) else t, N)


class _Objective:
    """Negative pairwise D_B over the ordered reparameterization.

    All classes and pair averages are factorized in one stacked Cholesky call.
    """

    def __init__(self, cdfs, N, min_count=None):
        if min_count is None:
            min_count = MIN_REGION_COUNT
        self.N = N
        self.min_mass = max(EPS_P, min_count / N)
        self.pairs = np.array(list(itertools.combinations(range(len(cdfs)), 2)))
        self.means = np.concatenate([F.means for F in cdfs])
        self.inv_scale = np.concatenate([np.full(F.means.size, _SQRT1_2 / F.scale) for F in cdfs])
        owner = np.repeat(np.arange(len(cdfs)), [F.means.size for F in cdfs])
        self.weights = np.zeros((self.means.size, len(cdfs)))
        self.weights[np.arange(self.means.size), owner] = np.concatenate([F.weights for F in cdfs])
        self.evals = 0

    @staticmethod
    def to_t(u):
        return np.cumsum(np.concatenate([u[:1], np.exp(u[1:])]))

    @staticmethod
    def to_u(t):
        return np.concatenate([t[:1], np.log(np.diff(t))])

    def value_t(self, t) -> float:
        if not np.all(np.isfinite(t)):
            return -np.inf
        F = np.minimum(0.5 * erfc((self.means - t[:, None]) * self.inv_scale) @ self.weights, 1.0)
        mu = F.T  # (K, L)
        K, L = mu.shape
        if np.any(mu[:, 0] < self.min_mass) or np.any(1.0 - mu[:, -1] < self.min_mass):
            return -np.inf
        if L > 1 and np.any(mu[:, 1:] - mu[:, :-1] < self.min_mass):
            return -np.inf
        sig = (np.minimum(mu[:, :, None], mu[:, None, :])
               * (1.0 - np.maximum(mu[:, :, None], mu[:, None, :]))) / self.N
        i, j = self.pairs[:, 0], self.pairs[:, 1]
        stack = np.concatenate([sig, 0.5 * (sig[i] + sig[j])])
        try:
            chol = np.linalg.cholesky(stack)
        except np.linalg.LinAlgError:
            return -np.inf
        logdet = 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
        d = solve_triangular_batch(chol[K:], mu[i] - mu[j])
        maha = (d * d).sum(axis=1)
        val = 0.125 * maha + 0.5 * (logdet[K:] - 0.5 * (logdet[i] + logdet[j]))
        return float(val.sum())

    def __call__(self, u) -> float:
        self.evals += 1
        v = self.value_t(self.to_t(u))
        return -v if np.isfinite(v) else np.inf


def solve_triangular_batch(chol, b):
    """Solve ``chol[p] @ x[p] = b[p]`` for stacked lower-triangular factors."""
    return np.linalg.solve(chol, b[..., None])[..., 0]


def _mixture_quantiles(cdfs, levels) -> np.ndarray:
    lo, hi = _window(cdfs, 10.0)

    def mix(z):
        return np.mean([cdf_at(F, z) for F in cdfs])

    return np.array([optimize.brentq(lambda z: mix(z) - q, lo, hi, xtol=1e-12)
                     for q in levels])


def _resize(points, L, fill, score=None) -> np.ndarray:
    """Keep the ``L`` best-scoring points, or pad with far-away ``fill`` values."""
    pts = np.sort(np.asarray(points, dtype=float))
    if pts.size > L:
        keep = np.argsort(-np.asarray(score))[:L]
        return np.sort(pts[keep])
    pts = list(pts)
    cand = list(np.asarray(fill, dtype=float))
    while len(pts) < L and cand:
        if pts:
            gaps = [min(abs(c - p) for p in pts) for c in cand]
            c = cand.pop(int(np.argmax(gaps)))
        else:
            c = cand.pop(len(cand) // 2)
        pts.append(c)
    return np.sort(np.array(pts))


def crossing_start(cdfs: Sequence[TheoreticalCdf], L: int) -> Optional[np.ndarray]:
    """pdf-crossings of every class pair resized to ``L`` points."""
    cross = sorted({c for A, B in itertools.combinations(cdfs, 2) for c in pdf_crossings(A, B)})
    if not cross:
        return None
    gap = [sum(abs(cdf_at(A, c) - cdf_at(B, c)) for A, B in itertools.combinations(cdfs, 2))
           for c in cross]
    fill = _mixture_quantiles(cdfs, np.arange(1, L + 1) / (L + 1))
    return _resize(cross, L, fill, gap)


def _feasible_edges(cdfs, mass) -> List[float]:
    """Outermost points leaving at least ``mass`` below and above for every class."""
    lo, hi = _window(cdfs, 10.0)
    left = max(optimize.brentq(lambda z: cdf_at(F, z) - mass, lo, hi, xtol=1e-12)
               for F in cdfs)
    right = min(optimize.brentq(lambda z: cdf_at(F, z) - (1 - mass), lo, hi, xtol=1e-12)
                for F in cdfs)
    return [left, right] if left < right else []


def greedy_start(cdfs: Sequence[TheoreticalCdf], L: int, N: int) -> Optional[np.ndarray]:
    """Forward selection of ``L`` points from crossings and mixture quantiles.

    Each step adds the candidate giving the largest D_B together with the
    points already chosen. Catches optima that no crossing-based start sits
    near, at about one objective evaluation per candidate and step.
    """
    obj = _Objective(list(cdfs), N)
    cross = [c for A, B in itertools.combinations(cdfs, 2) for c in pdf_crossings(A, B)]
    # the guard often binds at the optimum, so its edges are candidates too
    edges = _feasible_edges(cdfs, obj.min_mass * (1 + 1e-9))
    cand = np.unique(np.round(np.concatenate(
        [cross, edges, _mixture_quantiles(cdfs, GREEDY_LEVELS)]), 12))
    chosen: List[float] = []
    for _ in range(L):
        free = [c for c in cand if c not in chosen]
        vals = [obj.value_t(np.sort(chosen + [c])) for c in free]
        if not free or not np.isfinite(np.max(vals)):
            return None
        chosen.append(free[int(np.argmax(vals))])
    return np.sort(np.array(chosen))


def default_starts(cdfs: Sequence[TheoreticalCdf], L: int,
                   N: Optional[int] = None) -> List[np.ndarray]:
    """Resized pdf-crossings plus equally spaced mixture quantiles.

    With ``N`` given, the greedy forward-selection start is added too.
    """
    starts = []
    cs = crossing_start(cdfs, L)
    if cs is not None:
        starts.append(cs)
    starts.append(_mixture_quantiles(cdfs, np.arange(1, L + 1) / (L + 1)))
    if L > 1:
        starts.append(_mixture_quantiles(cdfs, 0.02 + 0.96 * np.arange(L) / (L - 1)))
    if N is not None:
        gs = greedy_start(cdfs, L, N)
        if gs is not None:
            starts.append(gs)
    return starts


def nested_starts(prev, cdfs: Sequence[TheoreticalCdf], N: Optional[int] = None,
                  keep: Optional[int] = None) -> List[np.ndarray]:
    """Extend ``prev`` by one point, once per gap (outer gaps included).

    With ``N`` and ``keep`` given, only the ``keep`` extensions with the
    largest D_B are returned.
    """
    prev = np.sort(np.asarray(prev, dtype=float))
    lo, hi = _window(cdfs, 2.0)
    edges = np.concatenate([[min(lo, prev[0] - 1.0)], prev, [max(hi, prev[-1] + 1.0)]])
    out = [np.sort(np.append(prev, 0.5 * (a + b))) for a, b in zip(edges[:-1], edges[1:])]
    if keep is None or N is None:
        return out
    obj = _Objective(list(cdfs), N)
    vals = [obj.value_t(_separate(t, 1e-4 * max(F.scale for F in cdfs))) for t in out]
    order = np.argsort(vals, kind="stable")[::-1][:keep]
    return [out[i] for i in sorted(order)]


def _separate(t, min_gap) -> np.ndarray:
    t = np.sort(np.asarray(t, dtype=float))
    for i in range(1, t.size):
        if t[i] - t[i - 1] < min_gap:
            t[i] = t[i - 1] + min_gap
    return t


def _run(cdfs, N, L, starts, max_evals=MAX_EVALS) -> Tuple[np.ndarray, float]:
    obj = _Objective(cdfs, N)
    scale = max(F.scale for F in cdfs)
    best_t, best_v = None, -np.inf
    for start in starts:
        t0 = _separate(start, 1e-4 * scale)
        if t0.size != L:
            raise ValueError(f"start has {t0.size} points, expected {L}")
        v0 = obj.value_t(t0)
        if not np.isfinite(v0):
            log.debug("skipping infeasible start %s", t0)
            continue
        if v0 > best_v:
            best_t, best_v = t0, v0
        u0 = obj.to_u(t0)
        simplex = np.vstack([u0] + [u0 + np.eye(L)[i] * (0.1 * scale if i == 0 else 0.25)
                                    for i in range(L)])
        # exp() overflow on far simplex vertices evaluates as infeasible
        with np.errstate(over="ignore", invalid="ignore"):
            res = optimize.minimize(obj, u0, method="Nelder-Mead",
                                    options={"initial_simplex": simplex, "maxfev": max_evals,
                                             "fatol": F_TOL, "xatol": X_TOL})
        v = -res.fun
        if np.isfinite(v) and v > best_v:
            best_t, best_v = obj.to_t(res.x), v
    if best_t is None:
        raise TestpointGuardError(
            f"no feasible placement of {L} testpoints (every start violates the "
            f"{EPS_P:g} region-mass guard)")
    return best_t, best_v


def optimize_testpoints(ctx: PairContext, init: Optional[Sequence] = None):
    """Locally maximize the Bhattacharyya distance over ordered testpoints.

    Each start is refined by a Nelder-Mead search on ``(t_1, log gaps)`` so the
    ordering holds by construction; placements leaving a region with mass
    under ``EPS_P`` for either class are rejected. Returns the best
    ``(TestpointSet, D_B)`` over all starts (default: :func:`default_starts` with ``N``).
    """
    cdfs = [ctx.A, ctx.B]
    starts = default_starts(cdfs, ctx.L, ctx.N) if init is None else list(init)
    if not starts:
        raise ValueError("need at least one start")
    t, _ = _run(cdfs, ctx.N, ctx.L, starts)
    tp = TestpointSet(t, ctx.snr_db)
    return tp, bhattacharyya_at(cdfs, tp, ctx.N)


def multiclass_testpoints(classes: Sequence[TheoreticalCdf], N: int, L: int,
                          snr_db: float = float("nan"), init: Optional[Sequence] = None):
    """Testpoints maximizing the sum of pairwise Bhattacharyya distances.

    With two classes this is :func:`optimize_testpoints`. With more, the
    default starts also include each pair's own optimum.
    """
    classes = list(classes)
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    if len(classes) == 2:
        return optimize_testpoints(PairContext(classes[0], classes[1], N, L, snr_db), init)
    if init is None:
        starts = default_starts(classes, L, N)
        for A, B in itertools.combinations(classes, 2):
            pair_tp, _ = optimize_testpoints(PairContext(A, B, N, L, snr_db))
            starts.append(pair_tp.t)
    else:
        starts = list(init)
    t, _ = _run(classes, N, L, starts)
    tp = TestpointSet(t, snr_db)
    return tp, bhattacharyya_at(classes, tp, N)
