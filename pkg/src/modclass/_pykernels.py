"""NumPy reference versions of the compiled inner loops."""

import numpy as np
from scipy.special import erfc

_SQRT1_2 = np.sqrt(0.5)


def region_counts(z, t):
    """Per-row counts of samples in (t[l-1], t[l]], shape (B, L+1)."""
    z = np.asarray(z, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    B = z.shape[0]
    idx = np.searchsorted(t, z, side="left")
    offsets = (np.arange(B) * (t.size + 1))[:, None]
    flat = np.bincount((idx + offsets).ravel(), minlength=B * (t.size + 1))
    return flat.reshape(B, t.size + 1).astype(np.int64)


def kuiper_from_sorted_cdf(F):
    """Kuiper statistic per row, given the candidate CDF at sorted samples."""
    F = np.asarray(F, dtype=np.float64)
    N = F.shape[1]
    i = np.arange(1, N + 1)
    dplus = np.maximum((i / N - F).max(axis=1), 0.0)
    dminus = np.maximum((F - (i - 1) / N).max(axis=1), 0.0)
    return dplus + dminus


def mixture_cdf(z, means, weights, scale):
    """Equal-scale Gaussian mixture CDF at each entry of 1-D ``z``."""
    z = np.asarray(z, dtype=np.float64)
    u = (z[:, None] - np.asarray(means)[None, :]) * (_SQRT1_2 / scale)
    return np.minimum(0.5 * erfc(-u) @ np.asarray(weights), 1.0)
