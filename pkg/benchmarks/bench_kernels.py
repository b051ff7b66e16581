"""Time the compiled kernels against the NumPy fallbacks.

    python benchmarks/bench_kernels.py [--trials 10000] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from modclass import _pykernels
from modclass.distributions import theoretical_cdf
from modclass.signal import ChannelConfig, quadrature_feature, standard_constellation, transmit_batch

try:
    from modclass import _ckernels
except ImportError:
    _ckernels = None


def cases(trials):
    rng = np.random.default_rng(0)
    ch = ChannelConfig(0.0)
    c = standard_constellation("16QAM")
    Z = np.ascontiguousarray(quadrature_feature(transmit_batch(c, ch, 200, trials, rng)))
    t = np.linspace(-2.0, 2.0, 8)
    F = theoretical_cdf(standard_constellation("64QAM"), ch.noise_variance)
    flat = np.ascontiguousarray(np.sort(Z, axis=1).ravel())
    Fz = np.ascontiguousarray(_pykernels.mixture_cdf(flat, F.means, F.weights, F.scale)
                              .reshape(Z.shape))
    return {
        "region_counts (L=8)": lambda k: k.region_counts(Z, t),
        "mixture_cdf (64QAM)": lambda k: k.mixture_cdf(flat, F.means, F.weights, F.scale),
        "kuiper_from_sorted_cdf": lambda k: k.kuiper_from_sorted_cdf(Fz),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{args.trials} blocks x 400 samples")
    print(f"{'kernel':<26}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in cases(args.trials).items():
        py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:<26}{py:>12.1f}{'n/a':>12}{'':>10}")
            continue
        cy = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<26}{py:>12.1f}{cy:>12.1f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
