"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise (or when
``MODCLASS_PURE_PYTHON`` is set to a non-empty value other than ``0``) the
NumPy versions are used. ``BACKEND`` names the active one.
"""

import os

from . import _pykernels

_force_py = os.environ.get("MODCLASS_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_py:
        raise ImportError("pure-Python backend requested")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

region_counts = _impl.region_counts
kuiper_from_sorted_cdf = _impl.kuiper_from_sorted_cdf
mixture_cdf = _impl.mixture_cdf

__all__ = ["BACKEND", "region_counts", "kuiper_from_sorted_cdf", "mixture_cdf"]
