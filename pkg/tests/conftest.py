import numpy as np
import pytest

from modclass import _pykernels, kernels
from modclass import signal as _signal
from modclass.distributions import theoretical_cdf
from modclass.signal import ChannelConfig, standard_constellation

try:
    from modclass import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = ["python", "cython"]


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test once per kernel implementation."""
    impl = _pykernels if request.param == "python" else _ckernels
    if impl is None:
        pytest.skip("compiled kernels not built")
    for name in ("region_counts", "kuiper_from_sorted_cdf", "mixture_cdf"):
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return request.param


@pytest.fixture(autouse=True)
def _isolated_registry(monkeypatch):
    # registering a constellation in one test must not leak into the next
    monkeypatch.setattr(_signal, "_REGISTRY", dict(_signal._REGISTRY))


@pytest.fixture
def rng():
    return np.random.default_rng(20121)


def cdfs_at(snr_db, *names):
    s2 = ChannelConfig(snr_db).noise_variance
    return [theoretical_cdf(standard_constellation(n), s2) for n in names]


@pytest.fixture
def qam_pair_0db():
    return cdfs_at(0.0, "4QAM", "16QAM")


# acceptance results, printed one line per criterion at the end of the run
ACCEPTANCE = []


def record(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
