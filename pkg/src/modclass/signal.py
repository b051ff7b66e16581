"""Constellations, AWGN transmission and the quadrature feature map."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

__all__ = [
    "Constellation",
    "ChannelConfig",
    "SymbolBlock",
    "register_constellation",
    "available_constellations",
    "standard_constellation",
    "square_qam",
    "transmit",
    "transmit_batch",
    "quadrature_feature",
]

_POWER_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Constellation:
    """Named unit-power complex symbol set."""

    name: str
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128).ravel()
        if pts.size < 2:
            raise ValueError(f"constellation {self.name!r} needs at least 2 points")
        if np.unique(pts).size != pts.size:
            raise ValueError(f"constellation {self.name!r} has repeated points")
        power = float(np.mean(np.abs(pts) ** 2))
        if abs(power - 1.0) > _POWER_TOL:
            raise ValueError(
                f"constellation {self.name!r} has average power {power!r}, expected 1"
            )
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size

    def __eq__(self, other):
        if not isinstance(other, Constellation):
            return NotImplemented
        return self.name == other.name and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.name, self.points.tobytes()))

    @classmethod
    def normalized(cls, name: str, points) -> "Constellation":
        """Build a constellation, scaling ``points`` to unit average power."""
        pts = np.asarray(points, dtype=np.complex128).ravel()
        return cls(name, pts / np.sqrt(np.mean(np.abs(pts) ** 2)))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "points": [[float(p.real), float(p.imag)] for p in self.points],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Constellation":
        pts = np.array([complex(re, im) for re, im in data["points"]])
        return cls(data["name"], pts)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Constellation":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ChannelConfig:
    """AWGN channel at a per-symbol SNR (unit-power constellations)."""

    snr_db: float

    @property
    def noise_variance(self) -> float:
        return float(10.0 ** (-self.snr_db / 10.0))

    def __post_init__(self):
        if not np.isfinite(self.snr_db):
            raise ValueError(f"snr_db must be finite, got {self.snr_db!r}")


@dataclass(frozen=True, eq=False)
class SymbolBlock:
    received: np.ndarray
    true_class: Optional[int] = None

    def __post_init__(self):
        r = np.asarray(self.received, dtype=np.complex128).ravel()
        if r.size < 1:
            raise ValueError("symbol block must hold at least one sample")
        r.setflags(write=False)
        object.__setattr__(self, "received", r)

    def __len__(self):
        return self.received.size


def square_qam(order: int) -> Constellation:
    """Square M-QAM grid on odd integers, scaled to unit power."""
    side = int(round(np.sqrt(order)))
    if side * side != order or side < 2:
        raise ValueError(f"{order} is not a square QAM order")
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    grid = (levels[:, None] + 1j * levels[None, :]).ravel()
    return Constellation.normalized(f"{order}QAM", grid)


_REGISTRY: Dict[str, Callable[[], Constellation]] = {
    "4QAM": lambda: square_qam(4),
    "16QAM": lambda: square_qam(16),
    "64QAM": lambda: square_qam(64),
}


def register_constellation(name: str, factory) -> None:
    """Add a constellation to the registry.

    ``factory`` is either a :class:`Constellation` or a zero-argument callable
    returning one.
    """
    if isinstance(factory, Constellation):
        const = factory
        factory = lambda: const  # noqa: E731
    _REGISTRY[name] = factory


def available_constellations():
    return sorted(_REGISTRY, key=lambda n: (len(n), n))


def standard_constellation(name: str) -> Constellation:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown constellation {name!r}; available: "
            + ", ".join(available_constellations())
        ) from None
    return factory()


def _check_rng(rng) -> np.random.Generator:
    if not isinstance(rng, np.random.Generator):
        raise TypeError("rng must be a numpy.random.Generator")
    return rng


def transmit_batch(c: Constellation, ch: ChannelConfig, M: int, trials: int, rng) -> np.ndarray:
    """Draw ``trials`` independent received blocks as a (trials, M) array."""
    if M < 1 or trials < 1:
        raise ValueError("M and trials must be >= 1")
    rng = _check_rng(rng)
    idx = rng.integers(0, len(c), size=(trials, M))
    s = c.points[idx]
    scale = np.sqrt(ch.noise_variance / 2.0)
    g = rng.standard_normal((trials, M, 2)) * scale
    return s + (g[..., 0] + 1j * g[..., 1])


def transmit(c: Constellation, ch: ChannelConfig, M: int, rng, true_class=None) -> SymbolBlock:
    """Send ``M`` uniformly drawn symbols of ``c`` through the AWGN channel."""
    return SymbolBlock(transmit_batch(c, ch, M, 1, rng)[0], true_class)


def quadrature_feature(block) -> np.ndarray:
    """Concatenate real parts then imaginary parts (N = 2M).

    Accepts a :class:`SymbolBlock`, a 1-D complex array or a (B, M) batch.
    """
    r = block.received if isinstance(block, SymbolBlock) else np.asarray(block)
    if r.size == 0:
        raise ValueError("empty block")
    return np.concatenate([r.real, r.imag], axis=-1).astype(np.float64)
