"""Configuration-space vectors, the PES interface and force bookkeeping.

State vectors are plain float64 numpy arrays. Anything that exposes
``dimension``, ``energy(x)`` and ``gradient(x)`` is a potential surface.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

UNIT_TOL = 1e-8
FD_GRAD_STEP = 1e-6
FD_CURV_STEP = 1e-4
COLLAPSE_TOL = 1e-10


class SpringPairError(Exception):
    """Base class for errors raised by the toolkit."""


class DegenerateSpring(SpringPairError):
    """Both particles of a spring pair sit on the same point."""


class NonUnitDirection(SpringPairError):
    pass


class NonFiniteState(SpringPairError):
    """A state vector picked up NaN or Inf, usually from a too-large step."""


def as_state(x, dimension: int | None = None) -> np.ndarray:
    """Return ``x`` as a finite 1-D float64 array (copied)."""
    arr = np.array(x, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("state vector must have dimension >= 1")
    if dimension is not None and arr.size != dimension:
        raise ValueError(f"expected dimension {dimension}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteState("state vector has non-finite components")
    return arr


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalise a zero vector")
    return v / n


@runtime_checkable
class PotentialSurface(Protocol):
    dimension: int

    def energy(self, x: np.ndarray) -> float: ...

    def gradient(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class SpringPair:
    r1: np.ndarray
    r2: np.ndarray
    natural_length: float

    def __post_init__(self):
        if self.r1.shape != self.r2.shape:
            raise ValueError("spring pair particles must share a dimension")
        if not self.natural_length > 0:
            raise ValueError("natural_length must be positive")

    @classmethod
    def from_points(cls, r1, r2, natural_length: float) -> "SpringPair":
        return cls(as_state(r1), as_state(r2), float(natural_length))

    @classmethod
    def from_perturbation(cls, r1, direction, size: float, natural_length: float) -> "SpringPair":
        """Place ``r2`` a distance ``size`` from ``r1`` along ``direction``."""
        r1 = as_state(r1)
        r2 = r1 + size * unit(as_state(direction, r1.size))
        return cls(r1, r2, float(natural_length))

    @property
    def dimension(self) -> int:
        return self.r1.size

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.r2 - self.r1))

    def swapped(self) -> "SpringPair":
        return SpringPair(self.r2, self.r1, self.natural_length)


@dataclass(frozen=True)
class ForceSplit:
    parallel: np.ndarray
    perpendicular: np.ndarray


def spring_direction(pair: SpringPair) -> np.ndarray:
    diff = pair.r2 - pair.r1
    d = np.linalg.norm(diff)
    # below this the difference is dominated by rounding in r1 and r2
    if d <= COLLAPSE_TOL * max(1.0, np.linalg.norm(pair.r1)):
        raise DegenerateSpring("spring pair collapsed to a single point")
    return diff / d


def spring_force(pair: SpringPair) -> tuple[np.ndarray, np.ndarray]:
    """Spring forces on (r1, r2).

    The stretch ``d_s - l_s`` multiplies the raw difference vector, not the
    unit direction, so the magnitude is ``(d_s - l_s) * d_s``.
    """
    diff = pair.r2 - pair.r1
    stretch = np.linalg.norm(diff) - pair.natural_length
    f1 = stretch * diff
    return f1, -f1


def decompose_force(force, v) -> ForceSplit:
    """Split ``force`` into components parallel and perpendicular to unit ``v``."""
    force = np.asarray(force, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise NonUnitDirection(f"|v| = {np.linalg.norm(v)!r} is not 1")
    parallel = np.dot(force, v) * v
    return ForceSplit(parallel, force - parallel)


def fd_gradient(pes: PotentialSurface, x, h: float = FD_GRAD_STEP) -> np.ndarray:
    """Central-difference gradient of ``pes.energy`` at ``x``."""
    if not h > 0:
        raise ValueError("h must be positive")
    x = as_state(x)
    g = np.empty_like(x)
    xp = x.copy()
    for i in range(x.size):
        xi = x[i]
        xp[i] = xi + h
        ep = pes.energy(xp)
        xp[i] = xi - h
        em = pes.energy(xp)
        xp[i] = xi
        g[i] = (ep - em) / (2.0 * h)
    return g


def directional_curvature(pes: PotentialSurface, x, v, h: float = FD_CURV_STEP) -> float:
    """Second directional derivative of the energy along unit ``v``."""
    if not h > 0:
        raise ValueError("h must be positive")
    x = as_state(x)
    v = np.asarray(v, dtype=np.float64)
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise NonUnitDirection(f"|v| = {np.linalg.norm(v)!r} is not 1")
    return (pes.energy(x + h * v) - 2.0 * pes.energy(x) + pes.energy(x - h * v)) / h**2


def force(pes: PotentialSurface, x) -> np.ndarray:
    return -pes.gradient(x)
