"""Spring pair walker: drifting, climbing and the drift-climb cycle driver."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .core import (
    FD_CURV_STEP,
    DegenerateSpring,
    NonFiniteState,
    PotentialSurface,
    SpringPair,
    SpringPairError,
    as_state,
    decompose_force,
    directional_curvature,
    spring_direction,
    spring_force,
)

logger = logging.getLogger(__name__)

MAX_REPERTURBATIONS = 10
PROGRESS_EVERY = 500
TRACE_HEADER = ["cycle", "drift_steps", "e1", "e2", "energy_r1", "energy_r2"]


class Status(str, Enum):
    CONVERGED = "Converged"
    MAX_CYCLES = "MaxCyclesExceeded"
    TRAPPED = "TrappedNonSaddle"


class MaxCyclesExceeded(SpringPairError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class SpmConfig:
    """Walker parameters. Relaxation constants already include the time step."""

    alpha1: float = 5e-2
    alpha2: float = 2.5e-1
    alpha3: float = 5e-2
    eps1: float = 1e-2
    eps2: float = 1e-7
    max_drift_steps: int = 200
    max_cycles: int = 100_000
    natural_length: float = 1e-2
    climb_steps: int = 1
    # drift steps taken every cycle before the eps1 test applies
    min_drift_steps: int = 1
    seed: int = 0
    # use pes.precondition(force) as the step direction when the surface has one
    precondition: bool = False
    # rigidly align r2 onto r1 after every update when the surface offers pes.align
    align_pair: bool = True
    curvature_step: float | None = None
    # keep r1, r2 in every CycleRecord; switch off for large fields to bound memory
    trace_positions: bool = True

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "alpha3", "eps1", "eps2", "natural_length"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("max_drift_steps", "max_cycles", "climb_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 <= self.min_drift_steps <= self.max_drift_steps:
            raise ValueError("min_drift_steps must lie in [0, max_drift_steps]")

    def replace(self, **changes) -> "SpmConfig":
        return replace(self, **changes)


@dataclass
class CycleRecord:
    cycle_index: int
    drift_steps_taken: int
    r1: np.ndarray | None
    r2: np.ndarray | None
    energy_r1: float
    energy_r2: float
    e1: float
    e2: float | None = None


@dataclass
class SaddleResult:
    position: np.ndarray
    energy: float
    unstable_mode: np.ndarray
    residual_e1: float
    cycles_used: int
    verified_index1: bool
    status: Status = Status.CONVERGED
    curvature: float | None = None
    trace: list[CycleRecord] = field(default_factory=list, repr=False)
    path: list[np.ndarray] = field(default_factory=list, repr=False)
    reperturbations: int = 0

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


class _Memo:
    """Remembers the last few energies and gradients of a surface.

    A cycle evaluates the same two points in the drift test, the climb and
    the e1 check; for large fields that repetition dominates the cost.
    Lookups compare arrays exactly, so results are unchanged.
    """

    def __init__(self, pes, size: int = 4):
        self._pes = pes
        self._size = size
        self._grad: list[tuple[np.ndarray, np.ndarray]] = []
        self._energy: list[tuple[np.ndarray, float]] = []

    def __getattr__(self, name):
        return getattr(self._pes, name)

    @staticmethod
    def _find(store, x):
        for key, value in store:
            if key is x or np.array_equal(key, x):
                return value
        return None

    def _remember(self, store, x, value):
        store.insert(0, (x.copy(), value))
        del store[self._size:]

    def gradient(self, x):
        g = self._find(self._grad, x)
        if g is None:
            g = self._pes.gradient(x)
            self._remember(self._grad, x, g)
        return g.copy()

    def energy(self, x):
        e = self._find(self._energy, x)
        if e is None:
            e = self._pes.energy(x)
            self._remember(self._energy, x, e)
        return e


def _forces(pes, pair: SpringPair, cfg: SpmConfig):
    f1 = -pes.gradient(pair.r1)
    f2 = -pes.gradient(pair.r2)
    if cfg.precondition and hasattr(pes, "precondition"):
        f1 = pes.precondition(f1)
        f2 = pes.precondition(f2)
    return f1, f2


def _settle(pes, r1, r2, pair, cfg):
    _check_finite(r1, r2)
    if hasattr(pes, "project_state"):
        r1, r2 = pes.project_state(r1), pes.project_state(r2)
    if cfg.align_pair and hasattr(pes, "align"):
        r2 = pes.align(r1, r2)
    return SpringPair(r1, r2, pair.natural_length)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteState("walker left the finite range; relaxation constants too large?")


def _drift_update(pes, pair, cfg):
    """One drift update plus the perpendicular force norms at the input pair."""
    v = spring_direction(pair)
    f1, f2 = _forces(pes, pair, cfg)
    p1 = decompose_force(f1, v).perpendicular
    p2 = decompose_force(f2, v).perpendicular
    s1, s2 = spring_force(pair)
    r1 = pair.r1 + cfg.alpha1 * p1 + cfg.alpha2 * s1
    r2 = pair.r2 + cfg.alpha1 * p2 + cfg.alpha2 * s2
    perp = max(np.linalg.norm(p1), np.linalg.norm(p2))
    return _settle(pes, r1, r2, pair, cfg), perp


def drift_step(pes: PotentialSurface, pair: SpringPair, cfg: SpmConfig) -> SpringPair:
    """Move both particles by alpha1 * F_perp + alpha2 * F_spring.

    The spring direction is computed once from the input pair and shared by
    both particles.
    """
    return _drift_update(pes, pair, cfg)[0]


def max_perpendicular_force(pes, pair: SpringPair, cfg: SpmConfig) -> float:
    v = spring_direction(pair)
    f1, f2 = _forces(pes, pair, cfg)
    return max(
        np.linalg.norm(decompose_force(f1, v).perpendicular),
        np.linalg.norm(decompose_force(f2, v).perpendicular),
    )


def drift_until(pes: PotentialSurface, pair: SpringPair, cfg: SpmConfig) -> tuple[SpringPair, int]:
    """Drift until both perpendicular forces drop below eps1 or the step cap is hit.

    The first ``cfg.min_drift_steps`` steps are always taken. Without them a
    pair whose perpendicular force sits just under eps1 is never corrected
    again and the climb stalls off the path.
    """
    steps = 0
    while steps < cfg.max_drift_steps:
        new_pair, perp = _drift_update(pes, pair, cfg)
        if perp < cfg.eps1 and steps >= cfg.min_drift_steps:
            break
        pair = new_pair
        steps += 1
    return pair, steps


def climb_step(pes: PotentialSurface, pair: SpringPair, cfg: SpmConfig) -> SpringPair:
    """Single climbing update r_i <- r_i - alpha3 * F_par(r_i)."""
    v = spring_direction(pair)
    f1, f2 = _forces(pes, pair, cfg)
    r1 = pair.r1 - cfg.alpha3 * decompose_force(f1, v).parallel
    r2 = pair.r2 - cfg.alpha3 * decompose_force(f2, v).parallel
    return _settle(pes, r1, r2, pair, cfg)


def error_e1(pes: PotentialSurface, pair: SpringPair) -> float:
    """Smaller of the two force norms."""
    return min(np.linalg.norm(pes.gradient(pair.r1)), np.linalg.norm(pes.gradient(pair.r2)))


def _distance(x, target) -> float:
    return float(np.linalg.norm(x - target))


def _reperturb(pes, pair: SpringPair, rng: np.random.Generator) -> SpringPair:
    u = rng.standard_normal(pair.dimension)
    if hasattr(pes, "tangent"):
        u = pes.tangent(pair.r1, u)
    elif hasattr(pes, "project_out_rigid"):
        u = pes.project_out_rigid(pair.r1, u)
    u /= np.linalg.norm(u)
    return SpringPair(pair.r1, pair.r1 + pair.natural_length * u, pair.natural_length)


def curvature_step(cfg: SpmConfig, dimension: int) -> float:
    if cfg.curvature_step is not None:
        return cfg.curvature_step
    return FD_CURV_STEP * np.sqrt(dimension)


def run(
    pes: PotentialSurface,
    initial: SpringPair,
    cfg: SpmConfig | None = None,
    known_saddle=None,
    raise_on_failure: bool = False,
    record_path: bool = False,
) -> SaddleResult:
    """Alternate drifting and climbing until one particle reaches a stationary point.

    Returns a SaddleResult whose status is Converged or MaxCyclesExceeded; with
    ``raise_on_failure`` the latter is raised instead, carrying the result.
    """
    cfg = cfg or SpmConfig()
    if initial.dimension != pes.dimension:
        raise ValueError(f"pair dimension {initial.dimension} != surface dimension {pes.dimension}")
    spring_direction(initial)
    pes = _Memo(pes)
    known = None if known_saddle is None else as_state(known_saddle, pes.dimension)
    rng = np.random.default_rng(cfg.seed)
    pair = initial
    trace: list[CycleRecord] = []
    path = [initial.r1.copy()] if record_path else []
    reperturbations = 0
    e1 = np.inf
    status = Status.MAX_CYCLES

    for cycle in range(cfg.max_cycles):
        try:
            pair, steps = drift_until(pes, pair, cfg)
            for _ in range(cfg.climb_steps):
                pair = climb_step(pes, pair, cfg)
        except DegenerateSpring:
            reperturbations += 1
            if reperturbations > MAX_REPERTURBATIONS:
                raise
            logger.warning("spring collapsed in cycle %d, re-perturbing", cycle)
            pair = _reperturb(pes, pair, rng)
            continue
        g1 = pes.gradient(pair.r1)
        g2 = pes.gradient(pair.r2)
        n1, n2 = np.linalg.norm(g1), np.linalg.norm(g2)
        e1 = min(n1, n2)
        e2 = None
        if known is not None:
            e2 = min(_distance(pair.r1, known), _distance(pair.r2, known))
        trace.append(
            CycleRecord(cycle, steps,
                        pair.r1.copy() if cfg.trace_positions else None,
                        pair.r2.copy() if cfg.trace_positions else None,
                        pes.energy(pair.r1), pes.energy(pair.r2), float(e1), e2)
        )
        if record_path:
            path.append(pair.r1.copy() if n1 <= n2 else pair.r2.copy())
        if cycle % PROGRESS_EVERY == 0:
            logger.info("cycle %d: e1 %.3e, energies %.6g %.6g, %d drift steps", cycle, e1,
                        trace[-1].energy_r1, trace[-1].energy_r2, steps)
        if e1 < cfg.eps2:
            status = Status.CONVERGED
            break

    best = pair.r1 if n1 <= n2 else pair.r2
    try:
        mode = spring_direction(pair)
    except DegenerateSpring:
        mode = np.zeros(pair.dimension)
    curv = None
    verified = False
    if status is Status.CONVERGED and np.any(mode):
        curv = directional_curvature(pes, best, mode, curvature_step(cfg, pes.dimension))
        verified = bool(curv < 0)
    result = SaddleResult(
        position=best.copy(),
        energy=pes.energy(best),
        unstable_mode=mode,
        residual_e1=float(e1),
        cycles_used=len(trace),
        verified_index1=verified,
        status=status,
        curvature=curv,
        trace=trace,
        path=path,
        reperturbations=reperturbations,
    )
    if status is not Status.CONVERGED and raise_on_failure:
        raise MaxCyclesExceeded(f"no convergence after {cfg.max_cycles} cycles (e1 = {e1:.3e})", result)
    return result


def write_trace_csv(path, trace: list[CycleRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for rec in trace:
            w.writerow([
                rec.cycle_index,
                rec.drift_steps_taken,
                repr(rec.e1),
                "" if rec.e2 is None else repr(rec.e2),
                repr(rec.energy_r1),
                repr(rec.energy_r2),
            ])


def read_trace_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        out.append({
            "cycle": int(row["cycle"]),
            "drift_steps": int(row["drift_steps"]),
            "e1": float(row["e1"]),
            "e2": float(row["e2"]) if row["e2"] else None,
            "energy_r1": float(row["energy_r1"]),
            "energy_r2": float(row["energy_r2"]),
        })
    return out
