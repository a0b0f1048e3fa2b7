"""Minima, saddles and the barrier graph between them.

Saddles are found by launching spring pair runs from a known minimum; each
saddle is followed downhill along both signs of its unstable mode to the two
minima it connects. Repeating from every newly found minimum gives the
graph.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import SpringPair, SpringPairError, as_state, unit
from .spm import SaddleResult, SpmConfig, run

logger = logging.getLogger(__name__)

ENERGY_TOL = 1e-6
POSITION_TOL = 1e-4


class MaxItersExceeded(SpringPairError):
    def __init__(self, message, position=None, path=None):
        super().__init__(message)
        self.position = position
        self.path = path


class FrontierBudgetExceeded(SpringPairError):
    def __init__(self, message, graph=None):
        super().__init__(message)
        self.graph = graph


@dataclass
class Minimum:
    position: np.ndarray
    energy: float
    label: str = ""
    gradient_norm: float = 0.0


@dataclass
class SaddleEdge:
    saddle: SaddleResult
    minimum_a: str
    minimum_b: str
    barrier_from_a: float
    barrier_from_b: float
    path: list = field(default_factory=list, repr=False)

    @property
    def connects_distinct(self) -> bool:
        return self.minimum_a != self.minimum_b


@dataclass
class LandscapeGraph:
    minima: list[Minimum] = field(default_factory=list)
    edges: list[SaddleEdge] = field(default_factory=list)

    def minimum(self, label: str) -> Minimum:
        for m in self.minima:
            if m.label == label:
                return m
        raise KeyError(label)

    def distinct_edges(self) -> list[SaddleEdge]:
        """Edges between different minima, lowest saddle first."""
        return sorted((e for e in self.edges if e.connects_distinct), key=lambda e: e.saddle.energy)


@dataclass(frozen=True)
class DescentParams:
    step: float = 1e-2
    tol: float = 1e-8
    max_iters: int = 200_000
    record_every: int = 1
    # step along pes.precondition(-g) instead of -g when the surface offers it
    precondition: bool = False


@dataclass(frozen=True)
class EnumerationParams:
    n_trials: int = 200
    perturbation: float = 0.1
    seed: int = 0
    max_minima: int = 50
    descent: DescentParams = DescentParams()
    # descent starts saddle +- delta * mode; None means 10 * natural_length
    delta: float | None = None


def gradient_descent(pes, x0, step: float = 1e-2, tol: float = 1e-8, max_iters: int = 200_000,
                     path: list | None = None, record_every: int = 1, precondition: bool = False) -> Minimum:
    """Forward-Euler steepest descent until the gradient norm drops below ``tol``.

    Visited points are appended to ``path`` (every ``record_every`` steps plus
    the final point) when a list is given.
    """
    smooth = getattr(pes, "precondition", None) if precondition else None
    if not step > 0:
        raise ValueError("step must be positive")
    x = as_state(x0, pes.dimension)
    if path is not None:
        path.append(x.copy())
    for it in range(max_iters + 1):
        g = pes.gradient(x)
        gnorm = float(np.linalg.norm(g))
        if gnorm < tol:
            if path is not None and it % record_every:
                path.append(x.copy())
            return Minimum(x, pes.energy(x), gradient_norm=gnorm)
        x = x - step * g if smooth is None else x + step * smooth(-g)
        if not np.all(np.isfinite(x)):
            raise MaxItersExceeded("descent diverged; reduce the step", x, path)
        if path is not None and (it + 1) % record_every == 0:
            path.append(x.copy())
    raise MaxItersExceeded(f"no minimum within {max_iters} steps (|g| = {gnorm:.3e})", x, path)


def _same_state(pes, a: np.ndarray, b: np.ndarray, ea: float, eb: float) -> bool:
    if abs(ea - eb) > ENERGY_TOL:
        return False
    # clusters are equivalent under rotation, translation and permutation: energy decides
    if hasattr(pes, "align"):
        return True
    return float(np.linalg.norm(a - b)) < POSITION_TOL


def _plausible(pes, x) -> bool:
    check = getattr(pes, "is_bound", None)
    return True if check is None else check(x)


def _random_direction(pes, x, rng) -> np.ndarray:
    u = rng.standard_normal(pes.dimension)
    if hasattr(pes, "project_out_rigid"):
        u = pes.project_out_rigid(x, u)
    return unit(u)


def find_saddles_from_minimum(pes, minimum: Minimum, n_trials: int = 200, seed: int = 0,
                              cfg: SpmConfig | None = None, perturbation: float = 0.1,
                              stats: dict | None = None) -> list[SaddleResult]:
    """Distinct verified saddles reached from ``minimum`` by randomly perturbed runs, lowest first."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    cfg = cfg or SpmConfig()
    rng = np.random.default_rng(seed)
    found: list[SaddleResult] = []
    dropped = 0
    for trial in range(n_trials):
        u = _random_direction(pes, minimum.position, rng)
        pair = SpringPair.from_perturbation(minimum.position, u, perturbation, cfg.natural_length)
        try:
            res = run(pes, pair, cfg.replace(seed=cfg.seed + trial))
        except SpringPairError as exc:
            logger.debug("trial %d failed: %s", trial, exc)
            dropped += 1
            continue
        if not (res.converged and res.verified_index1 and _plausible(pes, res.position)):
            dropped += 1
            continue
        if any(_same_state(pes, res.position, s.position, res.energy, s.energy) for s in found):
            continue
        found.append(res)
    if stats is not None:
        stats["dropped"] = stats.get("dropped", 0) + dropped
    logger.info("%d distinct saddles from %d trials (%d dropped)", len(found), n_trials, dropped)
    return sorted(found, key=lambda s: s.energy)


def reconstruct_mep(pes, saddle: SaddleResult, delta: float, descent: DescentParams | None = None
                    ) -> tuple[list[np.ndarray], Minimum, Minimum]:
    """Descend from both sides of the saddle along its unstable mode.

    Returns the stitched path (minus branch reversed, saddle, plus branch)
    and the minima at its two ends (minus end first).
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not saddle.verified_index1:
        raise ValueError("saddle has not passed index-1 verification")
    descent = descent or DescentParams()
    mode = unit(saddle.unstable_mode)
    branches = []
    ends = []
    for sign in (-1.0, 1.0):
        branch: list[np.ndarray] = []
        m = gradient_descent(pes, saddle.position + sign * delta * mode, descent.step, descent.tol,
                             descent.max_iters, path=branch, record_every=descent.record_every,
                             precondition=descent.precondition)
        branches.append(branch)
        ends.append(m)
    path = branches[0][::-1] + [saddle.position.copy()] + branches[1]
    return path, ends[0], ends[1]


def build_graph(pes, seed_minimum: Minimum, cfg: SpmConfig | None = None,
                params: EnumerationParams | None = None) -> LandscapeGraph:
    """Breadth-first exploration of minima and the saddles joining them."""
    cfg = cfg or SpmConfig()
    params = params or EnumerationParams()
    delta = params.delta if params.delta is not None else 10.0 * cfg.natural_length
    graph = LandscapeGraph()

    def lookup(m: Minimum) -> Minimum | None:
        for known in graph.minima:
            if _same_state(pes, m.position, known.position, m.energy, known.energy):
                return known
        return None

    def add_minimum(m: Minimum) -> Minimum:
        if len(graph.minima) >= params.max_minima:
            raise FrontierBudgetExceeded(
                f"more than {params.max_minima} minima found", graph)
        m.label = f"M{len(graph.minima) + 1}"
        graph.minima.append(m)
        return m

    seed = lookup(seed_minimum) or add_minimum(
        Minimum(seed_minimum.position.copy(), seed_minimum.energy, gradient_norm=seed_minimum.gradient_norm))
    frontier = [seed]
    visited = 0
    while frontier:
        current = frontier.pop(0)
        logger.info("exploring %s (E = %.6f), %d minima known", current.label, current.energy, len(graph.minima))
        saddles = find_saddles_from_minimum(
            pes, current, params.n_trials, params.seed + 7919 * visited, cfg, params.perturbation)
        visited += 1
        for s in saddles:
            if any(_same_state(pes, s.position, e.saddle.position, s.energy, e.saddle.energy)
                   for e in graph.edges):
                continue
            try:
                path, m_a, m_b = reconstruct_mep(pes, s, delta, params.descent)
            except SpringPairError as exc:
                logger.warning("MEP descent from saddle E=%.6f failed: %s", s.energy, exc)
                continue
            labels = []
            for m in (m_a, m_b):
                if not _plausible(pes, m.position):
                    break
                known = lookup(m)
                if known is None:
                    known = add_minimum(m)
                    frontier.append(known)
                labels.append(known)
            if len(labels) < 2:
                continue
            a, b = labels
            # list the higher-energy minimum first
            if a.energy < b.energy:
                a, b = b, a
            graph.edges.append(SaddleEdge(s, a.label, b.label, s.energy - a.energy, s.energy - b.energy, path))
    graph.edges.sort(key=lambda e: e.saddle.energy)
    return graph


def max_barrier_along(graph: LandscapeGraph, route: list[str]) -> float:
    """Largest forward barrier crossing the lowest saddle between consecutive minima of ``route``."""
    worst = -np.inf
    for src, dst in zip(route, route[1:]):
        options = [e for e in graph.edges if {e.minimum_a, e.minimum_b} == {src, dst}]
        if not options:
            raise KeyError(f"no edge between {src} and {dst}")
        edge = min(options, key=lambda e: e.saddle.energy)
        barrier = edge.barrier_from_a if edge.minimum_a == src else edge.barrier_from_b
        worst = max(worst, barrier)
    return float(worst)
