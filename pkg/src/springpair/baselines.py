"""Min-mode baselines: the dimer method and gentlest ascent dynamics.

Both walkers use forward Euler translation steps and Hessian-free
curvature information, and report through the same SaddleResult type as
the spring pair walker so the comparison runs can share output code.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SpringPairError, as_state, directional_curvature, unit
from .spm import CycleRecord, SaddleResult, Status

STAGNATION_WINDOW = 100
STAGNATION_RTOL = 1e-10


@dataclass(frozen=True)
class DimerState:
    center: np.ndarray
    orientation: np.ndarray
    half_length: float = 1e-3

    def __post_init__(self):
        if abs(np.linalg.norm(self.orientation) - 1.0) > 1e-10:
            raise ValueError("dimer orientation must be a unit vector")
        if not self.half_length > 0:
            raise ValueError("half_length must be positive")

    @classmethod
    def create(cls, center, orientation, half_length: float = 1e-3) -> "DimerState":
        return cls(as_state(center), unit(as_state(orientation)), float(half_length))


@dataclass(frozen=True)
class GadState:
    position: np.ndarray
    mode: np.ndarray

    def __post_init__(self):
        if abs(np.linalg.norm(self.mode) - 1.0) > 1e-10:
            raise ValueError("GAD mode must be a unit vector")

    @classmethod
    def create(cls, position, mode) -> "GadState":
        return cls(as_state(position), unit(as_state(mode)))


@dataclass(frozen=True)
class BaselineParams:
    step: float = 5e-2
    tolerance: float = 1e-7
    max_iters: int = 20_000
    # dimer
    rotation_steps: int = 10
    rotation_tol: float = 1e-3
    # GAD
    mode_step: float = 2e-1
    fd_step: float = 1e-4
    # cap on the translation length per step; guards against blow-up near singularities
    max_move: float = 0.1


class _Stagnation:
    """Flags a run whose best force norm stopped improving."""

    def __init__(self, window=STAGNATION_WINDOW, rtol=STAGNATION_RTOL):
        self.window = window
        self.rtol = rtol
        self.best = []

    def update(self, fnorm: float) -> bool:
        prev = self.best[-1] if self.best else np.inf
        self.best.append(min(prev, fnorm))
        if len(self.best) <= self.window:
            return False
        old = self.best[-1 - self.window]
        return (old - self.best[-1]) <= self.rtol * old


def _limit(step, max_move):
    n = np.linalg.norm(step)
    return step if n <= max_move else step * (max_move / n)


def _finish(pes, x, mode, status, fnorm, it, trace, path, h):
    curv = None
    verified = False
    if status is Status.CONVERGED:
        curv = directional_curvature(pes, x, mode, h)
        verified = bool(curv < 0)
    return SaddleResult(
        position=x.copy(),
        energy=pes.energy(x),
        unstable_mode=mode.copy(),
        residual_e1=float(fnorm),
        cycles_used=it,
        verified_index1=verified,
        status=status,
        curvature=curv,
        trace=trace,
        path=path,
    )


def _record(trace, it, x, e, fnorm, known):
    e2 = None if known is None else float(np.linalg.norm(x - known))
    trace.append(CycleRecord(it, 0, x.copy(), x.copy(), e, e, float(fnorm), e2))


def _hess_vec(pes, x, v, h):
    return (pes.gradient(x + h * v) - pes.gradient(x - h * v)) / (2.0 * h)


def dimer_curvature(pes, center, orientation, half_length) -> float:
    """Curvature estimate from the force difference across the dimer."""
    g1 = pes.gradient(center + half_length * orientation)
    g2 = pes.gradient(center - half_length * orientation)
    return float(np.dot(g1 - g2, orientation) / (2.0 * half_length))


def dimer_rotate(pes, state: DimerState, params: BaselineParams, history=None) -> tuple[np.ndarray, float]:
    """Rotate the dimer towards the lowest curvature mode.

    Each sub-iteration rotates in the plane spanned by the orientation and
    the rotational force, using a two-point estimate of the rotation angle,
    and only accepts rotations that do not raise the curvature.
    """
    c, n, dr = state.center, state.orientation, state.half_length
    g0 = pes.gradient(c)
    curv = dimer_curvature(pes, c, n, dr)
    for _ in range(params.rotation_steps):
        g1 = pes.gradient(c + dr * n)
        g2 = 2.0 * g0 - g1  # gradient at the lower image by linear extrapolation
        diff = (g1 - g2) / (2.0 * dr)
        rot = diff - np.dot(diff, n) * n
        rnorm = np.linalg.norm(rot)
        if rnorm < params.rotation_tol:
            break
        theta = -rot / rnorm
        # curvature along n*cos(a) + theta*sin(a) is c0 + A cos 2a + B sin 2a
        c_nn = curv
        c_tt = dimer_curvature(pes, c, theta, dr)
        c_nt = float(np.dot(diff, theta))
        phi = 0.5 * np.arctan2(2.0 * c_nt, c_nn - c_tt)
        best = None
        for angle in (phi + np.pi / 2, phi):
            cand = unit(n * np.cos(angle) + theta * np.sin(angle))
            cc = 0.5 * (c_nn + c_tt) + 0.5 * (c_nn - c_tt) * np.cos(2 * angle) + c_nt * np.sin(2 * angle)
            if best is None or cc < best[1]:
                best = (cand, cc)
        new_n = best[0]
        new_curv = dimer_curvature(pes, c, new_n, dr)
        if history is not None:
            history.append((curv, new_curv))
        if new_curv > curv + 1e-10:
            break
        n, curv = new_n, new_curv
    return n, curv


def dimer_run(pes, initial: DimerState, params: BaselineParams | None = None,
              known_saddle=None) -> SaddleResult:
    """Dimer walker: rotate to the min mode, then translate with the inverted parallel force."""
    params = params or BaselineParams()
    known = None if known_saddle is None else as_state(known_saddle)
    x = initial.center.copy()
    n = initial.orientation.copy()
    stag = _Stagnation()
    trace, path = [], [x.copy()]
    fnorm = np.inf
    status = Status.MAX_CYCLES
    it = 0
    for it in range(1, params.max_iters + 1):
        try:
            n, curv = dimer_rotate(pes, DimerState(x, n, initial.half_length), params)
            f = -pes.gradient(x)
        except SpringPairError:
            status = Status.TRAPPED
            break
        f_par = np.dot(f, n) * n
        f_eff = f - 2.0 * f_par if curv < 0 else -f_par
        x = x + _limit(params.step * f_eff, params.max_move)
        path.append(x.copy())
        try:
            fnorm = float(np.linalg.norm(pes.gradient(x)))
            e = pes.energy(x)
        except SpringPairError:
            status = Status.TRAPPED
            break
        _record(trace, it, x, e, fnorm, known)
        if fnorm < params.tolerance:
            status = Status.CONVERGED
            break
        if stag.update(fnorm):
            status = Status.TRAPPED
            break
    return _finish(pes, x, n, status, fnorm, it, trace, path, params.fd_step)


def gad_run(pes, initial: GadState, params: BaselineParams | None = None,
            known_saddle=None) -> SaddleResult:
    """Gentlest ascent dynamics with finite-difference Hessian-vector products.

    x' = -g + 2 (g.v) v and v' = -H v + (v.H v) v, both by forward Euler; v
    is renormalised after every update.
    """
    params = params or BaselineParams()
    known = None if known_saddle is None else as_state(known_saddle)
    x = initial.position.copy()
    v = initial.mode.copy()
    stag = _Stagnation()
    trace, path = [], [x.copy()]
    fnorm = np.inf
    status = Status.MAX_CYCLES
    it = 0
    for it in range(1, params.max_iters + 1):
        try:
            g = pes.gradient(x)
            hv = _hess_vec(pes, x, v, params.fd_step)
        except SpringPairError:
            status = Status.TRAPPED
            break
        dx = -g + 2.0 * np.dot(g, v) * v
        dv = -hv + np.dot(v, hv) * v
        x = x + _limit(params.step * dx, params.max_move)
        v = unit(v + params.mode_step * dv)
        path.append(x.copy())
        try:
            fnorm = float(np.linalg.norm(pes.gradient(x)))
            e = pes.energy(x)
        except SpringPairError:
            status = Status.TRAPPED
            break
        _record(trace, it, x, e, fnorm, known)
        if fnorm < params.tolerance:
            status = Status.CONVERGED
            break
        if stag.update(fnorm):
            status = Status.TRAPPED
            break
    return _finish(pes, x, v, status, fnorm, it, trace, path, params.fd_step)


def path_max_energy(trace, pes) -> tuple[np.ndarray, float]:
    """Highest-energy point along a trajectory."""
    if len(trace) == 0:
        raise ValueError("trace is empty")
    energies = [pes.energy(x) for x in trace]
    k = int(np.argmax(energies))
    return np.asarray(trace[k]).copy(), float(energies[k])
