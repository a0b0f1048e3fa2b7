"""Concrete potential energy surfaces.

Two analytic 2-D test surfaces, the Lennard-Jones cluster and the
Lifshitz-Petrich free energy on a periodic square grid (Fourier
pseudo-spectral).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import SpringPairError, as_state

V1_SINGULAR_RADIUS = 1e-8
LJ_OVERLAP = 1e-10
LP_MEAN_TOL = 1e-10
TRANSLATION_TOL = 1e-8


class SingularPoint(SpringPairError):
    pass


class OverlappingParticles(SpringPairError):
    pass


class NonZeroMean(SpringPairError):
    pass


class V1Surface:
    """E = (1 - x1^2 - x2^2)^2 + x1^2 / (x1^2 + x2^2).

    Minima at (0, +-1), index-1 saddles at (+-1, 0), singular at the origin.
    """

    dimension = 2
    minima = ((0.0, -1.0), (0.0, 1.0))
    saddles = ((1.0, 0.0), (-1.0, 0.0))

    @staticmethod
    def _r2(x):
        r2 = x[0] * x[0] + x[1] * x[1]
        if r2 < V1_SINGULAR_RADIUS**2:
            raise SingularPoint(f"V1 is singular at the origin (|x| = {np.sqrt(r2):.3g})")
        return r2

    def energy(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        r2 = self._r2(x)
        return float((1.0 - r2) ** 2 + x[0] ** 2 / r2)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        r2 = self._r2(x)
        x1, x2 = x
        radial = -4.0 * (1.0 - r2)
        return np.array(
            [
                radial * x1 + 2.0 * x1 * x2 * x2 / r2**2,
                radial * x2 - 2.0 * x1 * x1 * x2 / r2**2,
            ]
        )


class V2Surface:
    """Modified Neria-Fischer-Karplus surface with two minima and one saddle."""

    dimension = 2

    def energy(self, x) -> float:
        x1, x2 = np.asarray(x, dtype=np.float64)
        return float(
            0.06 * (x1 * x1 + x2 * x2) ** 2
            + x1 * x2
            - 9.0 * np.exp(-((x1 - 3.0) ** 2) - x2 * x2)
            - 9.0 * np.exp(-((x1 + 3.0) ** 2) - x2 * x2)
        )

    def gradient(self, x) -> np.ndarray:
        x1, x2 = np.asarray(x, dtype=np.float64)
        quart = 0.24 * (x1 * x1 + x2 * x2)
        ga = 18.0 * np.exp(-((x1 - 3.0) ** 2) - x2 * x2)
        gb = 18.0 * np.exp(-((x1 + 3.0) ** 2) - x2 * x2)
        return np.array(
            [
                quart * x1 + x2 + ga * (x1 - 3.0) + gb * (x1 + 3.0),
                quart * x2 + x1 + (ga + gb) * x2,
            ]
        )


class QuadraticSurface:
    """E = x . H x / 2 with a fixed symmetric matrix ``H``.

    Handy as an exact test surface: a bowl for positive definite ``H`` or a
    saddle when ``H`` has one negative eigenvalue.
    """

    def __init__(self, hessian):
        self.hessian = np.atleast_2d(np.asarray(hessian, dtype=np.float64))
        self.dimension = self.hessian.shape[0]

    def energy(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(0.5 * x @ self.hessian @ x)

    def gradient(self, x) -> np.ndarray:
        return self.hessian @ np.asarray(x, dtype=np.float64)


def lj_pair(r):
    """Pair potential 1/r^12 - 2/r^6 (minimum -1 at r = 1)."""
    ir6 = 1.0 / np.asarray(r, dtype=np.float64) ** 6
    return ir6 * ir6 - 2.0 * ir6


class LJCluster:
    """N-particle Lennard-Jones cluster; state is the flattened (N, 3) positions."""

    def __init__(self, particle_count: int):
        if particle_count < 1:
            raise ValueError("particle_count must be positive")
        self.particle_count = particle_count
        self.dimension = 3 * particle_count
        self._iu = np.triu_indices(particle_count, k=1)

    def _pairs(self, x):
        pos = np.asarray(x, dtype=np.float64).reshape(self.particle_count, 3)
        diff = pos[:, None, :] - pos[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        np.fill_diagonal(r2, np.inf)
        if self.particle_count > 1 and r2.min() < LJ_OVERLAP**2:
            raise OverlappingParticles("two particles overlap")
        return diff, r2

    def energy(self, x) -> float:
        _, r2 = self._pairs(x)
        ir6 = 1.0 / r2[self._iu] ** 3
        return float(np.sum(ir6 * ir6 - 2.0 * ir6))

    def gradient(self, x) -> np.ndarray:
        diff, r2 = self._pairs(x)
        ir6 = 1.0 / r2**3
        # v'(r) / r for every ordered pair; zero on the diagonal
        coef = (12.0 * ir6 - 12.0 * ir6 * ir6) / r2
        return np.einsum("ij,ijk->ik", coef, diff).ravel()

    def is_bound(self, x, max_neighbour: float = 1.6) -> bool:
        """True when every particle has a neighbour closer than ``max_neighbour``."""
        pos = np.asarray(x, dtype=np.float64).reshape(self.particle_count, 3)
        d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        np.fill_diagonal(d, np.inf)
        return bool(np.all(d.min(axis=1) < max_neighbour))

    def rigid_modes(self, x) -> np.ndarray:
        """Orthonormal basis (rows) of infinitesimal translations and rotations at ``x``."""
        pos = np.asarray(x, dtype=np.float64).reshape(self.particle_count, 3)
        centred = pos - pos.mean(axis=0)
        modes = []
        for axis in np.eye(3):
            modes.append(np.tile(axis, self.particle_count))
            modes.append(np.cross(axis, centred).ravel())
        q, r = np.linalg.qr(np.array(modes).T)
        keep = np.abs(np.diag(r)) > 1e-10
        return q[:, keep].T

    def align(self, reference, x) -> np.ndarray:
        """Rigidly move ``x`` onto ``reference`` (least-squares, no permutation).

        The energy is unchanged, but the difference ``x - reference`` loses
        its translation and rotation components.
        """
        ref = np.asarray(reference, dtype=np.float64).reshape(self.particle_count, 3)
        pos = np.asarray(x, dtype=np.float64).reshape(self.particle_count, 3)
        ref_c = ref.mean(axis=0)
        pos_c = pos.mean(axis=0)
        a = pos - pos_c
        b = ref - ref_c
        u, _, vt = np.linalg.svd(a.T @ b)
        d = np.sign(np.linalg.det(u @ vt))
        rot = u @ np.diag([1.0, 1.0, d]) @ vt
        return (a @ rot + ref_c).ravel()

    def project_out_rigid(self, x, v) -> np.ndarray:
        """Remove the rigid-body (zero-energy) components of ``v`` at ``x``."""
        v = np.asarray(v, dtype=np.float64)
        basis = self.rigid_modes(x)
        return v - basis.T @ (basis @ v)


def pentagonal_bipyramid() -> np.ndarray:
    """Unrelaxed LJ7 pentagonal bipyramid with unit nearest-neighbour ring spacing."""
    ring_radius = 1.0 / (2.0 * np.sin(np.pi / 5))
    angles = 2.0 * np.pi * np.arange(5) / 5
    ring = np.column_stack([ring_radius * np.cos(angles), ring_radius * np.sin(angles), np.zeros(5)])
    apex = np.sqrt(1.0 - ring_radius**2)
    caps = np.array([[0.0, 0.0, apex], [0.0, 0.0, -apex]])
    return np.vstack([ring, caps]).ravel()


# --- Lifshitz-Petrich -------------------------------------------------------


@dataclass
class LPGrid:
    """Periodic square box [0, L)^2 sampled on an N x N grid (row-major)."""

    domain_length: float
    grid_size: int
    epsilon: float
    alpha: float
    q1: float = 1.0
    q2: float = 2.0 * np.cos(np.pi / 12)
    field: np.ndarray | None = None

    def __post_init__(self):
        n = self.grid_size
        if n < 2 or n & (n - 1):
            raise ValueError("grid_size must be a power of two")
        if not self.domain_length > 0 or not self.q1 > 0 or not self.q2 > 0:
            raise ValueError("domain_length, q1 and q2 must be positive")
        if self.field is None:
            self.field = np.zeros((n, n))
        else:
            self.field = np.asarray(self.field, dtype=np.float64).reshape(n, n)
            if not np.all(np.isfinite(self.field)):
                raise ValueError("field values must be finite")

    def params(self) -> dict:
        return {
            "L": self.domain_length,
            "N": self.grid_size,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "q1": self.q1,
            "q2": self.q2,
        }

    def surface(self, **kwargs) -> "LPSurface":
        return LPSurface.from_grid(self, **kwargs)


def _grid_kwargs(grid: LPGrid) -> dict:
    return dict(
        domain_length=grid.domain_length,
        grid_size=grid.grid_size,
        epsilon=grid.epsilon,
        alpha=grid.alpha,
        q1=grid.q1,
        q2=grid.q2,
    )


class LPSurface:
    """Lifshitz-Petrich free energy density of a mean-zero field on a periodic grid.

    The state vector is the row-major flattening of the N x N field. Energy is
    the grid average of the free-energy density, so ``gradient`` is the
    variational derivative divided by N^2 and projected onto mean zero.
    """

    def __init__(self, domain_length, grid_size, epsilon, alpha, q1=1.0, q2=2.0 * np.cos(np.pi / 12),
                 precondition_shift: float = 1.0, check_mean: bool = True, phasons: bool = False):
        LPGrid(domain_length, grid_size, epsilon, alpha, q1, q2)  # validation only
        self.domain_length = float(domain_length)
        self.grid_size = int(grid_size)
        self.epsilon = float(epsilon)
        self.alpha = float(alpha)
        self.q1 = float(q1)
        self.q2 = float(q2)
        self.dimension = self.grid_size**2
        self.check_mean = check_mean
        n = self.grid_size
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=self.domain_length / n)
        kr = 2.0 * np.pi * np.fft.rfftfreq(n, d=self.domain_length / n)
        # half spectrum of real fields; axis 0 full, axis 1 non-negative
        self.ksq = k[:, None] ** 2 + kr[None, :] ** 2
        # derivative symbols; the Nyquist entries are dropped to keep fields real
        self._ikx = 1j * np.broadcast_to(k[:, None], self.ksq.shape).copy()
        self._iky = 1j * np.broadcast_to(kr[None, :], self.ksq.shape).copy()
        if n % 2 == 0:
            self._ikx[n // 2, :] = 0.0
            self._iky[:, -1] = 0.0
        self.phasons = bool(phasons)
        self._ikperp = _dodecagonal_perp_symbol(k, kr, self.q1) if self.phasons else ()
        # multiplier of [(q1^2 + Lap)(q2^2 + Lap)]^2
        self.linear = (self.q1**2 - self.ksq) ** 2 * (self.q2**2 - self.ksq) ** 2
        # Parseval weights: interior columns of the half spectrum stand for two modes
        self._weight = np.full(kr.shape, 2.0)
        self._weight[0] = 1.0
        if n % 2 == 0:
            self._weight[-1] = 1.0
        self.precondition_shift = float(precondition_shift)
        self._precond = float(self.dimension) / (self.precondition_shift + self.linear)
        self._precond[0, 0] = 0.0

    @classmethod
    def from_grid(cls, grid: LPGrid, **kwargs) -> "LPSurface":
        return cls(**_grid_kwargs(grid), **kwargs)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.grid_size) * self.domain_length / self.grid_size
        return np.meshgrid(x, x, indexing="ij")

    def _field(self, x) -> np.ndarray:
        phi = np.asarray(x, dtype=np.float64).reshape(-1, self.grid_size, self.grid_size)
        if self.check_mean:
            worst = np.abs(phi.mean(axis=(-2, -1))).max()
            if worst > LP_MEAN_TOL:
                raise NonZeroMean(f"field mean {worst:.3e} violates mass conservation")
        return phi if phi.shape[0] > 1 else phi[0]

    def energies(self, fields) -> np.ndarray:
        """Energy of each field in a stack of shape (..., N, N) or (..., N^2)."""
        phi = self._field(fields)
        phi_hat = np.fft.rfft2(phi)
        power = (phi_hat.real**2 + phi_hat.imag**2) * self._weight
        # Parseval: the grid mean of (L phi)^2 is sum |m(k) phi_hat|^2 / N^4
        lin_sq = np.sum(self.linear * power, axis=(-2, -1)) / self.dimension**2
        # -eps/2 phi^2 - alpha/3 phi^3 + phi^4/4 in Horner form (float powers are slow)
        local = phi * phi * (0.25 * phi * phi - self.alpha / 3.0 * phi - 0.5 * self.epsilon)
        return 0.5 * lin_sq + local.mean(axis=(-2, -1))

    def energy(self, x) -> float:
        return float(self.energies(x))

    def chemical_potential(self, x) -> np.ndarray:
        """Variational derivative, mean removed, as an N x N array."""
        phi = self._field(x)
        lin = np.fft.irfft2(self.linear * np.fft.rfft2(phi), s=phi.shape[-2:])
        mu = lin + phi * (phi * (phi - self.alpha) - self.epsilon)
        return mu - mu.mean()

    def gradient(self, x) -> np.ndarray:
        return self.chemical_potential(x).ravel() / self.dimension

    def translation_modes(self, x) -> np.ndarray:
        """Orthonormal rows spanning the infinitesimal translations of the field ``x``.

        With ``phasons`` set the two phason shifts of a dodecagonal
        quasicrystal are included; they are zero modes of that phase too.
        """
        phi_hat = np.fft.rfft2(self._field(x))
        s = (self.grid_size, self.grid_size)
        symbols = (self._ikx, self._iky, *self._ikperp)
        modes = np.array([np.fft.irfft2(sym * phi_hat, s=s).ravel() for sym in symbols])
        q, r = np.linalg.qr(modes.T)
        keep = np.abs(np.diag(r)) > TRANSLATION_TOL * max(1.0, np.abs(np.diag(r)).max())
        return q.T[keep]

    def align(self, ref, x) -> np.ndarray:
        """Remove the translational part of ``x - ref`` to first order.

        Ordered fields have zero-energy translation modes; a spring that
        locks onto them climbs nowhere.
        """
        x = np.asarray(x, dtype=np.float64)
        basis = self.translation_modes(ref)
        return x - basis.T @ (basis @ (x - ref))

    def project_state(self, x) -> np.ndarray:
        """Nearest mean-zero field; removes rounding drift of the conserved mass."""
        x = np.asarray(x, dtype=np.float64)
        return x - x.mean()

    def tangent(self, x, v) -> np.ndarray:
        """Project ``v`` onto the mean-zero (mass conserving) subspace."""
        v = np.asarray(v, dtype=np.float64)
        return v - v.mean()

    def precondition(self, f) -> np.ndarray:
        """Map a force to a smoothed step direction.

        Applies N^2 / (shift + m(k)) in Fourier space, where m(k) is the
        symbol of the stiff linear operator. This is symmetric positive
        definite on mean-zero fields, so stationary points are unchanged.
        """
        f = np.asarray(f, dtype=np.float64).reshape(self.grid_size, self.grid_size)
        return np.fft.irfft2(self._precond * np.fft.rfft2(f), s=f.shape).ravel()


def _dodecagonal_perp_symbol(k, kr, q1, max_index=3, match_tol=0.02):
    """i k_perp on the half spectrum for the rank-4 dodecagonal module.

    Each module vector sum_n m_n e_n (e_n at n*30 degrees, |m_n| <= max_index)
    is snapped to its nearest grid wavevector; the simplest match wins.
    Unmatched wavevectors get zero.
    """
    angles = np.arange(4) * np.pi / 6
    par = q1 * np.column_stack([np.cos(angles), np.sin(angles)])
    perp = q1 * np.column_stack([np.cos(5 * angles), np.sin(5 * angles)])
    m = np.array(np.meshgrid(*[np.arange(-max_index, max_index + 1)] * 4, indexing="ij")).reshape(4, -1).T
    kpar, kperp = m @ par, m @ perp
    dk = k[1]
    n = k.size
    ix = np.rint(kpar[:, 0] / dk).astype(int)
    iy = np.rint(kpar[:, 1] / dk).astype(int)
    err = np.hypot(kpar[:, 0] - ix * dk, kpar[:, 1] - iy * dk)
    ok = (err < match_tol) & (iy >= 0) & (iy < kr.size) & (np.abs(ix) < n // 2)
    order = np.lexsort((np.abs(m).sum(axis=1), np.round(err, 3)))
    out = np.zeros((2, n, kr.size), dtype=complex)
    taken = np.zeros((n, kr.size), dtype=bool)
    for j in order[ok[order]]:
        cell = (ix[j] % n, iy[j])
        if not taken[cell]:
            taken[cell] = True
            out[:, cell[0], cell[1]] = 1j * kperp[j]
    # the mean stays untouched and column ky = 0 must be odd in kx for real modes
    out[:, 0, 0] = 0.0
    half = np.arange(1, (n + 1) // 2)
    out[:, n - half, 0] = -out[:, half, 0]
    return out[0], out[1]


def lp_energy(grid: LPGrid) -> float:
    return LPSurface.from_grid(grid).energy(grid.field)


def lp_gradient(grid: LPGrid) -> np.ndarray:
    n = grid.grid_size
    return LPSurface.from_grid(grid).gradient(grid.field).reshape(n, n)


def zero_mean(field) -> np.ndarray:
    field = np.asarray(field, dtype=np.float64)
    return field - field.mean()


def spectral_resample(field, new_size: int) -> np.ndarray:
    """Resample a periodic field to ``new_size`` points per side via zero padding/truncation."""
    field = np.asarray(field, dtype=np.float64)
    n = field.shape[0]
    if new_size < n:
        raise ValueError("only upsampling is supported")
    spectrum = np.fft.fftshift(np.fft.fft2(field))
    out = np.zeros((new_size, new_size), dtype=complex)
    lo = new_size // 2 - n // 2
    out[lo:lo + n, lo:lo + n] = spectrum
    # split the Nyquist row/column so the resampled field stays real
    nyq = lo
    out[nyq, :] *= 0.5
    out[:, nyq] *= 0.5
    out[lo + n, :] = out[nyq, :]
    out[:, lo + n] = out[:, nyq]
    out[lo + n, lo + n] = out[nyq, nyq]
    res = np.fft.ifft2(np.fft.ifftshift(out)).real
    return res * (new_size / n) ** 2


# --- file formats -----------------------------------------------------------


def _xyz_block(positions, comment, element) -> list[str]:
    pos = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    # repr of a python float round-trips exactly
    rows = [f"{element} {float(x)!r} {float(y)!r} {float(z)!r}" for x, y, z in pos]
    return [str(len(pos)), comment.replace("\n", " ")] + rows


def write_xyz(path, positions, comment: str = "", element: str = "Ar") -> None:
    Path(path).write_text("\n".join(_xyz_block(positions, comment, element)) + "\n")


def read_xyz(path) -> np.ndarray:
    """Read every frame in an XYZ file; returns an array of shape (frames, 3N)."""
    lines = Path(path).read_text().splitlines()
    frames = []
    i = 0
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        n = int(lines[i])
        body = lines[i + 2:i + 2 + n]
        if len(body) != n:
            raise ValueError(f"{path}: truncated XYZ frame at line {i + 1}")
        frames.append([float(v) for line in body for v in line.split()[1:4]])
        i += 2 + n
    return np.array(frames)


def write_xyz_frames(path, frames, comments=None, element: str = "Ar") -> None:
    chunks = []
    for k, frame in enumerate(frames):
        chunks += _xyz_block(frame, comments[k] if comments else f"frame {k}", element)
    Path(path).write_text("\n".join(chunks) + "\n")


def write_lp_field(path, field, params: dict) -> None:
    """Raw little-endian float64 field plus a ``<path>.json`` sidecar."""
    path = Path(path)
    np.asarray(field, dtype="<f8").ravel().tofile(path)
    Path(str(path) + ".json").write_text(json.dumps(params, indent=2))


def read_lp_field(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    params = json.loads(Path(str(path) + ".json").read_text())
    n = int(params["N"])
    data = np.fromfile(path, dtype="<f8")
    if data.size % (n * n):
        raise ValueError(f"{path}: size {data.size} is not a multiple of N^2 = {n * n}")
    frames = data.reshape(-1, n, n)
    return (frames[0] if len(frames) == 1 else frames), params
