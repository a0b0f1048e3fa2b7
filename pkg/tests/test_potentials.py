import json

import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.spatial.transform import Rotation

from springpair.core import decompose_force, fd_gradient
from springpair.potentials import (
    LPGrid,
    LPSurface,
    NonZeroMean,
    OverlappingParticles,
    SingularPoint,
    lp_energy,
    lp_gradient,
    pentagonal_bipyramid,
    read_lp_field,
    read_xyz,
    spectral_resample,
    write_lp_field,
    write_xyz,
    zero_mean,
)
from springpair.landscape import gradient_descent

Q2 = 2 * np.cos(np.pi / 12)


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


class TestV1:
    def test_minimum(self, v1):
        assert v1.energy([0, 1]) == 0.0
        assert not v1.gradient([0, 1]).any()
        assert v1.energy([0, -1]) == 0.0

    def test_saddle_energy(self, v1):
        assert v1.energy([1, 0]) == 1.0

    def test_gradient_value(self, v1):
        np.testing.assert_allclose(v1.gradient([0.5, 0.5]), [0, -2], atol=1e-14)

    def test_singular(self, v1):
        with pytest.raises(SingularPoint):
            v1.energy([1e-9, 0])
        with pytest.raises(SingularPoint):
            v1.gradient([0, 0])

    def test_gradient_radial_on_unit_circle(self, v1, rng):
        for theta in rng.uniform(0, 2 * np.pi, 200):
            x = np.array([np.cos(theta), np.sin(theta)])
            g = v1.gradient(x)
            # the angular term contributes a tangential gradient only off the axes;
            # along the circle the MEP condition is that the normal part vanishes
            normal = decompose_force(g, x).parallel
            assert np.linalg.norm(normal) < 1e-10


class TestV2:
    def test_origin(self, v2):
        assert v2.energy([0, 0]) == pytest.approx(-18 * np.exp(-9), rel=1e-12)

    def test_inversion_symmetry(self, v2, rng):
        for x in rng.uniform(-5, 5, size=(100, 2)):
            assert abs(v2.energy(x) - v2.energy(-x)) <= 1e-12 * max(1, abs(v2.energy(x)))

    def test_minima(self, v2):
        for sign in (1, -1):
            m = gradient_descent(v2, [3 * sign, 0], step=0.05, tol=1e-10)
            x1, x2 = m.position
            assert abs(abs(x1) - 3) < 0.5 and np.sign(x1) == sign
            assert np.sign(x2) == -sign and 0 < abs(x2) < 0.5


class TestLJ:
    def test_dimer(self):
        from springpair.potentials import LJCluster
        pes = LJCluster(2)
        x = [0, 0, 0, 1, 0, 0]
        assert pes.energy(x) == -1.0
        assert np.abs(pes.gradient(x)).max() < 1e-14

    def test_pentagonal_bipyramid(self, lj7):
        m = minimize(lj7.energy, pentagonal_bipyramid(), jac=lj7.gradient, method="BFGS",
                     options={"gtol": 1e-10})
        assert m.fun == pytest.approx(-16.5054, abs=1e-3)

    def test_net_force_zero(self, lj7, rng):
        for _ in range(20):
            x = pentagonal_bipyramid() + rng.normal(scale=0.1, size=21)
            g = lj7.gradient(x).reshape(7, 3)
            assert np.abs(g.sum(axis=0)).max() < 1e-10

    def test_rigid_invariance(self, lj7, rng):
        for _ in range(20):
            x = (pentagonal_bipyramid() + rng.normal(scale=0.1, size=21)).reshape(7, 3)
            e = lj7.energy(x)
            moved = Rotation.random(random_state=rng.integers(1 << 31)).apply(x) + rng.normal(size=3)
            assert abs(lj7.energy(moved) - e) <= 1e-10 * abs(e)

    def test_overlap(self, lj7):
        x = pentagonal_bipyramid()
        x[3:6] = x[0:3]
        with pytest.raises(OverlappingParticles):
            lj7.energy(x)

    def test_align_removes_rigid_difference(self, lj7, rng):
        x = pentagonal_bipyramid().reshape(7, 3)
        moved = Rotation.random(random_state=3).apply(x) + [1.0, -2.0, 0.5]
        aligned = lj7.align(x.ravel(), moved.ravel())
        np.testing.assert_allclose(aligned, x.ravel(), atol=1e-12)

    def test_project_out_rigid(self, lj7, rng):
        x = pentagonal_bipyramid()
        u = lj7.project_out_rigid(x, rng.normal(size=21))
        assert np.abs(lj7.rigid_modes(x) @ u).max() < 1e-12

    def test_xyz_roundtrip(self, tmp_path, rng):
        x = rng.normal(size=21)
        write_xyz(tmp_path / "c.xyz", x, comment="test")
        lines = (tmp_path / "c.xyz").read_text().splitlines()
        assert lines[0] == "7" and lines[2].startswith("Ar ")
        np.testing.assert_array_equal(read_xyz(tmp_path / "c.xyz")[0], x)


def small_lp(n=32, length=8 * np.pi, **kw):
    return LPSurface(length, n, epsilon=-0.01, alpha=1.0, q1=1.0, q2=Q2, **kw)


def random_field(rng, n, amp=0.3):
    return zero_mean(rng.normal(scale=amp, size=(n, n)))


class TestLP:
    def test_zero_field(self):
        grid = LPGrid(8 * np.pi, 32, -0.01, 1.0)
        assert lp_energy(grid) == 0.0
        assert not lp_gradient(grid).any()

    def test_linear_term_vanishes_on_first_shell(self):
        pes = small_lp(length=2 * np.pi * 4)
        x, y = pes.coordinates()
        phi = 0.2 * np.cos(x)  # |k| = q1 = 1 is a grid wavevector here
        local = np.mean(0.005 * phi**2 - phi**3 / 3 + phi**4 / 4)
        assert pes.energy(phi) == pytest.approx(local, abs=1e-15)

    def test_non_zero_mean(self):
        with pytest.raises(NonZeroMean):
            small_lp().energy(np.full((32, 32), 1e-6))

    def test_gradient_matches_finite_differences(self, rng):
        pes = small_lp()
        free = small_lp(check_mean=False)
        for _ in range(3):
            phi = random_field(rng, 32)
            fd = fd_gradient(free, phi.ravel(), 1e-6)
            fd -= fd.mean()
            assert rel_err(pes.gradient(phi), fd) < 1e-5

    def test_gradient_mean_zero(self, rng):
        pes = small_lp()
        g = pes.gradient(random_field(rng, 32))
        assert abs(g.mean()) < 1e-12 * np.abs(g).max() + 1e-20

    def test_precondition_keeps_mean(self, rng):
        pes = small_lp()
        d = pes.precondition(rng.normal(size=32 * 32))
        assert abs(d.mean()) < 1e-12

    def test_tangent_removes_mean(self, rng):
        u = small_lp().tangent(None, rng.normal(size=32 * 32) + 1.0)
        assert abs(u.mean()) < 1e-15

    def test_project_state(self, rng):
        x = small_lp().project_state(rng.normal(size=32 * 32) + 0.5)
        assert abs(x.mean()) < 1e-15

    def test_align_removes_small_translation(self):
        pes = small_lp()
        x, y = pes.coordinates()
        field = lambda h: zero_mean(0.3 * np.cos(x + h) + 0.2 * np.sin(y - h)).ravel()
        ref, moved = field(0.0), field(1e-5)
        # first-order removal leaves an O(h^2) residual
        assert np.linalg.norm(pes.align(ref, moved) - ref) < 1e-4 * np.linalg.norm(moved - ref)
        assert pes.translation_modes(np.zeros(32 * 32)).shape == (0, 32 * 32)

    def test_phason_modes_are_soft_on_dodecagonal_field(self):
        pes = LPSurface(60 * np.pi, 128, 0.05, 1.0, phasons=True)
        x, y = pes.coordinates()
        phi = np.zeros_like(x)
        for j in range(12):
            for q, off in ((1.0, 0.0), (Q2, np.pi / 12)):
                t = off + j * np.pi / 6
                kx, ky = (np.rint(q * np.array([np.cos(t), np.sin(t)]) * 30) / 30)
                phi += 0.1 * np.cos(kx * x + ky * y)
        modes = pes.translation_modes(zero_mean(phi).ravel())
        assert modes.shape[0] == 4
        np.testing.assert_allclose(modes @ modes.T, np.eye(4), atol=1e-12)
        assert np.abs(modes.mean(axis=1)).max() < 1e-15

    def test_spectral_consistency(self, rng):
        pes = small_lp(16)
        fine = small_lp(32)
        # band-limited field: quartic products stay below the coarse Nyquist band
        spectrum = np.zeros((16, 16), dtype=complex)
        for kx, ky in [(1, 0), (0, 1), (1, 1), (1, -1)]:
            c = rng.normal() + 1j * rng.normal()
            spectrum[kx, ky] = c
            spectrum[-kx, -ky] = np.conj(c)
        phi = np.fft.ifft2(spectrum).real * 40
        phi = zero_mean(phi)
        up = spectral_resample(phi, 32)
        assert abs(up.mean()) < 1e-12
        assert fine.energy(zero_mean(up)) == pytest.approx(pes.energy(phi), rel=1e-8)

    def test_field_roundtrip(self, tmp_path, rng):
        grid = LPGrid(60 * np.pi, 16, -0.01, 1.0, field=random_field(rng, 16))
        write_lp_field(tmp_path / "phi.bin", grid.field, grid.params())
        field, params = read_lp_field(tmp_path / "phi.bin")
        np.testing.assert_array_equal(field, grid.field)
        assert params == json.loads((tmp_path / "phi.bin.json").read_text())
        assert (tmp_path / "phi.bin").stat().st_size == 16 * 16 * 8

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            LPGrid(10.0, 24, 0.0, 1.0)


def test_gradient_oracle_all_surfaces(v1, v2, lj7, rng):
    for _ in range(100):
        x = rng.uniform(-1.5, 1.5, 2)
        if np.linalg.norm(x) < 0.2:
            continue
        assert rel_err(v1.gradient(x), fd_gradient(v1, x)) < 1e-5
        assert rel_err(v2.gradient(x * 3), fd_gradient(v2, x * 3)) < 1e-5
        c = pentagonal_bipyramid() + rng.normal(scale=0.1, size=21)
        assert rel_err(lj7.gradient(c), fd_gradient(lj7, c)) < 1e-5
