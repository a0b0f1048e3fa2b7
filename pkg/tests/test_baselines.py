import numpy as np
import pytest

from springpair.baselines import (
    BaselineParams,
    DimerState,
    GadState,
    dimer_rotate,
    dimer_run,
    gad_run,
    path_max_energy,
)
from springpair.potentials import QuadraticSurface, V1Surface
from springpair.spm import Status


def random_saddle_hessian(rng, dim):
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    eig = rng.uniform(0.5, 2.0, size=dim)
    eig[0] = -rng.uniform(0.5, 2.0)
    return q @ np.diag(eig) @ q.T, q[:, 0]


class TestStates:
    def test_dimer_requires_unit_orientation(self):
        with pytest.raises(ValueError):
            DimerState(np.zeros(2), np.array([1.0, 1.0]))
        assert np.linalg.norm(DimerState.create([0, 0], [3, 4]).orientation) == pytest.approx(1.0)

    def test_gad_requires_unit_mode(self):
        with pytest.raises(ValueError):
            GadState(np.zeros(2), np.array([0.0, 2.0]))


class TestQuadratic:
    def test_dimer_finds_origin(self):
        pes = QuadraticSurface(np.diag([-1.0, 2.0]))
        r = dimer_run(pes, DimerState.create([0.3, 0.2], [0.6, 0.8]))
        assert r.status is Status.CONVERGED and r.verified_index1
        np.testing.assert_allclose(r.position, 0, atol=1e-6)

    def test_gad_finds_origin(self):
        pes = QuadraticSurface(np.diag([-1.0, 2.0]))
        r = gad_run(pes, GadState.create([0.3, 0.2], [0.6, 0.8]))
        assert r.status is Status.CONVERGED and r.verified_index1
        np.testing.assert_allclose(r.position, 0, atol=1e-6)
        assert abs(abs(r.unstable_mode[0]) - 1) < 1e-3

    @pytest.mark.parametrize("walker", ["dimer", "gad"])
    def test_random_quadratics(self, walker, rng):
        for trial in range(25):
            dim = int(rng.integers(2, 11))
            hess, unstable = random_saddle_hessian(rng, dim)
            pes = QuadraticSurface(hess)
            x0 = rng.normal(size=dim) * 0.2
            mode = unstable + 0.3 * rng.normal(size=dim) / np.sqrt(dim)
            if walker == "dimer":
                r = dimer_run(pes, DimerState.create(x0, mode))
            else:
                r = gad_run(pes, GadState.create(x0, mode))
            assert r.converged, (trial, dim, r.status)
            assert np.linalg.norm(r.position) < 1e-5
            assert abs(np.dot(r.unstable_mode, unstable)) > 0.99


def test_rotation_never_raises_curvature(rng):
    hist = []
    for _ in range(20):
        hess, _ = random_saddle_hessian(rng, 6)
        pes = QuadraticSurface(hess)
        state = DimerState.create(rng.normal(size=6), rng.normal(size=6))
        dimer_rotate(pes, state, BaselineParams(), history=hist)
    assert hist
    accepted = [(a, b) for a, b in hist if b <= a + 1e-10]
    assert len(accepted) >= len(hist) - 20  # at most the final rejected try per call


def test_gad_mode_stays_unit():
    pes = QuadraticSurface(np.diag([-1.0, 2.0, 3.0]))
    r = gad_run(pes, GadState.create([0.2, 0.1, -0.1], [1, 1, 1]), BaselineParams(max_iters=7))
    assert abs(np.linalg.norm(r.unstable_mode) - 1) < 1e-12
    assert r.status is Status.MAX_CYCLES


class TestV1:
    def start(self, size):
        d = np.array([0.4, 1.0]) / np.linalg.norm([0.4, 1.0])
        return np.array([0.0, -1.0]) + size * d, d

    @pytest.mark.parametrize("size", [0.3])
    def test_trapped_near_origin(self, size):
        x0, d = self.start(size)
        pes = V1Surface()
        for r in (dimer_run(pes, DimerState.create(x0, d)), gad_run(pes, GadState.create(x0, d))):
            assert r.status is Status.TRAPPED
            assert np.linalg.norm(r.position) < 0.3

    def test_small_perturbation_converges(self):
        x0, d = self.start(0.1)
        pes = V1Surface()
        for r in (dimer_run(pes, DimerState.create(x0, d)), gad_run(pes, GadState.create(x0, d))):
            assert r.converged
            np.testing.assert_allclose(np.abs(r.position), [1, 0], atol=1e-5)


def test_path_max_energy():
    pes = QuadraticSurface(np.diag([-1.0, 1.0]))
    x, e = path_max_energy([[1, 0], [0, 0], [0, 1]], pes)
    np.testing.assert_array_equal(x, [0, 1])
    assert e == 0.5
    with pytest.raises(ValueError):
        path_max_energy([], pes)
