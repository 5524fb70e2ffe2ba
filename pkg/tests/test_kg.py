import math

import numpy as np
import pytest

from relecho.errors import GridMismatch, GridTooSmall, MemoryCeiling, StabilityViolation, ValidationError
from relecho.kg import (
    KGGrid,
    KGPropagatorMatrix,
    KGState,
    boosted_mode_check,
    kg_echo_kernel,
    kg_evolve,
    kg_fidelity,
    kg_inner,
    plane_wave,
    positive_frequency_state,
)

GRID = KGGrid(30.0, 64)
MASS = 1.0


def packet(grid, center=-3.0, width=2.0, k=0.6):
    x = grid.x
    return positive_frequency_state(grid, MASS, np.exp(-((x - center) ** 2) / (2 * width**2) + 1j * k * x))


def bump(x):
    return 0.8 * np.exp(-(x**2) / 2)


class TestInnerProduct:
    def test_plane_wave_norms(self):
        assert kg_inner(plane_wave(GRID, MASS, 3), plane_wave(GRID, MASS, 3)) == pytest.approx(1.0, abs=1e-13)
        assert kg_inner(plane_wave(GRID, MASS, 3, -1), plane_wave(GRID, MASS, 3, -1)) == pytest.approx(-1.0, abs=1e-13)
        assert abs(kg_inner(plane_wave(GRID, MASS, 3), plane_wave(GRID, MASS, 4))) < 1e-13
        assert abs(kg_inner(plane_wave(GRID, MASS, 3), plane_wave(GRID, MASS, 3, -1))) < 1e-13

    def test_sesquilinear_and_hermitian(self):
        rng = np.random.default_rng(1)
        a, b, c = (KGState(rng.normal(size=64) + 1j * rng.normal(size=64), rng.normal(size=64) + 1j * rng.normal(size=64), GRID) for _ in range(3))
        z = 0.3 - 1.1j
        combo = KGState(b.phi + z * c.phi, b.pi + z * c.pi, GRID)
        assert kg_inner(a, combo) == pytest.approx(kg_inner(a, b) + z * kg_inner(a, c), abs=1e-12)
        assert kg_inner(a, b) == pytest.approx(np.conj(kg_inner(b, a)), abs=1e-12)

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatch):
            kg_inner(plane_wave(GRID, MASS, 0), plane_wave(KGGrid(30.0, 32), MASS, 0))
        with pytest.raises(GridTooSmall):
            KGGrid(10.0, 7)


class TestEvolution:
    def test_form_is_conserved(self):
        prop = KGPropagatorMatrix(GRID, MASS, 0.1, bump)
        assert prop.form_error(7.0) < 1e-10
        assert KGPropagatorMatrix(GRID, MASS, 0.0, None).form_error(7.0) < 1e-10
        out = kg_evolve(packet(GRID), 7.0, MASS)
        assert out.norm() == pytest.approx(1.0, abs=1e-10)

    def test_plane_wave_phase(self):
        s = plane_wave(GRID, MASS, 2)
        w = math.hypot(2 * np.pi * 2 / GRID.length, MASS)
        out = kg_evolve(s, 3.0, MASS)
        assert np.abs(out.phi - np.exp(-1j * w * 3.0) * s.phi).max() < 1e-12

    def test_constant_potential_plane_wave(self):
        # a constant A shifts the mode frequencies to +-w + eps A; free positive
        # frequency data splits as c+ = 1 - eps A / 2w and c- = eps A / 2w
        eps, a, mode = 0.05, 0.7, 2
        w = math.hypot(2 * np.pi * mode / GRID.length, MASS)
        t = np.linspace(0, 20, 11)
        cp, cm = 1 - eps * a / (2 * w), eps * a / (2 * w)
        wp, wm = w + eps * a, -w + eps * a
        phi_e = cp * np.exp(-1j * wp * t) + cm * np.exp(-1j * wm * t)
        pi_e = -1j * (wp * cp * np.exp(-1j * wp * t) + wm * cm * np.exp(-1j * wm * t))
        phi0, pi0 = np.exp(-1j * w * t), -1j * w * np.exp(-1j * w * t)
        expected = 1j * (np.conj(phi_e) * pi0 - np.conj(pi_e) * phi0) / (2 * w)
        series = kg_fidelity(plane_wave(GRID, MASS, mode), t, MASS, eps, a)
        assert np.abs(series.f - expected).max() < 1e-10
        assert np.abs(series.f - np.exp(1j * eps * a * t)).max() < 2 * cm**2

    def test_unperturbed_fidelity_is_one(self):
        series = kg_fidelity(packet(GRID), np.linspace(0, 50, 6), MASS, 0.0, bump)
        assert np.abs(series.f - 1).max() < 1e-10

    def test_supercritical_well_is_rejected(self):
        with pytest.raises(StabilityViolation):
            KGPropagatorMatrix(KGGrid(20.0, 64), 0.2, 4.0, lambda x: np.exp(-(x**2)))

    def test_invalid_mass(self):
        with pytest.raises(ValidationError):
            KGPropagatorMatrix(GRID, 0.0, 0.1, None)


class TestKernel:
    def test_matches_direct_evolution(self):
        s = packet(GRID)
        t = np.array([0.0, 4.0, 11.0])
        direct = kg_fidelity(s, t, MASS, 0.1, bump)
        props = (KGPropagatorMatrix(GRID, MASS, 0.1, bump), KGPropagatorMatrix(GRID, MASS, 0.0, None))
        for n, tn in enumerate(t):
            K = kg_echo_kernel(tn, MASS, 0.1, bump, GRID, propagators=props)
            assert abs(K.contract(s.phi) - direct.f[n]) < 1e-6

    def test_free_kernel_gives_one(self):
        s = packet(GRID)
        K = kg_echo_kernel(9.0, MASS, 0.0, None, GRID)
        assert abs(K.contract(s.phi) - 1) < 1e-6

    def test_memory_and_grid_guards(self):
        with pytest.raises(MemoryCeiling):
            kg_echo_kernel(1.0, MASS, 0.1, bump, KGGrid(30.0, 1024))
        props = (KGPropagatorMatrix(KGGrid(30.0, 32), MASS, 0.1, bump), KGPropagatorMatrix(KGGrid(30.0, 32), MASS, 0.0, None))
        with pytest.raises(GridMismatch):
            kg_echo_kernel(1.0, MASS, 0.1, bump, GRID, propagators=props)
        K = kg_echo_kernel(1.0, MASS, 0.1, bump, GRID)
        with pytest.raises(GridMismatch):
            K.contract(np.ones(32))


class TestBoostedModes:
    @pytest.mark.parametrize("v", [0.0, 0.5, 0.9])
    def test_time_dilation(self, v):
        check = boosted_mode_check(MASS, v, 0.05, 0.6, np.linspace(0, 100, 201))
        assert check.max_error < 1e-10
        assert abs(check.rest[0] - (2 + 0.03) / 2) < 1e-15

    def test_rejects_superluminal(self):
        with pytest.raises(ValidationError):
            boosted_mode_check(MASS, 1.0, 0.05, 0.6, [0.0])
