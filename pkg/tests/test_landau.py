import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from relecho.errors import EmptyTruncation, GridTooSmall, TruncationTooLarge, ValidationError
from relecho.grid import SpinorField, TransverseGrid, dirac_apply
from relecho.landau import (
    BasisTruncation,
    ParticleParams,
    QuantumNumbers,
    SampledBasis,
    degenerate_set,
    landau_energy,
    landau_orbital,
    landau_spinor,
    orbital_values,
)

P = ParticleParams(1.0, 1.0)


def radial_pauli_levels(H, ell, spin, count=3, rmax=9.0, n=6000):
    """Lowest eigenvalues of pi_perp^2 - H sigma_z in angular channel ell.

    Independent of the closed form: u(r) = sqrt(r) R(r) turns the radial
    operator into -u'' + [(ell^2 - 1/4)/r^2 + (ell/r - H r/2)^2 - ell^2/r^2] u,
    discretized by second-order differences and diagonalized densely.
    """
    h = rmax / (n + 1)
    r = h * np.arange(1, n + 1)
    pot = (ell**2 - 0.25) / r**2 + (ell / r - H * r / 2) ** 2 - ell**2 / r**2 - H * spin
    d = 2.0 / h**2 + pot
    e = -np.ones(n - 1) / h**2
    return scipy.linalg.eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1), eigvals_only=True)


class TestLandauEnergy:
    def test_ground_state_is_rest_mass(self):
        assert landau_energy(QuantumNumbers(0, 0, 1), P) == 1.0

    def test_first_excited_level_against_radial_diagonalization(self):
        # spin up, ell = 1: Pauli levels 0, 2H, 4H -> E^2 = m^2 + 2 nu H
        up = radial_pauli_levels(1.0, 1, +1)
        assert up[0] == pytest.approx(0.0, abs=2e-4)
        E1 = math.sqrt(1.0 + up[1])
        assert E1 == pytest.approx(landau_energy(QuantumNumbers(1, 1, 1), P), rel=1e-4)
        assert E1 == pytest.approx(math.sqrt(3.0), rel=1e-4)
        # spin down in the same channel starts at nu = 1
        down = radial_pauli_levels(1.0, 1, -1)
        assert math.sqrt(1.0 + down[0]) == pytest.approx(landau_energy(QuantumNumbers(0, 1, -1), P), rel=1e-4)

    def test_longitudinal_dispersion(self):
        p = ParticleParams(1.3, 0.7, 0.9)
        assert landau_energy(QuantumNumbers(0, 2, 1, kz=0.9), p) == pytest.approx(math.hypot(1.3, 0.9), rel=1e-15)

    @given(nu=st.integers(0, 20), kz=st.floats(0, 10), ml1=st.integers(0, 50), ml2=st.integers(0, 50))
    def test_degenerate_in_ml_and_monotone(self, nu, kz, ml1, ml2):
        p = ParticleParams(1.0, 0.8, kz)
        a = landau_energy(QuantumNumbers(nu, ml1, 1, kz), p)
        b = landau_energy(QuantumNumbers(nu, ml2, 1, kz), p)
        assert a == b
        assert landau_energy(QuantumNumbers(nu + 1, ml1, 1, kz), p) > a
        p2 = ParticleParams(1.0, 0.8, kz + 0.5)
        assert landau_energy(QuantumNumbers(nu, ml1, 1, kz + 0.5), p2) > a

    def test_spin_branch_shifts_level(self):
        assert QuantumNumbers(0, 0, -1).nu == 1
        assert landau_energy(QuantumNumbers(0, 0, -1), P) == landau_energy(QuantumNumbers(1, 0, 1), P)


class TestQuantumNumbers:
    def test_rejects_invalid(self):
        with pytest.raises(ValidationError):
            QuantumNumbers(-1, 0)
        with pytest.raises(ValidationError):
            QuantumNumbers(0, 0, s=2)
        with pytest.raises(ValidationError):
            QuantumNumbers(1, -2)

    def test_lowest_level_has_single_branch(self):
        labels = BasisTruncation(0, -3, 3).labels()
        assert {q.s for q in labels} == {1}
        assert all(q.nu == 0 for q in labels)


class TestOrbitals:
    grid = TransverseGrid(8.0, 96)

    def test_ground_orbital_normalized_gaussian(self):
        phi = landau_orbital(0, 0, 1.0, self.grid)
        assert np.sum(abs(phi) ** 2) * self.grid.cell_area == pytest.approx(1.0, abs=1e-8)
        x, y = self.grid.mesh
        expected = np.exp(-(x**2 + y**2) / 4) / math.sqrt(2 * math.pi)
        assert np.abs(abs(phi) - expected).max() < 1e-12

    def test_orthogonality(self):
        a = landau_orbital(0, 0, 1.0, self.grid)
        b = landau_orbital(1, 0, 1.0, self.grid)
        assert abs(np.vdot(a, b)) * self.grid.cell_area < 1e-8

    def test_peak_radius(self):
        # brute-force maximization of the closed-form density along a ray
        r = np.linspace(0, 8, 200001)
        dens = abs(orbital_values(2, 3, 1.0, r, 0 * r)) ** 2
        # the outermost ring of n=2, ml=3 is the global maximum
        r_peak = r[np.argmax(dens)]
        grid = TransverseGrid(10.0, 400)
        phi = landau_orbital(2, 3, 1.0, grid)
        x, y = grid.mesh
        rr = np.hypot(x, y)
        assert abs(rr.flat[np.argmax(abs(phi))] - r_peak) < 2 * grid.spacing

    def test_ladder_relations(self):
        # pi_- phi(n, m) = i sqrt(2H(n+1)) phi(n+1, m-1) with pi = p - B
        H = 1.3
        grid = TransverseGrid(9.0, 256)
        x, y = grid.mesh
        k = 2 * np.pi * np.fft.fftfreq(grid.points, d=grid.spacing)

        def spectral(f, axis):
            shape = [1, 1]
            shape[axis] = -1
            return np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(f, axis=axis), axis=axis)

        for n, m in [(0, 0), (0, 2), (1, -1), (2, 1)]:
            phi = landau_orbital(n, m, H, grid)
            pix = -1j * spectral(phi, 0) + 0.5 * H * y * phi
            piy = -1j * spectral(phi, 1) - 0.5 * H * x * phi
            target = 1j * math.sqrt(2 * H * (n + 1)) * landau_orbital(n + 1, m - 1, H, grid)
            assert np.abs((pix - 1j * piy) - target).max() < 1e-6 * np.abs(target).max()
            if n > 0:
                raised = -1j * math.sqrt(2 * H * n) * landau_orbital(n - 1, m + 1, H, grid)
                assert np.abs((pix + 1j * piy) - raised).max() < 1e-6 * np.abs(raised).max()

    def test_grid_too_small(self):
        with pytest.raises(GridTooSmall):
            landau_orbital(0, 30, 1.0, TransverseGrid(6.0, 64))


class TestSpinors:
    def test_lowest_state_has_no_lower_components(self):
        s = landau_spinor(QuantumNumbers(0, 0, 1), P, TransverseGrid(8.0, 64))
        assert np.all(s.data[2:] == 0)
        assert s.norm() == pytest.approx(1.0, abs=1e-8)

    def test_distinct_spinors_orthogonal(self):
        g = TransverseGrid(9.0, 96)
        p = ParticleParams(1.0, 1.0, 0.4)
        a = landau_spinor(QuantumNumbers(1, 0, 1, 0.4), p, g)
        b = landau_spinor(QuantumNumbers(0, 1, -1, 0.4), p, g)
        assert abs(a.inner(b)) < 1e-6

    def test_residual_nu1_bound(self):
        qn = QuantumNumbers(1, 0, 1)
        g = TransverseGrid(8.0, 128)
        s = landau_spinor(qn, P, g)
        r = dirac_apply(s, 1.0, 1.0, order=4).data - landau_energy(qn, P) * s.data
        assert math.sqrt(SpinorField(r, 0.0, g).norm()) <= 1e-3

    @pytest.mark.parametrize("order", [2, 4])
    def test_residual_converges_at_stencil_order(self, order):
        # L = 10 keeps the domain-truncation floor below the stencil error
        qn = QuantumNumbers(1, 0, 1)
        res = []
        for N in (64, 128, 256):
            g = TransverseGrid(10.0, N)
            s = landau_spinor(qn, P, g)
            r = dirac_apply(s, 1.0, 1.0, order=order).data - landau_energy(qn, P) * s.data
            res.append(math.sqrt(SpinorField(r, 0.0, g).norm()))
        rates = [math.log2(res[i] / res[i + 1]) for i in range(2)]
        assert all(abs(rate - order) < 0.3 for rate in rates), rates

    def test_gram_is_identity(self):
        basis = SampledBasis.build(ParticleParams(1.0, 1.0, 0.5), BasisTruncation(2, -2, 5), TransverseGrid(11.0, 96))
        assert np.abs(basis.gram() - np.eye(basis.dim)).max() < 1e-6


class TestTruncation:
    def test_lowest_level_degeneracy(self):
        tr = BasisTruncation(0, 0, 7)
        assert len(degenerate_set(QuantumNumbers(0, 3), P, tr)) == 8

    def test_zero_tolerance_separates_levels(self):
        tr = BasisTruncation(1, 0, 3)
        a = degenerate_set(QuantumNumbers(0, 0), P, tr, tol=0.0)
        b = degenerate_set(QuantumNumbers(1, 0), P, tr, tol=0.0)
        assert not set(a) & set(b)

    def test_mixed_truncation_against_pairwise_scan(self):
        p = ParticleParams(1.0, 0.9, 0.2)
        tr = BasisTruncation(1, -2, 4)
        labels = tr.labels(0.2)
        E = {q: landau_energy(q, p) for q in labels}
        for ref in labels:
            brute = [q for q in labels if abs(E[q] - E[ref]) <= 1e-9 * E[ref]]
            assert degenerate_set(ref, p, tr) == brute
            assert ref in brute

    def test_errors(self):
        with pytest.raises(EmptyTruncation):
            degenerate_set(QuantumNumbers(0, 9), P, BasisTruncation(0, 0, 3))
        with pytest.raises(TruncationTooLarge):
            BasisTruncation(3, -3, 100, max_dim=50).labels()
        with pytest.raises(ValidationError):
            BasisTruncation(-1, 0, 1)
        with pytest.raises(ValidationError):
            ParticleParams(0.0, 1.0)

    @settings(max_examples=30)
    @given(nu=st.integers(0, 4), lo=st.integers(-4, 2), width=st.integers(0, 6))
    def test_labels_unique_and_within_range(self, nu, lo, width):
        tr = BasisTruncation(nu, lo, lo + width)
        if lo + width < -nu:
            with pytest.raises(EmptyTruncation):
                tr.labels()
            return
        labels = tr.labels()
        assert len(set(labels)) == len(labels)
        assert all(lo <= q.ml <= lo + width and q.nu <= nu for q in labels)
