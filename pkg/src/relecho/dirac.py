"""Perturbed Dirac Hamiltonian in a truncated Landau basis, exact evolution and echoes."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GridMismatch, GridTooCoarse, MemoryCeiling, ValidationError
from .fields import PerturbationField
from .grid import COUPLING, GAMMA0, SpinorField, TransverseGrid
from .landau import BasisTruncation, ParticleParams, QuantumNumbers, SampledBasis

MIN_POINTS_PER_SCALE = 8
DEFAULT_KERNEL_BYTES = 256 * 2**20


def perturbation_matrix(basis: SampledBasis, components: np.ndarray) -> np.ndarray:
    """Matrix elements <i| gamma^0 gamma^mu A_mu |j> by grid quadrature.

    Each spinor component is a combination of sampled orbitals, so the
    quadrature factorizes into orbital integrals of A^mu followed by the
    spinor coefficients.
    """
    table = basis.table
    n_orb = table.shape[0]
    flat = table.reshape(n_orb, -1)
    area = basis.grid.cell_area
    coeffs = basis.coeffs
    V = np.zeros((basis.dim, basis.dim), dtype=complex)
    for mu in range(4):
        a = components[mu].reshape(-1)
        if not np.any(a):
            continue
        P = (flat.conj() * a) @ flat.T * area
        for c2 in range(4):
            column = COUPLING[mu][:, c2]
            if not np.any(column):
                continue
            right = P @ coeffs[c2].T
            for c1 in np.flatnonzero(column):
                V += column[c1] * (coeffs[c1].conj() @ right)
    return V


@dataclass(eq=False)
class HamiltonianModel:
    """E + eps V in a truncated basis with its eigendecomposition.

    ``V`` excludes the strength; the perturbed Hamiltonian is
    ``diag(energies) + strength * V``.
    """

    basis: SampledBasis | None
    energies: np.ndarray
    V: np.ndarray
    strength: float
    perturbation: PerturbationField | None = None
    diagonal_shift: float = 0.0

    def __post_init__(self):
        H = np.diag(self.energies).astype(complex) + self.strength * self.V
        self.eigvals, self.eigvecs = np.linalg.eigh(H)

    @property
    def dim(self) -> int:
        return len(self.energies)

    @property
    def labels(self) -> list:
        # toy models without a sampled basis are labelled by index
        return self.basis.labels if self.basis is not None else list(range(self.dim))

    @cached_property
    def hamiltonian(self) -> np.ndarray:
        return np.diag(self.energies).astype(complex) + self.strength * self.V

    def reconstruction_error(self) -> float:
        Q, w = self.eigvecs, self.eigvals
        H = self.hamiltonian
        return float(np.abs((Q * w) @ Q.conj().T - H).max() / max(np.abs(H).max(), 1e-300))

    def with_strength(self, strength: float) -> "HamiltonianModel":
        pert = self.perturbation.with_strength(strength) if self.perturbation else None
        return HamiltonianModel(self.basis, self.energies, self.V, strength, pert, self.diagonal_shift)

    def index(self, qn: QuantumNumbers) -> int:
        if self.basis is None:
            raise ValidationError("toy models are indexed by integer position only")
        return self.basis.index(qn)


def toy_model(energies, V, strength: float = 0.0) -> HamiltonianModel:
    """A model from explicit energies and a Hermitian matrix, with no spatial basis."""
    energies = np.asarray(energies, dtype=float)
    V = np.asarray(V, dtype=complex)
    if V.shape != (len(energies), len(energies)):
        raise ValidationError("V must be square and match the number of energies")
    if not np.allclose(V, V.conj().T, atol=1e-12):
        raise ValidationError("V must be Hermitian")
    return HamiltonianModel(None, energies, V, strength)


def check_resolution(grid: TransverseGrid, length_scale: float) -> None:
    if length_scale < MIN_POINTS_PER_SCALE * grid.spacing * (1 - 1e-12):
        raise GridTooCoarse(
            f"grid spacing {grid.spacing:.4g} puts fewer than {MIN_POINTS_PER_SCALE} points "
            f"across the perturbation scale {length_scale:.4g}"
        )


def assemble(
    p: ParticleParams,
    perturbation: PerturbationField,
    truncation: BasisTruncation,
    grid: TransverseGrid,
    zero_diagonal_for: QuantumNumbers | int | None = None,
) -> HamiltonianModel:
    """Build the truncated perturbed Dirac Hamiltonian.

    ``zero_diagonal_for`` shifts V by a multiple of the identity so the named
    state has a vanishing diagonal element; this only rephases the fidelity.
    """
    check_resolution(grid, perturbation.profile.length_scale)
    basis = SampledBasis.build(p, truncation, grid)
    components = perturbation.components(grid)
    V = perturbation_matrix(basis, components)
    V = 0.5 * (V + V.conj().T)
    shift = 0.0
    if zero_diagonal_for is not None:
        i0 = zero_diagonal_for if isinstance(zero_diagonal_for, (int, np.integer)) else basis.index(zero_diagonal_for)
        shift = float(V[i0, i0].real)
        V = V - shift * np.eye(basis.dim)
    return HamiltonianModel(basis, basis.energies.copy(), V, perturbation.strength, perturbation, shift)


def _check_normalized(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    norm = np.linalg.norm(state)
    if abs(norm - 1.0) > 1e-8:
        raise ValidationError(f"state must be normalized, |psi| = {norm!r}")
    return state


def evolve(model: HamiltonianModel, state: np.ndarray, t: float, perturbed: bool = True) -> np.ndarray:
    """Apply exp(-i H t) with H perturbed or unperturbed."""
    state = _check_normalized(state)
    if t == 0:
        return state.copy()
    if not perturbed:
        return np.exp(-1j * model.energies * t) * state
    Q = model.eigvecs
    return Q @ (np.exp(-1j * model.eigvals * t) * (Q.conj().T @ state))


def propagator(model: HamiltonianModel, t: float, perturbed: bool = True) -> np.ndarray:
    if not perturbed:
        return np.diag(np.exp(-1j * model.energies * t))
    Q = model.eigvecs
    return (Q * np.exp(-1j * model.eigvals * t)) @ Q.conj().T


@dataclass(frozen=True, eq=False)
class EchoOperator:
    matrix: np.ndarray
    t: float

    def expectation(self, state: np.ndarray) -> complex:
        return complex(np.vdot(state, self.matrix @ state))

    def unitarity_error(self) -> float:
        M = self.matrix
        return float(np.abs(M.conj().T @ M - np.eye(len(M))).max())


def echo_operator(model: HamiltonianModel, t: float) -> EchoOperator:
    """M_t = U_t(eps)^dagger U_t."""
    Q = model.eigvecs
    back = (Q * np.exp(1j * model.eigvals * t)) @ Q.conj().T
    return EchoOperator(back * np.exp(-1j * model.energies * t)[None, :], t)


@dataclass(frozen=True, eq=False)
class EchoKernel:
    """Position kernel of the primed echo operator gamma^0 M_t.

    ``primed`` has shape (4, N, N, 4, N, N); contracting it with psi-bar on
    the left and psi on the right under grid quadrature gives <psi|M_t|psi>.
    """

    primed: np.ndarray
    grid: TransverseGrid
    kz: float
    t: float

    def contract(self, left: SpinorField, right: SpinorField) -> complex:
        for f in (left, right):
            if f.grid != self.grid or f.kz != self.kz:
                raise GridMismatch("spinor does not live on the kernel grid")
        bar = np.einsum("ab,bxy->axy", GAMMA0, left.data.conj())
        size = 4 * self.grid.points**2
        K = self.primed.reshape(size, size)
        return complex(bar.reshape(-1) @ K @ right.data.reshape(-1) * self.grid.cell_area**2)


def echo_kernel(
    model: HamiltonianModel,
    t: float,
    grid: TransverseGrid | None = None,
    memory_ceiling: int = DEFAULT_KERNEL_BYTES,
) -> EchoKernel:
    grid = grid or model.basis.grid
    size = 4 * grid.points**2
    need = 16 * (size * size + size * model.dim)
    if need > memory_ceiling:
        raise MemoryCeiling(f"echo kernel needs {need / 2**20:.1f} MiB, ceiling is {memory_ceiling / 2**20:.1f} MiB")
    basis = model.basis if grid == model.basis.grid else model.basis.on_grid(grid)
    M = echo_operator(model, t).matrix
    # columns are the sampled basis spinors
    psi = np.stack([basis.spinor(i).data.reshape(-1) for i in range(model.dim)], axis=1)
    K = psi @ M @ psi.conj().T
    K = np.einsum("ab,bxyc->axyc", GAMMA0, K.reshape(4, grid.points, grid.points, size))
    return EchoKernel(K.reshape(4, grid.points, grid.points, 4, grid.points, grid.points), grid, basis.kz, t)
