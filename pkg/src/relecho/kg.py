"""Klein-Gordon fidelity on a periodic 1+1-dimensional grid.

The field obeys [D_0^2 - d_x^2 + m^2] phi = 0 with D_0 = d_t + i eps A^0(x) for a
static scalar potential.  Its first-order reduction in (phi, pi = d_t phi) is

    d/dt (phi, pi) = G (phi, pi),  G = [[0, 1], [d_x^2 - m^2 + eps^2 A^2, -2 i eps A]],

which is not Hermitian; conservation is stated for the indefinite form
``kg_inner`` instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np
import scipy.linalg

from .errors import GridMismatch, GridTooSmall, MemoryCeiling, StabilityViolation, ValidationError

Potential = Union[np.ndarray, Callable[[np.ndarray], np.ndarray], float, None]

DEFAULT_KERNEL_BYTES = 64 * 2**20


@dataclass(frozen=True)
class KGGrid:
    """Periodic nodes x_j = -length/2 + j h, h = length / points."""

    length: float
    points: int

    def __post_init__(self):
        if not self.length > 0:
            raise ValidationError("kg.length must be > 0")
        if self.points < 8 or self.points % 2:
            raise GridTooSmall("kg.points must be even and >= 8")

    @property
    def spacing(self) -> float:
        return self.length / self.points

    @cached_property
    def x(self) -> np.ndarray:
        return -0.5 * self.length + self.spacing * np.arange(self.points)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)

    @cached_property
    def laplacian(self) -> np.ndarray:
        """Spectral second-derivative matrix (real symmetric)."""
        eye = np.eye(self.points)
        return np.real(np.fft.ifft(-(self.wavenumbers**2)[:, None] * np.fft.fft(eye, axis=0), axis=0))

    def frequency_operator(self, mass: float) -> np.ndarray:
        """omega = sqrt(m^2 - d_x^2) as a dense matrix."""
        w = np.sqrt(mass**2 + self.wavenumbers**2)
        eye = np.eye(self.points)
        return np.fft.ifft(w[:, None] * np.fft.fft(eye, axis=0), axis=0)

    def sample(self, potential: Potential) -> np.ndarray:
        if potential is None:
            return np.zeros(self.points)
        if callable(potential):
            values = np.asarray(potential(self.x), dtype=float)
        else:
            values = np.broadcast_to(np.asarray(potential, dtype=float), (self.points,)).copy()
        if values.shape != (self.points,):
            raise GridMismatch(f"potential has shape {values.shape}, expected ({self.points},)")
        if not np.all(np.isfinite(values)):
            raise ValidationError("potential must be finite")
        return values


@dataclass(frozen=True, eq=False)
class KGState:
    phi: np.ndarray
    pi: np.ndarray
    grid: KGGrid

    def __post_init__(self):
        for name in ("phi", "pi"):
            a = np.asarray(getattr(self, name), dtype=complex)
            if a.shape != (self.grid.points,):
                raise GridMismatch(f"{name} has shape {a.shape}, expected ({self.grid.points},)")
            object.__setattr__(self, name, a)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.phi, self.pi])

    @classmethod
    def from_vector(cls, vec: np.ndarray, grid: KGGrid) -> "KGState":
        return cls(vec[: grid.points], vec[grid.points :], grid)

    def norm(self) -> float:
        return kg_inner(self, self).real


def kg_inner(s1: KGState, s2: KGState) -> complex:
    """i h sum_x [phi1* pi2 - pi1* phi2]; indefinite and sesquilinear."""
    if s1.grid != s2.grid:
        raise GridMismatch("states live on different grids")
    h = s1.grid.spacing
    return complex(1j * h * (np.vdot(s1.phi, s2.pi) - np.vdot(s1.pi, s2.phi)))


def plane_wave(grid: KGGrid, mass: float, mode: int, sign: int = 1) -> KGState:
    """Unit-norm plane wave with wavenumber 2 pi mode / length; sign=-1 gives the negative-frequency partner."""
    k = 2 * np.pi * mode / grid.length
    w = math.hypot(k, mass)
    phi = np.exp(1j * k * grid.x) / math.sqrt(2 * w * grid.length)
    return KGState(phi, -1j * sign * w * phi, grid)


def positive_frequency_state(grid: KGGrid, mass: float, phi: np.ndarray) -> KGState:
    """Positive-frequency data pi = -i omega phi, rescaled to unit KG norm."""
    if not mass > 0:
        raise ValidationError("particle.mass must be > 0")
    phi = np.asarray(phi, dtype=complex)
    pi = -1j * (grid.frequency_operator(mass) @ phi)
    state = KGState(phi, pi, grid)
    n = state.norm()
    if not n > 0:
        raise ValidationError("initial field has zero KG norm")
    return KGState(phi / math.sqrt(n), pi / math.sqrt(n), grid)


def generator(grid: KGGrid, mass: float, strength: float, potential: Potential = None) -> np.ndarray:
    N = grid.points
    A = grid.sample(potential)
    G = np.zeros((2 * N, 2 * N), dtype=complex)
    G[:N, N:] = np.eye(N)
    G[N:, :N] = grid.laplacian - (mass**2) * np.eye(N) + np.diag((strength * A) ** 2)
    G[N:, N:] = np.diag(-2j * strength * A)
    return G


@dataclass(eq=False)
class KGPropagatorMatrix:
    """exp(G t) for the reduced system; maps (phi, pi) at 0 to time t."""

    grid: KGGrid
    mass: float
    strength: float
    potential: np.ndarray
    growth_tol: float = 1e-8

    def __post_init__(self):
        if not self.mass > 0:
            raise ValidationError("particle.mass must be > 0")
        self.potential = self.grid.sample(self.potential)
        self.G = generator(self.grid, self.mass, self.strength, self.potential)
        rates = np.linalg.eigvals(self.G).real
        scale = max(np.abs(self.G).max(), 1.0)
        if rates.max() > self.growth_tol * scale:
            raise StabilityViolation(
                f"the perturbed generator has growing modes (max rate {rates.max():.3e}); "
                "the potential is supercritical for this mass and strength"
            )

    def at(self, t: float) -> np.ndarray:
        if t == 0:
            return np.eye(2 * self.grid.points, dtype=complex)
        return scipy.linalg.expm(self.G * t)

    def form_error(self, t: float) -> float:
        """max |P^dagger J P - J| for the conserved form of the perturbed system.

        The charge uses the covariant momentum pi + i eps A phi, which adds
        -2 eps h diag(A) to the phi-phi block of the free form.
        """
        N = self.grid.points
        h = self.grid.spacing
        J = np.zeros((2 * N, 2 * N), dtype=complex)
        J[:N, N:] = 1j * h * np.eye(N)
        J[N:, :N] = -1j * h * np.eye(N)
        J[:N, :N] = np.diag(-2.0 * self.strength * h * self.potential)
        P = self.at(t)
        return float(np.abs(P.conj().T @ J @ P - J).max())


def kg_evolve(state: KGState, t: float, mass: float, strength: float = 0.0, potential: Potential = None) -> KGState:
    prop = KGPropagatorMatrix(state.grid, mass, strength, potential)
    return KGState.from_vector(prop.at(t) @ state.vector, state.grid)


@dataclass(frozen=True)
class KGSeries:
    times: np.ndarray
    f: np.ndarray
    method: str

    @property
    def F(self) -> np.ndarray:
        return np.abs(self.f) ** 2


def kg_fidelity(
    state: KGState,
    times,
    mass: float,
    strength: float,
    potential: Potential = None,
) -> KGSeries:
    """f(t) = kg_inner(phi_eps(t), phi(t)) from two direct evolutions."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    pert = KGPropagatorMatrix(state.grid, mass, strength, potential)
    free = KGPropagatorMatrix(state.grid, mass, 0.0, None)
    v = state.vector
    f = np.empty(len(times), dtype=complex)
    for n, t in enumerate(times):
        a = KGState.from_vector(pert.at(t) @ v, state.grid)
        b = KGState.from_vector(free.at(t) @ v, state.grid)
        f[n] = kg_inner(a, b)
    return KGSeries(times, f, "kg_direct")


@dataclass(frozen=True, eq=False)
class KGEchoKernel:
    """Kernel M(x, x') with f(t) = h^2 sum phi0*(x) M(x, x') phi0(x').

    Built for positive-frequency initial data: the field propagator acting on
    phi0 is Delta = P_phiphi - i P_phipi omega, and its time derivative is the
    pi block of the same propagator.
    """

    matrix: np.ndarray
    grid: KGGrid
    t: float

    def contract(self, phi0: np.ndarray) -> complex:
        phi0 = np.asarray(phi0, dtype=complex)
        if phi0.shape != (self.grid.points,):
            raise GridMismatch("initial field does not match the kernel grid")
        return complex(self.grid.spacing**2 * np.vdot(phi0, self.matrix @ phi0))


def _field_propagators(prop: KGPropagatorMatrix, t: float, omega: np.ndarray):
    N = prop.grid.points
    P = prop.at(t)
    delta = P[:N, :N] - 1j * P[:N, N:] @ omega
    d_delta = P[N:, :N] - 1j * P[N:, N:] @ omega
    return delta, d_delta


def kg_echo_kernel(
    t: float,
    mass: float,
    strength: float,
    potential: Potential,
    grid: KGGrid,
    memory_ceiling: int = DEFAULT_KERNEL_BYTES,
    propagators: tuple[KGPropagatorMatrix, KGPropagatorMatrix] | None = None,
) -> KGEchoKernel:
    """M = i h sum_x'' [Delta_eps* d_t Delta - d_t Delta_eps* Delta] in kernel normalization.

    ``propagators`` may supply prebuilt (perturbed, free) matrices for the
    same grid and parameters to avoid repeating the stability analysis.
    """
    N = grid.points
    need = 16 * N * N * 10
    if need > memory_ceiling:
        raise MemoryCeiling(f"KG kernel needs {need / 2**20:.1f} MiB, ceiling is {memory_ceiling / 2**20:.1f} MiB")
    omega = grid.frequency_operator(mass)
    if propagators is None:
        propagators = (KGPropagatorMatrix(grid, mass, strength, potential), KGPropagatorMatrix(grid, mass, 0.0, None))
    pert, free = propagators
    if pert.grid != grid or free.grid != grid:
        raise GridMismatch("propagators were built on a different grid")
    de, dde = _field_propagators(pert, t, omega)
    d0, dd0 = _field_propagators(free, t, omega)
    # kernels are matrices / h; the x'' quadrature adds a factor h
    M = 1j / grid.spacing * (de.conj().T @ dd0 - dde.conj().T @ d0)
    return KGEchoKernel(M, grid, t)


@dataclass(frozen=True)
class BoostedModeCheck:
    times: np.ndarray
    lab: np.ndarray
    rest: np.ndarray

    @property
    def max_error(self) -> float:
        return float(np.abs(self.lab - self.rest).max())


def boosted_mode_check(mass: float, velocity: float, strength: float, amplitude: float, times) -> BoostedModeCheck:
    """Time-argument scaling of the fidelity for free modes under a boost.

    In the rest frame a particle at rest feels a constant A^0 = amplitude, so
    the perturbed and free modes have frequencies m + eps a and m.  Both are
    boosted to the lab (velocity v along x) and the transition density
    j^0 = (w + w_eps) phi_eps* phi is evaluated on the worldline x = v t.
    Dividing by gamma must reproduce the rest-frame series at t / gamma.
    """
    if not abs(velocity) < 1:
        raise ValidationError("boost velocity must satisfy |v| < 1")
    times = np.asarray(times, dtype=float)
    gamma = 1.0 / math.sqrt(1.0 - velocity**2)
    w0, we = mass, mass + strength * amplitude

    def rest(tp):
        return (w0 + we) / (2 * mass) * np.exp(1j * (we - w0) * tp)

    def lab_mode(w, t, x):
        # phi'(t', x') = exp(-i w t') / sqrt(2m) with t' = gamma (t - v x)
        return np.exp(-1j * gamma * w * (t - velocity * x)) / math.sqrt(2 * mass), gamma * w

    x = velocity * times
    pe, we_lab = lab_mode(we, times, x)
    p0, w0_lab = lab_mode(w0, times, x)
    j0 = (w0_lab + we_lab) * pe.conj() * p0
    return BoostedModeCheck(times, j0 / gamma, rest(times / gamma))
