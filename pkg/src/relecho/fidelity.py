"""Fidelity amplitude by overlap, current integration and linear response.

Sign convention: states evolve with exp(-i H t) and the amplitude is
f(t) = <psi_eps(t) | psi(t)> = integral of psi_eps^dagger psi.  The bilinear
j_mu = psi_eps-bar gamma_mu psi then obeys d^mu j_mu = i eps A^mu j_mu, and
to first order df/dt = +i eps <V_I(t)> f(t).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dirac import HamiltonianModel, check_resolution
from .errors import BoundaryFluxTooLarge, GridMismatch, ValidationError
from .fields import PerturbationField
from .grid import ALPHA, COUPLING, SpinorField, TransverseGrid, apply_matrix_field, derivative
from .landau import SampledBasis

METHODS = ("overlap", "current", "ode", "perturbative")
BOUNDARY_FLUX_LIMIT = 1e-8


@dataclass(eq=False)
class FidelitySeries:
    times: np.ndarray
    f: np.ndarray
    method: str
    F: np.ndarray | None = None
    dF_dt: np.ndarray | None = None
    boundary_flux: np.ndarray | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown fidelity method {self.method!r}")
        self.times = np.asarray(self.times, dtype=float)
        self.f = np.asarray(self.f, dtype=complex)
        if self.times.shape != self.f.shape:
            raise ValidationError("times and amplitudes differ in length")
        # the perturbative law carries its own F; every other route uses |f|^2
        self.F = np.abs(self.f) ** 2 if self.F is None else np.asarray(self.F, dtype=float)


def _normalized(model: HamiltonianModel, psi0) -> np.ndarray:
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (model.dim,):
        raise ValidationError(f"initial state has shape {psi0.shape}, basis dimension is {model.dim}")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-8:
        raise ValidationError("initial state must be normalized")
    return psi0


def evolved_pair(model: HamiltonianModel, psi0, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients (psi_eps(t), psi(t)) from a shared initial state."""
    Q = model.eigvecs
    a = Q.conj().T @ psi0
    c_eps = Q @ (np.exp(-1j * model.eigvals * t) * a)
    c = np.exp(-1j * model.energies * t) * psi0
    return c_eps, c


def fidelity_overlap(model: HamiltonianModel, psi0, times) -> FidelitySeries:
    psi0 = _normalized(model, psi0)
    times = np.asarray(times, dtype=float)
    Q = model.eigvecs
    a = Q.conj().T @ psi0
    # f(t) = sum_k conj(a_k) e^{i w_k t} (Q^dagger e^{-i E t} psi0)_k
    free = np.exp(-1j * np.outer(times, model.energies)) * psi0
    proj = free @ Q.conj()
    f = np.sum(np.exp(1j * np.outer(times, model.eigvals)) * a.conj() * proj, axis=1)
    f[times == 0] = 1.0
    return FidelitySeries(times, f, "overlap")


@dataclass(frozen=True, eq=False)
class CurrentField:
    """j_mu (lower index) on the grid, shape (4, N, N)."""

    j: np.ndarray
    grid: TransverseGrid

    @property
    def density(self) -> np.ndarray:
        return self.j[0]

    def integral(self, mu: int = 0) -> complex:
        return complex(self.j[mu].sum() * self.grid.cell_area)


def current(psi_eps: SpinorField, psi: SpinorField) -> CurrentField:
    """j_mu = psi_eps-bar gamma_mu psi; j_0 = psi_eps^dagger psi, j_k = -psi_eps^dagger alpha_k psi."""
    if psi_eps.grid != psi.grid or psi_eps.kz != psi.kz:
        raise GridMismatch("current needs both spinors on one grid with one kz")
    left = psi_eps.data.conj()
    j = np.empty((4,) + psi.data.shape[1:], dtype=complex)
    j[0] = np.sum(left * psi.data, axis=0)
    for k in range(3):
        j[k + 1] = -np.sum(left * apply_matrix_field(ALPHA[k], psi.data), axis=0)
    return CurrentField(j, psi.grid)


def fidelity_current(
    model: HamiltonianModel,
    psi0,
    times,
    grid: TransverseGrid | None = None,
) -> FidelitySeries:
    """Integrate j_0 of position-space states rebuilt at each time."""
    psi0 = _normalized(model, psi0)
    basis = model.basis if grid is None or grid == model.basis.grid else model.basis.on_grid(grid)
    times = np.asarray(times, dtype=float)
    f = np.empty(len(times), dtype=complex)
    for k, t in enumerate(times):
        c_eps, c = evolved_pair(model, psi0, t)
        f[k] = current(basis.field(c_eps), basis.field(c)).integral(0)
    return FidelitySeries(times, f, "current")


def potential_apply(components: np.ndarray, data: np.ndarray) -> np.ndarray:
    """Pointwise gamma^0 gamma^mu A_mu acting on a (4, N, N) spinor array."""
    out = np.zeros_like(data)
    for mu in range(4):
        if np.any(components[mu]):
            out += components[mu] * apply_matrix_field(COUPLING[mu], data)
    return out


@dataclass(frozen=True, eq=False)
class StateDerivatives:
    psi_eps: SpinorField
    psi: SpinorField
    dpsi_eps: SpinorField
    dpsi: SpinorField


def state_derivatives(
    model: HamiltonianModel,
    psi0,
    t: float,
    grid: TransverseGrid | None = None,
) -> StateDerivatives:
    """Evolved states and their exact time derivatives on a grid.

    The free part uses the basis energies (-i E_j on each coefficient); the
    perturbation acts pointwise, so the pair satisfies the continuum Dirac
    equations and only spatial stencils carry discretization error.
    """
    psi0 = _normalized(model, psi0)
    basis = model.basis if grid is None or grid == model.basis.grid else model.basis.on_grid(grid)
    c_eps, c = evolved_pair(model, psi0, t)
    E = model.energies
    psi_eps = basis.field(c_eps)
    psi = basis.field(c)
    dpsi = basis.field(-1j * E * c)
    free_eps = basis.field(-1j * E * c_eps)
    eps = model.strength
    if eps and model.perturbation is not None:
        comps = model.perturbation.components(basis.grid)
        pot = potential_apply(comps, psi_eps.data) - model.diagonal_shift * psi_eps.data
        free_eps = SpinorField(free_eps.data - 1j * eps * pot, psi_eps.kz, basis.grid)
    return StateDerivatives(psi_eps, psi, free_eps, dpsi)


def continuity_residual(
    psi_eps: SpinorField,
    psi: SpinorField,
    dpsi_eps: SpinorField,
    dpsi: SpinorField,
    perturbation: PerturbationField | None,
    order: int = 4,
    diagonal_shift: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of d^mu j_mu = i eps A^mu j_mu on the grid.

    Returns (lhs, rhs) with lhs = d_t j_0 + div(psi_eps^dagger alpha psi) by
    central stencils of the given order.  A WLOG diagonal shift of the model
    enters as a constant added to A^0.
    """
    grid = psi.grid
    if perturbation is not None and perturbation.strength:
        check_resolution(grid, perturbation.profile.length_scale)
    j = current(psi_eps, psi).j
    h = grid.spacing
    dj0 = np.sum(dpsi_eps.data.conj() * psi.data + psi_eps.data.conj() * dpsi.data, axis=0)
    div = -(derivative(j[1], h, axis=0, order=order) + derivative(j[2], h, axis=1, order=order))
    lhs = dj0 + div
    if perturbation is None or not perturbation.strength:
        return lhs, np.zeros_like(lhs)
    A = perturbation.components(grid).astype(complex)
    A[0] = A[0] - diagonal_shift
    # A^mu j_mu with upper-index A and lower-index j
    rhs = 1j * perturbation.strength * np.einsum("mxy,mxy->xy", A, j)
    return lhs, rhs


def continuity_residual_norm(model: HamiltonianModel, psi0, t: float, grid: TransverseGrid, order: int = 4) -> float:
    """L2 norm (grid quadrature) of lhs - rhs at time t."""
    d = state_derivatives(model, psi0, t, grid)
    lhs, rhs = continuity_residual(
        d.psi_eps, d.psi, d.dpsi_eps, d.dpsi, model.perturbation if model.strength else None,
        order=order, diagonal_shift=model.diagonal_shift,
    )
    return float(np.sqrt(np.sum(np.abs(lhs - rhs) ** 2) * grid.cell_area))


def boundary_flux(psi_eps: SpinorField, psi: SpinorField) -> complex:
    """Surface term: sum over the grid boundary of psi_eps^dagger (n . alpha) psi ds."""
    h = psi.grid.spacing
    a = psi_eps.data.conj()
    b = psi.data

    def flux(k, idx):
        return np.sum(a[(slice(None),) + idx] * apply_matrix_field(ALPHA[k], b)[(slice(None),) + idx])

    total = (
        flux(0, (-1, slice(None))) - flux(0, (0, slice(None)))
        + flux(1, (slice(None), -1)) - flux(1, (slice(None), 0))
    )
    return complex(total * h)


def interaction_average(model: HamiltonianModel, psi0, times) -> np.ndarray:
    """<psi0| U0^dagger(t) V U0(t) |psi0> for the (unscaled) perturbation matrix."""
    psi0 = np.asarray(psi0, dtype=complex)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    c = np.exp(-1j * np.outer(times, model.energies)) * psi0
    return np.einsum("ti,ij,tj->t", c.conj(), model.V, c)


def _level_amplitudes(model: HamiltonianModel, psi0) -> tuple[np.ndarray, np.ndarray]:
    """Collapse <V_I(t)> onto distinct unperturbed levels: sum_ab A_ab e^{i (E_a - E_b) t}."""
    E = model.energies
    order = np.argsort(E, kind="stable")
    levels = [E[order[0]]]
    label = np.empty(len(E), dtype=int)
    for i in order:
        if abs(E[i] - levels[-1]) > 1e-12 * max(abs(levels[-1]), 1.0):
            levels.append(E[i])
        label[i] = len(levels) - 1
    P = np.zeros((len(levels), len(E)))
    P[label, np.arange(len(E))] = 1.0
    weighted = model.V * np.outer(psi0.conj(), psi0)
    return np.array(levels), P @ weighted @ P.T


def _edge_fields(basis: SampledBasis, vec: np.ndarray) -> list[np.ndarray]:
    orb = np.einsum("cio,i->co", basis.coeffs, vec)
    t = basis.table
    edges = (t[:, -1, :], t[:, 0, :], t[:, :, -1], t[:, :, 0])
    return [orb @ e for e in edges]


def _coefficient_flux(basis: SampledBasis, c_eps: np.ndarray, c: np.ndarray) -> complex:
    a = _edge_fields(basis, c_eps)
    b = _edge_fields(basis, c)
    normals = ((0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0))
    total = sum(sign * np.sum(a[e].conj() * (ALPHA[k] @ b[e])) for e, (k, sign) in enumerate(normals))
    return complex(total * basis.grid.spacing)


def fidelity_ode(
    model: HamiltonianModel,
    psi0,
    times,
    grid: TransverseGrid | None = None,
    max_phase_step: float = 0.05,
    flux_limit: float = BOUNDARY_FLUX_LIMIT,
) -> FidelitySeries:
    """Integrate df/dt = i eps <V_I(t)> f, f(0) = 1, with fixed-step RK4.

    The step keeps every Bohr frequency below ``max_phase_step`` radians per
    step.  The boundary flux of the exactly evolved pair is monitored at each
    output time; bound scenarios keep it below ``flux_limit``.
    """
    psi0 = _normalized(model, psi0)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or (len(times) and times[0] < 0):
        raise ValidationError("ODE output times must be nonnegative and increasing")
    eps = model.strength
    levels, amp = _level_amplitudes(model, psi0)
    active = np.abs(amp) > 0
    gaps = np.abs(levels[:, None] - levels[None, :])[active]
    rate = max(gaps.max(initial=0.0), 1e-3)

    def rhs(t, f):
        ph = np.exp(1j * levels * t)
        return 1j * eps * (ph @ amp @ ph.conj()) * f

    f_out = np.empty(len(times), dtype=complex)
    f, t_now = 1.0 + 0j, 0.0
    for k, t_next in enumerate(times):
        span = t_next - t_now
        if span > 0:
            steps = int(np.ceil(span * rate / max_phase_step))
            h = span / steps
            for s in range(steps):
                t0 = t_now + s * h
                k1 = rhs(t0, f)
                k2 = rhs(t0 + h / 2, f + h / 2 * k1)
                k3 = rhs(t0 + h / 2, f + h / 2 * k2)
                k4 = rhs(t0 + h, f + h * k3)
                f = f + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t_now = t_next
        f_out[k] = f
    dfdt = np.array([rhs(t, fk) for t, fk in zip(times, f_out)])
    dF = 2.0 * np.real(f_out.conj() * dfdt)

    basis = model.basis if grid is None or grid == model.basis.grid else model.basis.on_grid(grid)
    flux = np.array([abs(_coefficient_flux(basis, *evolved_pair(model, psi0, t))) for t in times])
    if flux.max(initial=0.0) > flux_limit:
        raise BoundaryFluxTooLarge(
            f"boundary flux reached {flux.max():.3e} (limit {flux_limit:.1e}); the scenario is not bound"
        )
    return FidelitySeries(times, f_out, "ode", dF_dt=dF, boundary_flux=flux)


def finite_difference_rate(model: HamiltonianModel, psi0, times, dt: float = 1e-4) -> np.ndarray:
    """Central-difference df/dt of the exact overlap amplitude."""
    times = np.asarray(times, dtype=float)
    plus = fidelity_overlap(model, psi0, times + dt).f
    minus = fidelity_overlap(model, psi0, times - dt).f
    return (plus - minus) / (2 * dt)


def fidelity_ensemble(model: HamiltonianModel, states, weights, times) -> FidelitySeries:
    """Incoherent beam: f = sum_n w_n f_n and F = sum_n w_n |f_n|^2 over basis states n."""
    weights = np.asarray(weights, dtype=float)
    if len(states) != len(weights):
        raise ValidationError("one weight per beam state is required")
    times = np.asarray(times, dtype=float)
    f = np.zeros(len(times), dtype=complex)
    F = np.zeros(len(times))
    for i, w in zip(states, weights):
        psi0 = np.zeros(model.dim, dtype=complex)
        psi0[model.index(i) if not isinstance(i, (int, np.integer)) else i] = 1.0
        s = fidelity_overlap(model, psi0, times)
        f += w * s.f
        F += w * s.F
    return FidelitySeries(times, f, "overlap", F=F)
