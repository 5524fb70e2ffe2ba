"""Second-order fidelity decay: correlation sums, the degenerate coefficient C,
beam ensembles and the Lorentz-boost suppression of the quadratic law."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dirac import HamiltonianModel
from .errors import FitFailure, ValidationError, WeightSumViolation
from .fidelity import FidelitySeries
from .landau import QuantumNumbers

DEFAULT_DEGENERACY_TOL = 1e-9
FIT_WINDOW = (1e-4, 1e-2)


def _index(model: HamiltonianModel, i) -> int:
    return model.index(i) if isinstance(i, QuantumNumbers) else int(i)


def _degenerate_mask(energies: np.ndarray, i: int, tol: float) -> np.ndarray:
    return np.abs(energies - energies[i]) <= tol * abs(energies[i])


def _shifted_row(model: HamiltonianModel, i: int, remove_diagonal: bool) -> np.ndarray:
    row = model.V[i].copy()
    if remove_diagonal:
        row[i] = 0.0
    elif abs(row[i]) > 1e-12 * max(np.abs(row).max(), 1.0):
        raise ValidationError(
            "the diagonal element <i|V|i> must vanish (assemble with zero_diagonal_for, or pass remove_diagonal=True)"
        )
    return row


def correlation_integral(
    model: HamiltonianModel,
    i,
    t: float,
    tol: float = DEFAULT_DEGENERACY_TOL,
    remove_diagonal: bool = True,
) -> float:
    """Closed form of the double time integral of <i|V_I(t') V_I(t'')|i> over [0, t]^2.

    Returns 4 sum_j |V_ij|^2 sin^2((E_i - E_j) t / 2) / (E_j - E_i)^2, using the
    limit t^2 / 4 of the kernel for partners within the degeneracy tolerance.
    Removing the diagonal is the constant shift of A^0 that leaves F unchanged.
    """
    i = _index(model, i)
    row = _shifted_row(model, i, remove_diagonal)
    gap = model.energies - model.energies[i]
    deg = _degenerate_mask(model.energies, i, tol)
    kernel = np.empty_like(gap)
    kernel[deg] = t * t / 4.0
    g = gap[~deg]
    kernel[~deg] = np.sin(g * t / 2.0) ** 2 / g**2
    return float(4.0 * np.sum(np.abs(row) ** 2 * kernel))


def correlation_quadrature(
    model: HamiltonianModel,
    i,
    t: float,
    nodes: int | None = None,
    remove_diagonal: bool = True,
) -> float:
    """Brute-force Gauss-Legendre double quadrature of <i|V_I(t') V_I(t'')|i>.

    Builds V_I(t) = exp(i H0 t) V exp(-i H0 t) at every node and multiplies the
    matrices; independent of the closed-form sum.
    """
    i = _index(model, i)
    V = model.V.copy()
    if remove_diagonal:
        V[i, i] = 0.0
    E = model.energies
    if t == 0:
        return 0.0
    if nodes is None:
        nodes = int(0.6 * np.ptp(E) * t) + 48
    x, w = np.polynomial.legendre.leggauss(nodes)
    ts = 0.5 * t * (x + 1.0)
    w = 0.5 * t * w
    U = np.exp(1j * np.outer(ts, E))
    # V_I(t)[a, b] = e^{i E_a t} V_ab e^{-i E_b t}
    V_I = U[:, :, None] * V[None, :, :] * U.conj()[:, None, :]
    rows = V_I[:, i, :]
    cols = V_I[:, :, i]
    pair = rows @ cols.T
    return float(np.real(w @ pair @ w))


@dataclass(frozen=True, eq=False)
class CorrelationCoefficient:
    value: float
    state: QuantumNumbers
    partners: list[QuantumNumbers]
    contributions: np.ndarray

    def __post_init__(self):
        if self.value < 0:
            raise ValidationError("C must be nonnegative")


def c_coefficient(model: HamiltonianModel, i, tol: float = DEFAULT_DEGENERACY_TOL) -> CorrelationCoefficient:
    """C = sum over degenerate partners j != i of |V_ij|^2.

    An empty partner set is valid and gives C = 0 (no quadratic term from degeneracy).
    """
    i = _index(model, i)
    deg = _degenerate_mask(model.energies, i, tol)
    deg[i] = False
    idx = np.flatnonzero(deg)
    contrib = np.abs(model.V[i, idx]) ** 2
    return CorrelationCoefficient(
        float(contrib.sum()), model.labels[i], [model.labels[j] for j in idx], contrib
    )


def oscillatory_bound(model: HamiltonianModel, i, tol: float = DEFAULT_DEGENERACY_TOL) -> float:
    """Upper bound 4 sum_j |V_ij|^2 / (E_i - E_j)^2 on the nondegenerate part of the sum."""
    i = _index(model, i)
    deg = _degenerate_mask(model.energies, i, tol)
    g = (model.energies - model.energies[i])[~deg]
    return float(4.0 * np.sum(np.abs(model.V[i, ~deg]) ** 2 / g**2))


def crossover_time(model: HamiltonianModel, i, tol: float = DEFAULT_DEGENERACY_TOL) -> float:
    """Time after which C t^2 exceeds the oscillatory bound (inf if C = 0)."""
    C = c_coefficient(model, i, tol).value
    if C == 0:
        return math.inf
    return math.sqrt(oscillatory_bound(model, i, tol) / C)


@dataclass(frozen=True)
class BeamEnsemble:
    states: tuple[QuantumNumbers, ...]
    weights: tuple[float, ...]
    energy_tol: float = DEFAULT_DEGENERACY_TOL

    def __post_init__(self):
        if len(self.states) != len(self.weights) or not self.states:
            raise ValidationError("beam needs one weight per state and at least one state")
        if any(w < 0 for w in self.weights):
            raise WeightSumViolation("beam weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise WeightSumViolation(f"beam weights sum to {sum(self.weights)!r}, expected 1")

    def check_energies(self, model: HamiltonianModel) -> None:
        E = np.array([model.energies[model.index(q)] for q in self.states])
        if np.ptp(E) > self.energy_tol * abs(E[0]):
            raise ValidationError("beam states do not share one energy within tolerance")


def beam_c(ensemble: BeamEnsemble, model: HamiltonianModel) -> float:
    ensemble.check_energies(model)
    return float(sum(w * c_coefficient(model, q, ensemble.energy_tol).value for q, w in zip(ensemble.states, ensemble.weights)))


def boost_velocity(k: float, m: float) -> float:
    """v(k) = k / sqrt(k^2 + m^2)."""
    if not m > 0:
        raise ValidationError("mass must be > 0")
    return k / math.hypot(k, m)


def predicted_series(C: float, eps: float, k: float, m: float, times) -> FidelitySeries:
    """Quadratic decay law with the (1 - v^2) boost suppression."""
    if C < 0:
        raise ValidationError("C must be nonnegative")
    v = boost_velocity(k, m)
    times = np.asarray(times, dtype=float)
    rate = eps * eps * C * (1.0 - v * v)
    f = 1.0 - rate * times**2 / 2.0
    F = 1.0 - rate * times**2
    return FidelitySeries(times, f.astype(complex), "perturbative", F=F)


@dataclass(frozen=True)
class DecayFit:
    """1 - F(t) = coefficient t^2 + quartic t^4 on the fit window."""

    coefficient: float
    quartic: float
    residual_rms: float
    points: int
    t_min: float
    t_max: float


def fit_decay(series: FidelitySeries, window: tuple[float, float] = FIT_WINDOW, min_points: int = 8) -> DecayFit:
    """Least-squares fit of the short-time law on samples with window[0] <= 1 - F <= window[1].

    The t^4 term absorbs the next order of the expansion so the t^2
    coefficient is not biased by the upper end of the window.
    """
    loss = 1.0 - series.F
    sel = (loss >= window[0]) & (loss <= window[1]) & (series.times > 0)
    if sel.sum() < min_points:
        raise FitFailure(
            f"only {int(sel.sum())} samples have 1 - F in [{window[0]:.0e}, {window[1]:.0e}]; "
            "the series is not in the quadratic regime (adjust eps or the time grid)"
        )
    t = series.times[sel]
    y = loss[sel]
    s = t * t
    A = np.column_stack([s, s * s])
    # scale columns for conditioning
    scale = np.abs(A).max(axis=0)
    coef, *_ = np.linalg.lstsq(A / scale, y, rcond=None)
    coef = coef / scale
    resid = y - A @ coef
    return DecayFit(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2))), int(sel.sum()), float(t[0]), float(t[-1]))


@dataclass(frozen=True)
class BoostReport:
    k: float
    mass: float
    ratio: float
    expected: float
    rel_error: float
    tolerance: float
    fit_k: DecayFit
    fit_0: DecayFit

    @property
    def passed(self) -> bool:
        return self.rel_error <= self.tolerance


def boost_check(
    series_at_k: FidelitySeries,
    series_at_0: FidelitySeries,
    k: float,
    m: float,
    tolerance: float = 0.01,
    window: tuple[float, float] = FIT_WINDOW,
) -> BoostReport:
    """Compare fitted decay coefficients at momentum k and at rest against 1 - v(k)^2."""
    fit_k = fit_decay(series_at_k, window)
    fit_0 = fit_decay(series_at_0, window)
    if fit_0.coefficient <= 0:
        raise FitFailure("rest-frame decay coefficient is not positive")
    v = boost_velocity(k, m)
    expected = 1.0 - v * v
    ratio = fit_k.coefficient / fit_0.coefficient
    return BoostReport(k, m, ratio, expected, abs(ratio / expected - 1.0), tolerance, fit_k, fit_0)


@dataclass(frozen=True)
class ComptonReport:
    k: float
    mass: float
    velocity: float
    valid: bool
    flags: list[str] = field(default_factory=list)


def compton_guard(k: float, m: float, density: float | None = None, max_occupation: float = 1e-3) -> ComptonReport:
    """Flag scenarios outside the single-particle regime (|k| < 2m, dilute beam).

    ``density`` is the beam's particle density; the beam counts as dilute when
    fewer than ``max_occupation`` particles share a Compton volume (1/m)^3.
    Never raises; flags are also emitted as warnings.
    """
    flags = []
    if abs(k) > 2 * m:
        flags.append("pair-creation regime: |k| exceeds 2m")
    elif abs(k) == 2 * m:
        flags.append("boundary: |k| = 2m sits on the Compton bound")
    if density is not None and density * m**-3 >= max_occupation:
        flags.append(f"dense beam: {density * m**-3:.3g} particles per Compton volume")
    for msg in flags:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return ComptonReport(k, m, boost_velocity(k, m), not flags, flags)
