"""Relativistic Landau levels in the symmetric gauge.

Conventions
-----------
Natural units (hbar = c = e = 1).  The background vector potential is
B = (-H y / 2, H x / 2, 0), whose curl is H along z, and the kinetic momentum
is pi = p - B.  With these signs [pi_x, pi_y] = i H, the lowest Landau level
holds the orbitals with angular momentum ml >= 0, and the two ladder
operators act on the orbitals returned by :func:`landau_orbital` as

    pi_- phi(n, ml) =  i sqrt(2 H (n + 1)) phi(n + 1, ml - 1)
    pi_+ phi(n, ml) = -i sqrt(2 H n)       phi(n - 1, ml + 1)

with pi_+- = pi_x +- i pi_y.  A label (n, ml, s) names the orbital of the
upper (large) spinor components and its spin branch: s = +1 (aligned with
the field) sits at effective level nu = n, s = -1 at nu = n + 1.  Only
(n = 0, s = +1) reaches nu = 0, so the bottom rung has a single branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .errors import EmptyTruncation, GridTooSmall, TruncationTooLarge, ValidationError
from .grid import SpinorField, TransverseGrid


@dataclass(frozen=True)
class ParticleParams:
    mass: float
    field: float
    kz: float = 0.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ValidationError(f"particle.mass must be > 0, got {self.mass}")
        if not self.field > 0:
            raise ValidationError(f"particle.field must be > 0, got {self.field}")
        if not np.isfinite(self.kz):
            raise ValidationError("particle.kz must be finite")

    @property
    def magnetic_length(self) -> float:
        return 1.0 / math.sqrt(self.field)


@dataclass(frozen=True, order=True)
class QuantumNumbers:
    """Label of a Landau eigenspinor.

    ``branch`` is the sign of the energy; negative-energy states are an
    experimental extension and are excluded from default truncations.
    """

    n: int
    ml: int
    s: int = 1
    kz: float = 0.0
    branch: int = 1

    def __post_init__(self):
        if self.n < 0:
            raise ValidationError(f"n must be >= 0, got {self.n}")
        if self.s not in (1, -1):
            raise ValidationError(f"spin branch must be +1 or -1, got {self.s}")
        if self.branch not in (1, -1):
            raise ValidationError(f"energy branch must be +1 or -1, got {self.branch}")
        if self.ml < -self.n:
            raise ValidationError(f"ml={self.ml} is below -n={-self.n}; no such orbital")

    @property
    def nu(self) -> int:
        return self.n if self.s == 1 else self.n + 1


def landau_energy(qn: QuantumNumbers, p: ParticleParams) -> float:
    """E = sqrt(m^2 + kz^2 + 2 nu H), signed by the energy branch."""
    return qn.branch * math.sqrt(p.mass**2 + qn.kz**2 + 2.0 * qn.nu * p.field)


def _radial_index(n: int, ml: int) -> int:
    return n + min(ml, 0)


def orbital_norm(n: int, ml: int, field_strength: float) -> float:
    nr = _radial_index(n, ml)
    am = abs(ml)
    log_n = 0.5 * (math.log(field_strength / (2.0 * math.pi)) + gammaln(nr + 1) - gammaln(nr + am + 1))
    return math.exp(log_n)


def orbital_values(n: int, ml: int, field_strength: float, x, y) -> np.ndarray:
    """Closed-form symmetric-gauge orbital evaluated at arbitrary points."""
    if ml < -n:
        raise ValidationError(f"orbital (n={n}, ml={ml}) does not exist")
    nr = _radial_index(n, ml)
    am = abs(ml)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rho2 = 0.5 * field_strength * (x * x + y * y)
    w = (x + 1j * np.sign(ml or 1) * y) * math.sqrt(0.5 * field_strength)
    radial = eval_genlaguerre(nr, am, rho2) * np.exp(-0.5 * rho2)
    return (-1) ** nr * orbital_norm(n, ml, field_strength) * w**am * radial


def landau_orbital(n: int, ml: int, field_strength: float, grid: TransverseGrid) -> np.ndarray:
    """Nonrelativistic Landau orbital (n, ml) sampled on ``grid``.

    Raises GridTooSmall if the boundary density |phi|^2 exceeds 1e-6 of its peak.
    """
    x, y = grid.mesh
    values = orbital_values(n, ml, field_strength, x, y)
    density = np.abs(values) ** 2
    peak = density.max()
    edge = density[grid.boundary_mask()].max()
    if not peak > 0 or edge > 1e-6 * peak:
        raise GridTooSmall(
            f"orbital (n={n}, ml={ml}) has boundary density {edge / peak:.2e} of its peak; "
            "enlarge grid.extent"
        )
    return values


def spinor_terms(qn: QuantumNumbers, p: ParticleParams) -> list[tuple[int, complex, tuple[int, int]]]:
    """Decompose a Landau eigenspinor into (component, coefficient, orbital) terms.

    Upper components carry the Pauli spinor chi, lower ones (sigma.pi) chi / (E + m);
    negative-energy states swap the roles with a sign.
    """
    E = abs(landau_energy(qn, p))
    m, k, H = p.mass, qn.kz, p.field
    n, ml = qn.n, qn.ml
    norm = math.sqrt((E + m) / (2.0 * E))
    up, dn = (0, 1) if qn.branch == 1 else (2, 3)
    lo_up, lo_dn = (2, 3) if qn.branch == 1 else (0, 1)
    small = 1.0 / (E + m) if qn.branch == 1 else -1.0 / (E + m)
    terms: list[tuple[int, complex, tuple[int, int]]] = []
    if qn.s == 1:
        terms.append((up, norm, (n, ml)))
        if k != 0.0:
            terms.append((lo_up, norm * small * k, (n, ml)))
        if n > 0:
            terms.append((lo_dn, norm * small * (-1j) * math.sqrt(2.0 * H * n), (n - 1, ml + 1)))
    else:
        terms.append((dn, norm, (n, ml)))
        terms.append((lo_up, norm * small * 1j * math.sqrt(2.0 * H * (n + 1)), (n + 1, ml - 1)))
        if k != 0.0:
            terms.append((lo_dn, -norm * small * k, (n, ml)))
    return terms


def landau_spinor(qn: QuantumNumbers, p: ParticleParams, grid: TransverseGrid) -> SpinorField:
    """Landau eigenspinor sampled on the grid, unit Dirac norm."""
    data = np.zeros((4, grid.points, grid.points), dtype=complex)
    for comp, coef, (n, ml) in spinor_terms(qn, p):
        data[comp] += coef * landau_orbital(n, ml, p.field, grid)
    return SpinorField(data, qn.kz, grid)


@dataclass(frozen=True)
class BasisTruncation:
    nu_max: int
    ml_min: int
    ml_max: int
    spins: tuple[int, ...] = (1, -1)
    include_negative_energy: bool = False
    max_dim: int = 4096

    def __post_init__(self):
        if self.nu_max < 0:
            raise ValidationError("truncation.nu_max must be >= 0")
        if self.ml_min > self.ml_max:
            raise ValidationError("truncation.ml_min must not exceed ml_max")
        if not self.spins or any(s not in (1, -1) for s in self.spins):
            raise ValidationError("truncation.spins must be a nonempty subset of {+1, -1}")

    def labels(self, kz: float = 0.0) -> list[QuantumNumbers]:
        """All labels in the truncation, ordered by (branch, nu, spin, ml)."""
        out = []
        branches = (1, -1) if self.include_negative_energy else (1,)
        for branch in branches:
            for nu in range(self.nu_max + 1):
                for s in sorted(self.spins, reverse=True):
                    n = nu if s == 1 else nu - 1
                    if n < 0:
                        continue
                    for ml in range(max(self.ml_min, -n), self.ml_max + 1):
                        out.append(QuantumNumbers(n, ml, s, kz, branch))
        if not out:
            raise EmptyTruncation("truncation contains no states")
        if len(out) > self.max_dim:
            raise TruncationTooLarge(f"truncation has {len(out)} states, ceiling is {self.max_dim}")
        return out


def degenerate_set(
    reference: QuantumNumbers,
    p: ParticleParams,
    truncation: BasisTruncation,
    tol: float = 1e-9,
) -> list[QuantumNumbers]:
    """Labels in the truncation whose energy lies within tol * |E_ref| of the reference."""
    if tol < 0:
        raise ValidationError("degeneracy tolerance must be >= 0")
    labels = truncation.labels(reference.kz)
    if reference not in labels:
        raise EmptyTruncation(f"reference {reference} lies outside the truncation")
    e_ref = landau_energy(reference, p)
    return [q for q in labels if abs(landau_energy(q, p) - e_ref) <= tol * abs(e_ref)]


@dataclass(eq=False)
class SampledBasis:
    """Truncated Landau basis with every spinor stored as orbital coefficients.

    ``coeffs[c, i, o]`` is the weight of orbital ``orbitals[o]`` in component c
    of basis spinor i, so any grid quantity built from the spinors is a linear
    combination of sampled orbitals.
    """

    params: ParticleParams
    labels: list[QuantumNumbers]
    grid: TransverseGrid
    orbitals: list[tuple[int, int]] = field(init=False)
    coeffs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        kz = {q.kz for q in self.labels}
        if len(kz) > 1:
            raise ValidationError("basis labels must share one kz")
        terms = [spinor_terms(q, self.params) for q in self.labels]
        self.orbitals = sorted({orb for t in terms for _, _, orb in t})
        index = {orb: o for o, orb in enumerate(self.orbitals)}
        self.coeffs = np.zeros((4, len(self.labels), len(self.orbitals)), dtype=complex)
        for i, t in enumerate(terms):
            for comp, coef, orb in t:
                self.coeffs[comp, i, index[orb]] += coef

    @classmethod
    def build(cls, p: ParticleParams, truncation: BasisTruncation, grid: TransverseGrid) -> "SampledBasis":
        return cls(p, truncation.labels(p.kz), grid)

    @property
    def dim(self) -> int:
        return len(self.labels)

    @property
    def kz(self) -> float:
        return self.labels[0].kz

    @cached_property
    def energies(self) -> np.ndarray:
        return np.array([landau_energy(q, self.params) for q in self.labels])

    @cached_property
    def table(self) -> np.ndarray:
        """Sampled orbitals, shape (n_orbitals, N, N)."""
        return np.array([landau_orbital(n, ml, self.params.field, self.grid) for n, ml in self.orbitals])

    def on_grid(self, grid: TransverseGrid) -> "SampledBasis":
        return SampledBasis(self.params, self.labels, grid)

    def spinor(self, i: int) -> SpinorField:
        vec = np.zeros(self.dim, dtype=complex)
        vec[i] = 1.0
        return self.field(vec)

    def field(self, vec: np.ndarray) -> SpinorField:
        """Reconstruct the position-space spinor of a coefficient vector."""
        orb = np.einsum("cio,i->co", self.coeffs, np.asarray(vec, dtype=complex))
        table = self.table
        n = self.grid.points
        data = (orb @ table.reshape(len(self.orbitals), n * n)).reshape(4, n, n)
        return SpinorField(data, self.kz, self.grid)

    def fields(self, vecs: Iterable[np.ndarray]) -> list[SpinorField]:
        return [self.field(v) for v in vecs]

    def gram(self) -> np.ndarray:
        """Dirac inner products of all basis spinors by grid quadrature."""
        n = self.grid.points
        flat = self.table.reshape(len(self.orbitals), n * n)
        orb_gram = (flat.conj() @ flat.T) * self.grid.cell_area
        return sum(self.coeffs[c].conj() @ orb_gram @ self.coeffs[c].T for c in range(4))

    def index(self, qn: QuantumNumbers) -> int:
        try:
            return self.labels.index(qn)
        except ValueError:
            raise EmptyTruncation(f"{qn} is not in the basis") from None

    def indices(self, labels: Sequence[QuantumNumbers]) -> list[int]:
        return [self.index(q) for q in labels]
