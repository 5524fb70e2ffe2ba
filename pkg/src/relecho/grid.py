"""Transverse grids, spinor fields and finite-difference stencils."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GridMismatch, ValidationError

# Dirac representation; component order is (upper up, upper down, lower up, lower down).
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_I2 = np.eye(2, dtype=complex)
_Z2 = np.zeros((2, 2), dtype=complex)

BETA = np.block([[_I2, _Z2], [_Z2, -_I2]])
ALPHA = np.array([np.block([[_Z2, s], [s, _Z2]]) for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)])
GAMMA0 = BETA
# gamma^0 gamma^mu A_mu = A^0 - alpha.A  (metric +---, A^mu upper index)
COUPLING = np.array([np.eye(4, dtype=complex), -ALPHA[0], -ALPHA[1], -ALPHA[2]])


@dataclass(frozen=True)
class TransverseGrid:
    """Square grid on [-L, L)^2 with N points per axis, nodes at -L + k h."""

    extent: float
    points: int

    def __post_init__(self):
        if self.points < 16 or self.points % 2:
            raise ValidationError(f"grid.points must be even and >= 16, got {self.points}")
        if not self.extent > 0:
            raise ValidationError(f"grid.extent must be positive, got {self.extent}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / self.points

    @property
    def cell_area(self) -> float:
        return self.spacing**2

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.extent + self.spacing * np.arange(self.points)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    def check_field(self, field_strength: float, lengths: float = 6.0) -> None:
        """Require the grid half-width to cover `lengths` magnetic lengths."""
        ell = 1.0 / np.sqrt(field_strength)
        if self.extent < lengths * ell - 1e-12:
            raise ValidationError(
                f"grid.extent={self.extent} is below {lengths} magnetic lengths "
                f"({lengths * ell:.4g}) for H={field_strength}"
            )

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros((self.points, self.points), dtype=bool)
        mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = True
        return mask


_STENCILS = {
    2: ((1, 0.5),),
    4: ((1, 2.0 / 3.0), (2, -1.0 / 12.0)),
    6: ((1, 0.75), (2, -0.15), (3, 1.0 / 60.0)),
}


def derivative(f: np.ndarray, h: float, axis: int, order: int = 4) -> np.ndarray:
    """Central first derivative with periodic wrap (fields decay at the edge)."""
    try:
        weights = _STENCILS[order]
    except KeyError:
        raise ValidationError(f"stencil order must be one of {sorted(_STENCILS)}") from None
    out = np.zeros_like(f)
    for shift, w in weights:
        out += w * (np.roll(f, -shift, axis=axis) - np.roll(f, shift, axis=axis))
    return out / h


@dataclass(frozen=True, eq=False)
class SpinorField:
    """Four-component spinor on a transverse grid times exp(i kz z)."""

    data: np.ndarray
    kz: float
    grid: TransverseGrid

    def __post_init__(self):
        shape = (4, self.grid.points, self.grid.points)
        if self.data.shape != shape:
            raise ValidationError(f"spinor data has shape {self.data.shape}, expected {shape}")

    def _check(self, other: "SpinorField") -> None:
        if other.grid != self.grid or other.kz != self.kz:
            raise GridMismatch("spinor fields differ in grid or kz")

    def inner(self, other: "SpinorField") -> complex:
        """Dirac inner product <self|other> by grid quadrature (z factored out)."""
        self._check(other)
        return complex(np.vdot(self.data, other.data) * self.grid.cell_area)

    def norm(self) -> float:
        return float(np.real(self.inner(self)))

    def scaled(self, factor: complex) -> "SpinorField":
        return SpinorField(self.data * factor, self.kz, self.grid)

    def __add__(self, other: "SpinorField") -> "SpinorField":
        self._check(other)
        return SpinorField(self.data + other.data, self.kz, self.grid)

    def __sub__(self, other: "SpinorField") -> "SpinorField":
        self._check(other)
        return SpinorField(self.data - other.data, self.kz, self.grid)


def apply_matrix_field(matrix: np.ndarray, data: np.ndarray) -> np.ndarray:
    """Apply a constant 4x4 matrix to every node of a (4, N, N) spinor array."""
    return np.einsum("ab,bxy->axy", matrix, data)


def dirac_apply(
    psi: SpinorField,
    mass: float,
    field_strength: float,
    order: int = 4,
) -> SpinorField:
    """Discretized unperturbed Dirac Hamiltonian acting on a sampled spinor.

    H0 = alpha.(p - B) + beta m with symmetric-gauge B = (-H y/2, H x/2, 0);
    the z momentum is the fixed plane-wave kz.
    """
    grid = psi.grid
    x, y = grid.mesh
    h = grid.spacing
    data = psi.data
    px = -1j * derivative(data, h, axis=1, order=order) + 0.5 * field_strength * y * data
    py = -1j * derivative(data, h, axis=2, order=order) - 0.5 * field_strength * x * data
    out = apply_matrix_field(ALPHA[0], px) + apply_matrix_field(ALPHA[1], py)
    out += psi.kz * apply_matrix_field(ALPHA[2], data)
    out += mass * apply_matrix_field(BETA, data)
    return SpinorField(out, psi.kz, grid)
