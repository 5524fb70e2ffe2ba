"""Static, z-independent perturbing four-potentials A^mu(x, y).

Every profile returns its components with an upper Lorentz index, stacked as
an array of shape (4, N, N) in the order (A^0, A^x, A^y, A^z).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, ValidationError
from .grid import TransverseGrid


class Profile:
    #: finest spatial scale; the grid must put >= 8 points across it
    length_scale: float = math.inf

    def values(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def components(self, grid: TransverseGrid) -> np.ndarray:
        x, y = grid.mesh
        return self.values(x, y)

    def boosted(self, velocity: float) -> "Profile":
        return Boosted(self, velocity)

    def __add__(self, other: "Profile") -> "Profile":
        return Sum((self, other))


@dataclass(frozen=True)
class Zero(Profile):
    def values(self, x, y):
        return np.zeros((4,) + np.shape(x))


@dataclass(frozen=True)
class ConstantScalar(Profile):
    value: float = 1.0

    def values(self, x, y):
        out = np.zeros((4,) + np.shape(x))
        out[0] = self.value
        return out


@dataclass(frozen=True)
class GaussianScalar(Profile):
    """A^0 = amplitude * exp(-|r - center|^2 / (2 width^2))."""

    amplitude: float = 1.0
    width: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.width > 0:
            raise ValidationError("perturbation.width must be > 0")

    @property
    def length_scale(self) -> float:
        # diameter at which the envelope falls to exp(-2)
        return 2.0 * self.width

    def values(self, x, y):
        out = np.zeros((4,) + np.shape(x))
        r2 = (x - self.center[0]) ** 2 + (y - self.center[1]) ** 2
        out[0] = self.amplitude * np.exp(-0.5 * r2 / self.width**2)
        return out


@dataclass(frozen=True)
class GaussianMagnetic(Profile):
    """Localized field bump: A = (b/2) g(r) (-(y - y0), x - x0, 0), g Gaussian.

    Its curl is a z-directed field b g(r) (2 - r^2 / w^2) / 2 confined to a
    few widths around the center.
    """

    amplitude: float = 1.0
    width: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.width > 0:
            raise ValidationError("perturbation.width must be > 0")

    @property
    def length_scale(self) -> float:
        return 2.0 * self.width

    def values(self, x, y):
        out = np.zeros((4,) + np.shape(x))
        dx = x - self.center[0]
        dy = y - self.center[1]
        g = 0.5 * self.amplitude * np.exp(-0.5 * (dx * dx + dy * dy) / self.width**2)
        out[1] = -g * dy
        out[2] = g * dx
        return out

    def field_z(self, x, y):
        dx = x - self.center[0]
        dy = y - self.center[1]
        r2 = (dx * dx + dy * dy) / self.width**2
        return 0.5 * self.amplitude * np.exp(-0.5 * r2) * (2.0 - r2)


@dataclass(frozen=True, eq=False)
class Tabulated(Profile):
    """User-supplied components on one specific grid."""

    data: np.ndarray
    grid: TransverseGrid
    length_scale: float = 0.0

    def __post_init__(self):
        shape = (4, self.grid.points, self.grid.points)
        if np.shape(self.data) != shape:
            raise ValidationError(f"tabulated field has shape {np.shape(self.data)}, expected {shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("tabulated field must be finite (bounded components)")
        if self.length_scale == 0.0:
            object.__setattr__(self, "length_scale", 8 * self.grid.spacing)

    def values(self, x, y):
        raise GridMismatch("tabulated fields can only be sampled on their own grid")

    def components(self, grid):
        if grid != self.grid:
            raise GridMismatch("tabulated field was supplied on a different grid")
        return np.asarray(self.data, dtype=float)


@dataclass(frozen=True)
class Sum(Profile):
    parts: tuple[Profile, ...]

    @property
    def length_scale(self) -> float:
        return min(p.length_scale for p in self.parts)

    def values(self, x, y):
        return sum(p.values(x, y) for p in self.parts)

    def components(self, grid):
        return sum(p.components(grid) for p in self.parts)


@dataclass(frozen=True)
class Boosted(Profile):
    """A profile defined in a frame moving with velocity +v along z, seen in the lab.

    A^0 -> gamma (A^0 + v A^z), A^z -> gamma (A^z + v A^0); transverse parts are
    unchanged.  A static z-independent profile stays static and z-independent.
    """

    base: Profile
    velocity: float

    def __post_init__(self):
        if not abs(self.velocity) < 1:
            raise ValidationError("boost velocity must satisfy |v| < 1")

    @property
    def length_scale(self) -> float:
        return self.base.length_scale

    def _boost(self, a):
        v = self.velocity
        gamma = 1.0 / math.sqrt(1.0 - v * v)
        out = a.copy()
        out[0] = gamma * (a[0] + v * a[3])
        out[3] = gamma * (a[3] + v * a[0])
        return out

    def values(self, x, y):
        return self._boost(self.base.values(x, y))

    def components(self, grid):
        return self._boost(self.base.components(grid))


@dataclass(frozen=True)
class PerturbationField:
    """A profile together with its strength parameter epsilon."""

    profile: Profile
    strength: float = 0.0

    def components(self, grid: TransverseGrid) -> np.ndarray:
        return self.profile.components(grid)

    def with_strength(self, strength: float) -> "PerturbationField":
        return PerturbationField(self.profile, strength)
