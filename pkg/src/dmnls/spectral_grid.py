"""Periodic box discretization and Fourier multipliers.

The box is ``[-L, L)^d`` sampled at ``N`` points per axis, so the origin
sits at index ``N // 2`` on every axis. Transforms are unitary with respect
to the grid L2 inner product ``sum(conj(f) * g) * h**d``: the coefficient
vector has the same plain 2-norm as the field's grid L2 norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidFieldError, InvalidParameterError


@dataclass(frozen=True)
class SpectralGrid:
    d: int
    n: int
    L: float

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise InvalidParameterError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.n < 8 or self.n % 2:
            raise InvalidParameterError(f"points per axis must be even and >= 8, got {self.n}")
        if not self.L > 0:
            raise InvalidParameterError(f"half-length must be positive, got {self.L}")
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self):
        return 2.0 * self.L / self.n

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def size(self):
        return self.n**self.d

    @property
    def cell_volume(self):
        return self.h**self.d

    @cached_property
    def x(self):
        """Physical coordinates of one axis, starting at ``-L``."""
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def xi(self):
        """Wavenumbers of one axis in FFT order; ``pi*k/L`` for ``k`` in ``-N/2..N/2-1``."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)

    def mesh(self):
        return np.meshgrid(*([self.x] * self.d), indexing="ij", sparse=True)

    @cached_property
    def r2(self):
        return sum(c**2 for c in self.mesh())

    @cached_property
    def xi2(self):
        """``|xi|^2`` on the full frequency lattice (FFT order)."""
        axes = np.meshgrid(*([self.xi] * self.d), indexing="ij", sparse=True)
        out = sum(k**2 for k in axes)
        out = np.broadcast_to(out, self.shape).copy()
        out.setflags(write=False)
        return out

    @cached_property
    def top_octave_mask(self):
        """Modes whose largest per-axis index magnitude is at least ``N/4``."""
        k = np.abs(np.fft.fftfreq(self.n) * self.n)
        axes = np.meshgrid(*([k] * self.d), indexing="ij", sparse=True)
        kmax = axes[0]
        for a in axes[1:]:
            kmax = np.maximum(kmax, a)
        return np.broadcast_to(kmax >= self.n // 4, self.shape)

    def describe(self):
        return {"d": self.d, "N": self.n, "L": self.L}


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples on a grid. Treated as a value; never mutated in place."""

    grid: SpectralGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.size != self.grid.size:
            raise InvalidFieldError(
                f"field has {v.size} samples, grid {self.grid.shape} needs {self.grid.size}"
            )
        v = np.array(v.reshape(self.grid.shape), dtype=np.complex128, order="C", copy=True)
        v.setflags(write=False)
        if not np.all(np.isfinite(v)):
            raise InvalidFieldError("field contains NaN or Inf samples")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, func(*grid.mesh()) * np.ones(grid.shape))

    def __add__(self, other):
        _check_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c):
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def l2_norm(self):
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume))

    def mass(self):
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume)


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: SpectralGrid
    coeffs: np.ndarray

    def norm(self):
        return float(np.linalg.norm(self.coeffs.ravel()))


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise InvalidFieldError(f"grid mismatch: {a.grid} vs {b.grid}")


def fft(grid, values):
    return np.fft.fftn(values, norm="ortho") * grid.h ** (grid.d / 2)


def ifft(grid, coeffs):
    return np.fft.ifftn(coeffs, norm="ortho") * grid.h ** (-grid.d / 2)


def forward_transform(f: Field) -> SpectralField:
    return SpectralField(f.grid, fft(f.grid, f.values))


def inverse_transform(fh: SpectralField) -> Field:
    if fh.coeffs.size != fh.grid.size:
        raise InvalidFieldError("coefficient count does not match grid")
    return Field(fh.grid, ifft(fh.grid, fh.coeffs.reshape(fh.grid.shape)))


@dataclass(frozen=True)
class HomogeneousFractional:
    """Symbol ``|xi|^s``."""

    s: float

    def __post_init__(self):
        if self.s < 0:
            raise InvalidParameterError(f"homogeneous order must be >= 0, got {self.s}")

    def symbol(self, grid):
        if self.s == 0:
            return np.ones(grid.shape)
        return grid.xi2 ** (self.s / 2)


@dataclass(frozen=True)
class InhomogeneousFractional:
    """Symbol ``(1 + |xi|^2)^(s/2)``; negative ``s`` smooths."""

    s: float

    def symbol(self, grid):
        return (1.0 + grid.xi2) ** (self.s / 2)


@dataclass(frozen=True)
class Phase:
    """Symbol ``exp(-i theta |xi|^2)``, i.e. the free flow ``exp(i theta Laplacian)``."""

    theta: float

    def symbol(self, grid):
        return np.exp(-1j * self.theta * grid.xi2)


def apply_multiplier(f: Field, m) -> Field:
    return Field(f.grid, ifft(f.grid, m.symbol(f.grid) * fft(f.grid, f.values)))


def laplacian(grid, values):
    return ifft(grid, -grid.xi2 * fft(grid, values))


def top_octave_fraction(grid, values):
    """Fraction of L2 energy in the top octave of resolved frequencies."""
    e = np.abs(fft(grid, values)) ** 2
    total = e.sum()
    if total == 0:
        return 0.0
    return float(e[grid.top_octave_mask].sum() / total)
