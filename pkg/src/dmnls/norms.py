"""Lebesgue, fractional Sobolev and Strichartz norms on grids and trajectories.

``H^{s,r}`` follows the sum convention ``||f||_{L^r} + || |grad|^s f ||_{L^r}``.
The Strichartz norm uses the (10/3, 10/3) exponents on every grid dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSnapshotsError, InvalidFieldError, InvalidParameterError
from .spectral_grid import Field, HomogeneousFractional, InhomogeneousFractional

STRICHARTZ_Q = 10 / 3
STRICHARTZ_R = 10 / 3

# stable report column keys
LINF_HS = "Linf_Hs"
L103_HS103 = "L103_Hs103"
S_HALF = "S_half"


@dataclass(frozen=True)
class NormSpec:
    s: float = 0.5
    r: float = 2.0
    q: float | None = None
    homogeneous: bool = True

    def __post_init__(self):
        if self.s < 0:
            raise InvalidParameterError(f"s must be >= 0, got {self.s}")
        if not (2 <= self.r < math.inf):
            raise InvalidParameterError(f"r must lie in [2, inf), got {self.r}")
        if self.q is not None and not self.q > 2:
            raise InvalidParameterError(f"q must exceed 2, got {self.q}")

    def multiplier(self):
        return HomogeneousFractional(self.s) if self.homogeneous else InhomogeneousFractional(self.s)


def _lr(values, r, cell_volume, axes=None):
    a = np.abs(values)
    if math.isinf(r):
        return np.max(a, axis=axes)
    return (np.sum(a**r, axis=axes) * cell_volume) ** (1.0 / r)


def lebesgue_norm(f: Field, r) -> float:
    if not r >= 1:
        raise InvalidParameterError(f"r must be >= 1, got {r}")
    return float(_lr(f.values, r, f.grid.cell_volume))


def _deriv_values(grid, values, s):
    """``|grad|^s`` applied along the trailing ``grid.d`` axes."""
    if s == 0:
        return values
    axes = tuple(range(values.ndim - grid.d, values.ndim))
    vh = np.fft.fftn(values, axes=axes)
    return np.fft.ifftn(grid.xi2 ** (s / 2) * vh, axes=axes)


def sobolev_norm(f: Field, s, r=2.0) -> float:
    if s < 0:
        raise InvalidParameterError(f"s must be >= 0, got {s}")
    return lebesgue_norm(f, r) + float(_lr(_deriv_values(f.grid, f.values, s), r, f.grid.cell_volume))


def _sobolev_series(grid, values, s, r):
    axes = tuple(range(1, values.ndim))
    dv = grid.cell_volume
    return _lr(values, r, dv, axes) + _lr(_deriv_values(grid, values, s), r, dv, axes)


def strichartz_parts(traj, s=0.5):
    """``(max_t ||u||_{H^s}, ||u||_{L^{10/3}_t H^{s,10/3}})`` over the trajectory."""
    if len(traj) < 2:
        raise InsufficientSnapshotsError("Strichartz norm needs at least two snapshots (degenerate interval)")
    linf = 0.0
    series = np.empty(len(traj))
    # chunked so 3D trajectories do not double in memory
    chunk = max(1, 2**21 // traj.grid.size)
    for start in range(0, len(traj), chunk):
        block = traj.values[start:start + chunk]
        linf = max(linf, float(np.max(_sobolev_series(traj.grid, block, s, 2.0))))
        series[start:start + chunk] = _sobolev_series(traj.grid, block, s, STRICHARTZ_R)
    integral = abs(np.trapezoid(series**STRICHARTZ_Q, traj.times))
    return linf, float(integral ** (1.0 / STRICHARTZ_Q))


def strichartz_norm(traj, s=0.5) -> float:
    """``||u||_{S^s}`` = ``L^inf_t H^s`` (max over snapshots) + ``L^{10/3}_t H^{s,10/3}`` (trapezoid)."""
    linf, l103 = strichartz_parts(traj, s)
    return linf + l103


class _Difference:
    """Snapshot-wise difference of two trajectories, shaped like a Trajectory for the norms."""

    def __init__(self, a, b):
        if a.grid != b.grid:
            raise InvalidFieldError("trajectories live on different grids")
        if len(a) != len(b) or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
            raise InsufficientSnapshotsError("trajectories have mismatched time stamps")
        self.grid = a.grid
        self.times = a.times
        self.values = a.values - b.values

    def __len__(self):
        return self.times.size


def trajectory_difference_norm(a, b, s=0.5) -> float:
    return strichartz_norm(_Difference(a, b), s)


def trajectory_difference_parts(a, b, s=0.5):
    return strichartz_parts(_Difference(a, b), s)


def soliton_distance(traj, Q, s=0.5) -> float:
    """``S^s`` distance between a run and ``exp(i t) Q`` at the run's time stamps."""
    from .evolution import orbit_trajectory

    return trajectory_difference_norm(traj, orbit_trajectory(Q, traj.times), s)


__all__ = [
    "NormSpec",
    "lebesgue_norm",
    "sobolev_norm",
    "strichartz_norm",
    "strichartz_parts",
    "trajectory_difference_norm",
    "trajectory_difference_parts",
    "soliton_distance",
    "LINF_HS",
    "L103_HS103",
    "S_HALF",
]
