"""Strang split-step integration of ``i u_t + gamma(t/eps) Lap u = -|u|^2 u``.

Each step is ``N(dt/2) o L(t, t+dt) o N(dt/2)`` where ``N`` is the exact
pointwise phase rotation ``u -> exp(i|u|^2 tau) u`` and ``L`` is the exact
linear flow with accumulated dispersion ``Gamma_eps(t+dt, t)``. Both are L2
isometries, so mass only drifts by rounding.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dispersion_map import UNIT, Gamma
from .errors import (
    AbortedRunError,
    InsufficientSnapshotsError,
    InvalidFieldError,
    InvalidParameterError,
    NumericalFailureError,
)
from .spectral_grid import Field, fft, ifft, top_octave_fraction

log = logging.getLogger(__name__)

ABORT_MASS_DRIFT = 1e-8
TAIL_WARN = 1e-8


def default_dt(eps):
    return min(1e-2, eps / 4)


@dataclass(eq=False)
class Trajectory:
    """Snapshots ``values[k]`` at ``times[k]``; times are strictly monotone."""

    grid: object
    times: np.ndarray
    values: np.ndarray
    dt: float
    eps: float
    map_name: str
    nonlinear: bool = True
    stride: int = 1
    masses: np.ndarray = None
    tail_fractions: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.values.shape != (self.times.size,) + self.grid.shape:
            raise InvalidFieldError("snapshot array does not match times and grid")
        if self.times.size > 1:
            steps = np.diff(self.times)
            if not (np.all(steps > 0) or np.all(steps < 0)):
                raise InvalidParameterError("snapshot times must be strictly monotone")
        if self.masses is None:
            self.masses = np.sum(np.abs(self.values) ** 2, axis=tuple(range(1, self.values.ndim))) * self.grid.cell_volume

    def __len__(self):
        return self.times.size

    def field(self, k):
        return Field(self.grid, self.values[k])

    @property
    def mass_drift(self):
        m0 = self.masses[0]
        if m0 == 0:
            return 0.0
        return float(np.max(np.abs(self.masses - m0)) / m0)

    def manifest(self):
        return {
            "grid": self.grid.describe(),
            "dt": self.dt,
            "eps": self.eps,
            "map": self.map_name,
            "nonlinear": self.nonlinear,
            "stride": self.stride,
            "times": [float(t) for t in self.times],
            "mass": [float(m) for m in self.masses],
            "tail_fraction": None if self.tail_fractions is None else [float(f) for f in self.tail_fractions],
            **self.meta,
        }


def _nonlinear(v, tau):
    return v * np.exp(1j * tau * np.abs(v) ** 2)


def _step(grid, v, dt, gamma_inc, nonlinear):
    if nonlinear:
        v = _nonlinear(v, dt / 2)
    v = ifft(grid, np.exp(-1j * gamma_inc * grid.xi2) * fft(grid, v))
    if nonlinear:
        v = _nonlinear(v, dt / 2)
    return v


def _linear_increment(dmap, eps, t_start, t_end):
    if dmap is None or dmap.is_unit:
        return np.asarray(t_end) - np.asarray(t_start)
    return Gamma(dmap, eps, t_start, t_end)


def strang_step(u: Field, t, dt, dmap=None, eps=1.0, nonlinear=True, step_index=None) -> Field:
    """Advance ``u`` from ``t`` to ``t + dt``; ``dmap=None`` is the constant-dispersion path."""
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    v = _step(u.grid, u.values, dt, float(_linear_increment(dmap, eps, t, t + dt)), nonlinear)
    if not np.all(np.isfinite(v)):
        raise NumericalFailureError("non-finite state", step_index)
    return Field(u.grid, v)


def step_times(t0, t1, dt):
    """Step boundaries from ``t0`` to ``t1``; a trailing short step lands exactly on ``t1``."""
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    span = abs(t1 - t0)
    if span == 0:
        raise InvalidParameterError("empty time interval")
    sign = 1.0 if t1 > t0 else -1.0
    ratio = span / dt
    n = round(ratio)
    uniform = n >= 1 and abs(ratio - n) <= 1e-9 * ratio
    full = n if uniform else math.floor(ratio)
    ts = t0 + sign * dt * np.arange(full + 1)
    if not uniform:
        ts = np.append(ts, t1)
    ts[-1] = t1
    return ts


def evolve(u0: Field, interval, dt=None, dmap=None, eps=1.0, snapshot_stride=10, nonlinear=True,
           abort_drift=ABORT_MASS_DRIFT) -> Trajectory:
    """Integrate from ``interval[0]`` to ``interval[1]`` (either direction).

    Snapshots are kept every ``snapshot_stride`` steps plus both endpoints.
    Raises AbortedRunError if the state turns non-finite or the relative mass
    drift exceeds ``abort_drift``.
    """
    t0, t1 = map(float, interval)
    dt = default_dt(eps) if dt is None else dt
    if snapshot_stride < 1:
        raise InvalidParameterError("snapshot_stride must be >= 1")
    grid = u0.grid
    ts = step_times(t0, t1, dt)
    incs = _linear_increment(dmap, eps, ts[:-1], ts[1:])
    incs = np.broadcast_to(incs, ts[:-1].shape)
    n_steps = ts.size - 1
    keep = sorted(set(range(0, n_steps + 1, snapshot_stride)) | {n_steps})
    values = np.empty((len(keep),) + grid.shape, dtype=complex)
    tails = np.empty(len(keep))
    masses = np.empty(len(keep))
    v = u0.values.copy()
    m0 = u0.mass()
    slot = 0
    last_good = t0
    for j in range(n_steps + 1):
        if j > 0:
            v = _step(grid, v, ts[j] - ts[j - 1], incs[j - 1], nonlinear)
        if j == keep[slot]:
            if not np.all(np.isfinite(v)):
                raise AbortedRunError(f"non-finite state at step {j}", last_good)
            mass = float(np.sum(np.abs(v) ** 2) * grid.cell_volume)
            if m0 > 0 and abs(mass - m0) / m0 > abort_drift:
                raise AbortedRunError(f"mass drift {abs(mass - m0) / m0:.3e} at step {j}", last_good)
            values[slot] = v
            masses[slot] = mass
            tails[slot] = top_octave_fraction(grid, v)
            last_good = ts[j]
            slot += 1
    tail_max = float(tails.max())
    if tail_max > TAIL_WARN:
        log.warning("top-octave energy fraction reached %.2e (eps=%g, N=%d)", tail_max, eps, grid.n)
    name = "unit" if dmap is None else dmap.name
    return Trajectory(grid, ts[keep], values, dt, eps, name, nonlinear, snapshot_stride, masses, tails)


def orbit_trajectory(Q, times) -> Trajectory:
    """Exact soliton orbit ``exp(i t) Q`` sampled at ``times``."""
    times = np.asarray(times, dtype=float)
    shape = (-1,) + (1,) * Q.grid.d
    values = np.exp(1j * times).reshape(shape) * Q.profile.values[None]
    return Trajectory(Q.grid, times, values, 0.0, 0.0, "orbit", True, 1)


def _cubic(v):
    return np.abs(v) ** 2 * v


def _resolve_map(dmap):
    return UNIT if dmap is None else dmap


def duhamel_residual(traj: Trajectory, dmap=None, eps=1.0, n_quad=None, n_check=8):
    """Max relative mismatch between snapshots and the Duhamel integral form.

    ``u(t) = exp(i G(t,t0) Lap) u(t0) + i int_{t0}^t exp(i G(t,s) Lap) |u|^2 u(s) ds``,
    with the ``s`` integral by composite trapezoid over ``n_quad`` evenly
    subsampled snapshots (default: all). Checked at ``n_check`` nodes spread
    over the run, always including the last.
    """
    n = len(traj)
    n_quad = n if n_quad is None else int(n_quad)
    if n_quad < 2 or n_quad > n or (n - 1) % (n_quad - 1):
        raise InsufficientSnapshotsError(f"cannot take {n_quad} evenly spaced nodes from {n} snapshots")
    sub = (n - 1) // (n_quad - 1)
    idx = np.arange(0, n, sub)
    times = traj.times[idx]
    grid = traj.grid
    dmap = _resolve_map(dmap)
    G = _linear_increment(dmap, eps, traj.times[0], times)
    xi2 = grid.xi2
    checks = set(np.unique(np.linspace(1, n_quad - 1, min(n_check, n_quad - 1)).round().astype(int)))
    u0h = fft(grid, traj.values[idx[0]])
    acc = np.zeros(grid.shape, dtype=complex)
    prev = None
    worst = 0.0
    for k in range(n_quad):
        if traj.nonlinear:
            cur = np.exp(1j * G[k] * xi2) * fft(grid, _cubic(traj.values[idx[k]]))
            if prev is not None:
                acc += 0.5 * (times[k] - times[k - 1]) * (prev + cur)
            prev = cur
        if k in checks:
            rhs = np.exp(-1j * G[k] * xi2) * (u0h + 1j * acc)
            u = traj.values[idx[k]]
            err = np.linalg.norm((ifft(grid, rhs) - u).ravel()) / np.linalg.norm(u.ravel())
            worst = max(worst, float(err))
    return worst


@dataclass(frozen=True)
class DecompositionTerms:
    transported: float  # exp(i G(t,t0) Lap)[u_eps(t0) - u(t0)]
    propagator_gap: float  # [exp(i G(t,t0) Lap) - exp(i (t-t0) Lap)] u(t0)
    nonlinear_gap: float  # i int exp(i G(t,s) Lap)[F(u_eps) - F(u)] ds
    source_gap: float  # i int [exp(i G(t,s) Lap) - exp(i (t-s) Lap)] F(u) ds
    direct: float  # ||u_eps(t) - u(t)||
    mismatch: float  # ||sum of terms - (u_eps(t) - u(t))|| / direct

    def as_tuple(self):
        return (self.transported, self.propagator_gap, self.nonlinear_gap, self.source_gap)


def _l2(grid, coeffs):
    # unitary transform: coefficient 2-norm is the grid L2 norm
    return float(np.linalg.norm(coeffs.ravel()))


def _index_of(times, t):
    k = int(np.argmin(np.abs(times - t)))
    if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise InsufficientSnapshotsError(f"no snapshot at t = {t}")
    return k


def decomposition_diagnostics(traj_eps: Trajectory, traj_ref: Trajectory, t0, t, dmap, eps) -> DecompositionTerms:
    """Four-term Duhamel splitting of ``u_eps(t) - u(t)`` started at ``t0``."""
    if traj_eps.grid != traj_ref.grid:
        raise InvalidFieldError("trajectories live on different grids")
    if len(traj_eps) != len(traj_ref) or not np.allclose(traj_eps.times, traj_ref.times, rtol=0, atol=1e-12):
        raise InsufficientSnapshotsError("trajectories must share snapshot times")
    grid = traj_eps.grid
    xi2 = grid.xi2
    times = traj_eps.times
    i0, i1 = _index_of(times, t0), _index_of(times, t)
    t0, t = times[i0], times[i1]
    dmap = _resolve_map(dmap)
    ue = traj_eps.values
    ur = traj_ref.values
    g_t = _linear_increment(dmap, eps, t0, t)
    lin_eps = np.exp(-1j * g_t * xi2)
    lin_ref = np.exp(-1j * (t - t0) * xi2)
    term1 = lin_eps * fft(grid, ue[i0] - ur[i0])
    term2 = (lin_eps - lin_ref) * fft(grid, ur[i0])
    term3 = np.zeros(grid.shape, dtype=complex)
    term4 = np.zeros(grid.shape, dtype=complex)
    step = 1 if i1 >= i0 else -1
    nodes = list(range(i0, i1 + step, step))
    if len(nodes) > 1:
        s = times[nodes]
        w = np.zeros(len(nodes))
        ds = np.diff(s)
        w[:-1] += ds / 2
        w[1:] += ds / 2
        G_ts = _linear_increment(dmap, eps, s, t)
        for wk, sk, gk, k in zip(w, s, np.broadcast_to(G_ts, s.shape), nodes):
            f_ref = fft(grid, _cubic(ur[k]))
            f_eps = fft(grid, _cubic(ue[k]))
            prop_eps = np.exp(-1j * gk * xi2)
            term3 += wk * prop_eps * (f_eps - f_ref)
            term4 += wk * (prop_eps - np.exp(-1j * (t - sk) * xi2)) * f_ref
    term3 *= 1j
    term4 *= 1j
    direct = fft(grid, ue[i1] - ur[i1])
    total = term1 + term2 + term3 + term4
    dnorm = _l2(grid, direct)
    mismatch = _l2(grid, total - direct) / dnorm if dnorm > 0 else _l2(grid, total - direct)
    return DecompositionTerms(_l2(grid, term1), _l2(grid, term2), _l2(grid, term3), _l2(grid, term4), dnorm, mismatch)
