"""Exact linear flows and space-time measurements of their differences."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dispersion_map import Gamma
from .errors import InvalidParameterError
from .spectral_grid import Field, InhomogeneousFractional, Phase, apply_multiplier, fft

PAIR_TOL = 1e-12


@dataclass(frozen=True)
class AdmissiblePair:
    """Exponents with ``2/q + d/r = d/2`` and ``q > 2``; ``q = inf`` allowed.

    ``d`` is the dimension the scaling is checked in. It defaults to 3 so the
    (10/3, 10/3) pair used by the S^s norm is accepted; measurements on lower
    dimensional grids keep that pair as a nominal choice.
    """

    q: float
    r: float
    d: int = 3

    def __post_init__(self):
        q, r = float(self.q), float(self.r)
        if not q > 2:
            raise InvalidParameterError(f"q must exceed 2, got {q}")
        if not (2 <= r < math.inf):
            raise InvalidParameterError(f"r must lie in [2, inf), got {r}")
        if abs(2 / q + self.d / r - self.d / 2) > PAIR_TOL:
            raise InvalidParameterError(f"(q, r) = ({q}, {r}) violates 2/q + {self.d}/r = {self.d}/2")

    def predicted_rate(self, theta):
        """Exponent ``(1 - 2/q) * theta / 2`` of the propagator-difference bound."""
        return (1.0 - 2.0 / self.q) * theta / 2.0


STRICHARTZ_PAIR = AdmissiblePair(10 / 3, 10 / 3)


def free_propagator(f: Field, theta) -> Field:
    return apply_multiplier(f, Phase(theta))


def dm_propagator(f: Field, dmap, eps, t0, t) -> Field:
    return free_propagator(f, Gamma(dmap, eps, t0, t))


def default_time_samples(T, eps, per_unit=256, per_period=64):
    """Samples on ``[0, T]`` (endpoints included): the finer of 256/unit time and 64/eps-period.

    The integrand has a kink at every breakpoint image, so the trapezoid error
    falls like ``per_period**-2``; 64 keeps it near 3e-4 relative.
    """
    intervals = max(math.ceil(per_unit * T), math.ceil(per_period * T / eps))
    return intervals + 1


def _space_norms(grid, coeffs, r):
    """``L^r_x`` norms of each entry of a stack of spectral coefficients."""
    coeffs = coeffs.reshape((-1,) + grid.shape)
    axes = tuple(range(1, coeffs.ndim))
    vals = np.fft.ifftn(coeffs, axes=axes, norm="ortho") * grid.h ** (-grid.d / 2)
    return (np.sum(np.abs(vals) ** r, axis=axes) * grid.cell_volume) ** (1.0 / r)


def time_norm(values, times, q):
    """Composite trapezoid ``(int |g|^q dt)^(1/q)``; ``q = inf`` is the max."""
    values = np.abs(np.asarray(values, dtype=float))
    if math.isinf(q):
        return float(values.max())
    return float(np.trapezoid(values**q, times) ** (1.0 / q))


def _chunks(n, size):
    for start in range(0, n, size):
        yield slice(start, min(n, start + size))


def _chunk_size(grid):
    return max(1, 2**22 // grid.size)


def _difference_series(phi: Field, dmap, eps, pair, times):
    grid = phi.grid
    ph = fft(grid, phi.values)
    xi2 = grid.xi2
    G = Gamma(dmap, eps, 0.0, times)
    out = np.empty(times.size)
    for sl in _chunks(times.size, _chunk_size(grid)):
        g = np.reshape(G[sl], (-1,) + (1,) * grid.d)
        t = np.reshape(times[sl], (-1,) + (1,) * grid.d)
        diff = (np.exp(-1j * g * xi2) - np.exp(-1j * t * xi2)) * ph
        out[sl] = _space_norms(grid, diff, pair.r)
    return out


def propagator_difference_norm(phi: Field, dmap, eps, pair: AdmissiblePair, T=1.0, n_t=None):
    """``||(exp(i Gamma_eps(t,0) Lap) - exp(i t Lap)) phi||_{L^q_t L^r_x([0,T])}``."""
    if not isinstance(pair, AdmissiblePair):
        raise InvalidParameterError("pair must be an AdmissiblePair")
    if not T > 0:
        raise InvalidParameterError(f"T must be positive, got {T}")
    n_t = default_time_samples(T, eps) if n_t is None else int(n_t)
    if n_t < 64:
        raise InvalidParameterError(f"need at least 64 time samples, got {n_t}")
    times = np.linspace(0.0, T, n_t)
    if dmap.is_unit:
        return 0.0
    return time_norm(_difference_series(phi, dmap, eps, pair, times), times, pair.q)


def uniform_strichartz_ratio(phi: Field, dmap, eps, pair: AdmissiblePair, T=1.0, n_t=None):
    """``||exp(i Gamma_eps(t,0) Lap) phi||_{L^q_t L^r_x([0,T])} / ||phi||_{L^2}``."""
    norm0 = phi.l2_norm()
    if norm0 == 0:
        raise InvalidParameterError("uniform Strichartz ratio of the zero field is undefined")
    n_t = default_time_samples(T, eps) if n_t is None else int(n_t)
    times = np.linspace(0.0, T, n_t)
    grid = phi.grid
    ph = fft(grid, phi.values)
    G = Gamma(dmap, eps, 0.0, times)
    series = np.empty(n_t)
    for sl in _chunks(n_t, _chunk_size(grid)):
        g = np.reshape(G[sl], (-1,) + (1,) * grid.d)
        series[sl] = _space_norms(grid, np.exp(-1j * g * grid.xi2) * ph, pair.r)
    return time_norm(series, times, pair.q) / norm0


def _filon_increments(phase):
    """Exact ``int_a^b exp(i*phase(s)) ds / (b - a)`` for a phase linear on ``[a, b]``.

    ``phase`` has shape ``(2, ...)`` holding the endpoint phases.
    """
    dphi = phase[1] - phase[0]
    small = np.abs(dphi) < 1e-6
    safe = np.where(small, 1.0, dphi)
    exact = (np.exp(1j * phase[1]) - np.exp(1j * phase[0])) / (1j * safe)
    series = np.exp(1j * phase[0]) * (1 + 0.5j * dphi - dphi**2 / 6)
    return np.where(small, series, exact)


def inhomogeneous_difference_norm(profile: Field, dmap, eps, pair: AdmissiblePair, T=1.0, n_t=None,
                                  frequency=1.0):
    """``|| int_0^t [exp(i Gamma(t,s) Lap) - exp(i (t-s) Lap)] F(s) ds ||_{L^q_t L^r_x}``
    for the source ``F(s) = exp(i * frequency * s) * profile``.

    The s-integral is accumulated exactly between samples on which the phase
    ``Gamma(s,0)|xi|^2 + s`` is linear (breakpoint images land on samples when
    the default sample count is used).
    """
    n_t = default_time_samples(T, eps) if n_t is None else int(n_t)
    if n_t < 64:
        raise InvalidParameterError(f"need at least 64 time samples, got {n_t}")
    grid = profile.grid
    fh = fft(grid, profile.values)
    xi2 = grid.xi2
    times = np.linspace(0.0, T, n_t)
    G = Gamma(dmap, eps, 0.0, times)
    acc_dm = np.zeros(grid.shape, dtype=complex)
    acc_free = np.zeros(grid.shape, dtype=complex)
    series = np.zeros(n_t)
    for k in range(1, n_t):
        ds = times[k] - times[k - 1]
        # exp(i Gamma(t,s) Lap) = exp(-i (G(t) - G(s)) |xi|^2)
        ph_dm = np.stack([G[k - 1] * xi2 + frequency * times[k - 1], G[k] * xi2 + frequency * times[k]])
        ph_free = np.stack([times[k - 1] * xi2 + frequency * times[k - 1], times[k] * xi2 + frequency * times[k]])
        acc_dm += ds * _filon_increments(ph_dm)
        acc_free += ds * _filon_increments(ph_free)
        diff = (np.exp(-1j * G[k] * xi2) * acc_dm - np.exp(-1j * times[k] * xi2) * acc_free) * fh
        series[k] = _space_norms(grid, diff, pair.r)[0]
    return time_norm(series, times, pair.q)


def filtered_data(grid, theta, seed="gaussian"):
    """Test datum ``<grad>^(-theta) psi`` for a fixed seed ``psi``.

    ``"gaussian"`` is ``exp(-|x|^2)``; ``"indicator"`` is the indicator of the
    unit ball, a rough seed sitting just below H^(1/2).
    """
    r2 = np.broadcast_to(grid.r2, grid.shape)
    if seed == "gaussian":
        psi = np.exp(-r2)
    elif seed == "indicator":
        psi = (r2 < 1.0).astype(float)
    else:
        raise InvalidParameterError(f"unknown seed {seed!r}")
    return apply_multiplier(Field(grid, psi), InhomogeneousFractional(-theta))
