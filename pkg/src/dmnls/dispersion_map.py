"""Piecewise-constant, 1-periodic, mean-one dispersion profiles.

The accumulated dispersion ``Gamma_eps(t0, t) = int_{t0}^{t} gamma(tau/eps) dtau``
is evaluated in closed form: whole periods contribute ``eps * mean`` each and the
two fractional ends are read off the within-period primitive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import AdmissibilityError, InvalidParameterError

MEAN_TOL = 1e-12


@dataclass(frozen=True)
class DispersionMap:
    breakpoints: tuple  # 0 = tau_0 < ... < tau_m = 1
    values: tuple
    name: str = "custom"

    @property
    def mean(self):
        return float(sum(v * (b - a) for v, a, b in zip(self.values, self.breakpoints, self.breakpoints[1:])))

    @property
    def gamma_min(self):
        return min(abs(v) for v in self.values)

    @property
    def gamma_max(self):
        return max(abs(v) for v in self.values)

    @property
    def is_unit(self):
        return len(self.values) == 1 and self.values[0] == 1.0

    @cached_property
    def _tau(self):
        return np.asarray(self.breakpoints, dtype=float)

    @cached_property
    def _gam(self):
        return np.asarray(self.values, dtype=float)

    @cached_property
    def _primitive(self):
        # C(tau_j) = int_0^{tau_j} gamma
        return np.concatenate([[0.0], np.cumsum(self._gam * np.diff(self._tau))])

    def primitive(self, sigma):
        """``int_0^sigma gamma`` for ``sigma`` in ``[0, 1]`` (vectorized)."""
        sigma = np.asarray(sigma, dtype=float)
        j = np.clip(np.searchsorted(self._tau, sigma, side="right") - 1, 0, len(self.values) - 1)
        return self._primitive[j] + self._gam[j] * (sigma - self._tau[j])

    def segments(self):
        """``(length, value)`` pairs, the config-file representation."""
        return [(b - a, v) for v, a, b in zip(self.values, self.breakpoints, self.breakpoints[1:])]

    def is_symmetric(self, tol=1e-14):
        """True when ``gamma(1 - s) == gamma(s)`` almost everywhere."""
        lengths = [b - a for a, b in zip(self.breakpoints, self.breakpoints[1:])]
        return all(
            abs(l1 - l2) <= tol and v1 == v2
            for l1, l2, v1, v2 in zip(lengths, lengths[::-1], self.values, self.values[::-1])
        )


def validate_admissible(segments, name="custom"):
    """Build a DispersionMap from ``(length, value)`` pairs or reject it.

    Lengths must be positive and sum to one; every value must be nonzero and
    finite; the mean must equal one to within ``MEAN_TOL``. Nothing is rescaled.
    """
    segments = [(float(l), float(v)) for l, v in segments]
    if not segments:
        raise AdmissibilityError("empty", "segment list is empty")
    for i, (length, value) in enumerate(segments):
        if not (math.isfinite(length) and length > 0):
            raise AdmissibilityError("coverage", f"segment {i} has nonpositive length {length}")
        if not math.isfinite(value):
            raise AdmissibilityError("bounded", f"segment {i} value {value} is not finite")
        if value == 0.0:
            raise AdmissibilityError("zero-value", f"segment {i} has value 0, so 1/gamma is unbounded")
    total = math.fsum(l for l, _ in segments)
    if abs(total - 1.0) > MEAN_TOL:
        raise AdmissibilityError("coverage", f"segment lengths sum to {total!r}, not 1")
    bps = [0.0]
    acc = 0.0
    for length, _ in segments[:-1]:
        acc += length
        bps.append(acc)
    bps.append(1.0)
    if any(b <= a for a, b in zip(bps, bps[1:])):
        raise AdmissibilityError("coverage", "breakpoints are not strictly increasing")
    mean = math.fsum(l * v for l, v in segments)
    if abs(mean - 1.0) > MEAN_TOL:
        raise AdmissibilityError("mean", f"mean dispersion is {mean!r}, expected 1")
    return DispersionMap(tuple(bps), tuple(v for _, v in segments), name)


UNIT = validate_admissible([(1.0, 1.0)], name="unit")
TWO_PIECE = validate_admissible([(0.5, 3.0), (0.5, -1.0)], name="two-piece")
SYMMETRIC = validate_admissible([(0.25, -1.0), (0.5, 3.0), (0.25, -1.0)], name="symmetric")
THREE_PIECE = validate_admissible([(0.375, 2.0), (0.375, 2.0), (0.25, -2.0)], name="three-piece")

NAMED_MAPS = {m.name: m for m in (UNIT, TWO_PIECE, SYMMETRIC, THREE_PIECE)}


def named_map(name: str) -> DispersionMap:
    """Look up a named map; underscores and case are ignored."""
    key = name.strip().lower().replace("_", "-")
    if key not in NAMED_MAPS:
        raise KeyError(f"unknown map {name!r}; known: {', '.join(sorted(NAMED_MAPS))}")
    return NAMED_MAPS[key]


def gamma_at(dmap: DispersionMap, t):
    """Right-continuous value of ``gamma(t mod 1)``; vectorized over ``t``."""
    frac = np.mod(np.asarray(t, dtype=float), 1.0)
    j = np.clip(np.searchsorted(dmap._tau, frac, side="right") - 1, 0, len(dmap.values) - 1)
    out = dmap._gam[j]
    return float(out) if out.ndim == 0 else out


def _split(x):
    fl = np.floor(x)
    return fl, x - fl


def Gamma(dmap: DispersionMap, eps, t0, t):
    """Exact ``int_{t0}^{t} gamma(tau/eps) dtau``; broadcasts over ``t0`` and ``t``."""
    if not eps > 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    t0 = np.asarray(t0, dtype=float)
    t = np.asarray(t, dtype=float)
    if dmap.is_unit:
        out = t - t0
    else:
        # integrate from the smaller endpoint so antisymmetry holds bit for bit
        lo, hi = np.minimum(t0, t), np.maximum(t0, t)
        fa, ra = _split(lo / eps)
        fb, rb = _split(hi / eps)
        out = eps * ((fb - fa) * dmap.mean + dmap.primitive(rb) - dmap.primitive(ra))
        out = np.where(t >= t0, out, -out)
    return float(out) if out.ndim == 0 else out


def gamma_deviation_sup(dmap: DispersionMap, eps, T_max, samples=16):
    """``max |Gamma(0, t) - t|`` over ``t`` in ``[0, T_max]``.

    Sampled on ``samples`` uniform points per eps-period plus every breakpoint
    image ``eps*(j + tau_i)`` and ``T_max`` itself; the deviation is piecewise
    linear in ``t`` so its extremum sits on one of those points.
    """
    if not eps > 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    if not T_max > 0 or samples < 1:
        raise InvalidParameterError("T_max must be positive and samples >= 1")
    if dmap.is_unit:
        return 0.0
    periods = int(math.ceil(T_max / eps))
    phases = np.union1d(np.arange(samples) / samples, dmap._tau)
    j = np.arange(periods + 1)[:, None]
    t = (eps * (j + phases[None, :])).ravel()
    t = np.append(t[t <= T_max], T_max)
    return float(np.max(np.abs(Gamma(dmap, eps, 0.0, t) - t)))


def one_period_extremum(dmap: DispersionMap):
    """``sup_{sigma in [0,1]} |int_0^sigma (gamma - 1)|`` from the breakpoint primitive."""
    return float(np.max(np.abs(dmap._primitive - dmap._tau)))
