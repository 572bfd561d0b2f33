"""Ground state of ``-Q + Laplacian(Q) = -Q**3`` by Petviashvili iteration."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, NumericalFailureError
from .spectral_grid import Field, SpectralGrid, fft, laplacian

log = logging.getLogger(__name__)

DEFAULT_TOL = {1: 1e-10, 2: 1e-9, 3: 1e-8}
EXPONENT = 1.5  # p / (p - 1) for the cubic power p = 3


@dataclass(frozen=True, eq=False)
class GroundState:
    profile: Field
    residual: float
    mass: float
    tol: float
    iterations: int
    stabilizer: float
    residual_history: tuple = field(default=(), repr=False)

    @property
    def grid(self):
        return self.profile.grid

    def metadata(self):
        r1, r2 = certify_identities(self)
        return {
            "grid": self.grid.describe(),
            "residual": self.residual,
            "mass": self.mass,
            "tol": self.tol,
            "iterations": self.iterations,
            "stabilizer": self.stabilizer,
            "r1": r1,
            "r2": r2,
        }


def residual_norm(grid, q):
    """Grid L2 norm of ``Laplacian(Q) - Q + Q**3``."""
    res = laplacian(grid, q) - q + np.abs(q) ** 2 * q
    return float(np.sqrt(np.sum(np.abs(res) ** 2) * grid.cell_volume))


def gaussian_seed(grid, center=None):
    center = np.zeros(grid.d) if center is None else np.asarray(center, dtype=float)
    r2 = sum((c - x0) ** 2 for c, x0 in zip(grid.mesh(), center))
    return np.exp(-r2) * np.ones(grid.shape)


def petviashvili_solve(grid: SpectralGrid, tol=None, max_iter=2000, seed=None) -> GroundState:
    """Iterate ``Q_hat <- M**1.5 * (Q**3)_hat / (1 + |xi|^2)`` from a Gaussian seed.

    ``M = <(1+|xi|^2) Q_hat, Q_hat> / <(Q**3)_hat, Q_hat>`` tends to one at the
    fixed point. Stops once both the residual and ``|M - 1|`` are below ``tol``.
    """
    tol = DEFAULT_TOL[grid.d] if tol is None else tol
    symbol = 1.0 + grid.xi2
    q = gaussian_seed(grid) if seed is None else np.asarray(seed, dtype=float).reshape(grid.shape)
    qh = np.fft.fftn(q)
    history = []
    res = np.inf
    m = np.nan
    for it in range(1, max_iter + 1):
        q = np.fft.ifftn(qh).real
        nh = np.fft.fftn(q**3)
        num = np.sum(symbol * np.abs(qh) ** 2)
        den = np.real(np.sum(nh * np.conj(qh)))
        if not np.isfinite(num) or not np.isfinite(den) or den == 0:
            raise NumericalFailureError("Petviashvili stabilizer is not finite", it)
        m = num / den
        qh = m**EXPONENT * nh / symbol
        q = np.fft.ifftn(qh).real
        if not np.all(np.isfinite(q)):
            raise NumericalFailureError("NaN in Petviashvili iterate", it)
        res = residual_norm(grid, q)
        history.append(res)
        if res <= tol and abs(m - 1.0) <= tol:
            break
    else:
        raise DivergenceError(f"Petviashvili did not converge in {max_iter} iterations", res)
    profile = Field(grid, q)
    log.debug("ground state d=%d N=%d: %d iterations, residual %.3e", grid.d, grid.n, it, res)
    return GroundState(profile, res, profile.mass(), tol, it, float(m), tuple(history))


def soliton_orbit(Q: GroundState, t) -> Field:
    return Field(Q.grid, np.exp(1j * t) * Q.profile.values)


def _integrals(grid, q):
    dv = grid.cell_volume
    grad2 = float(np.sum(grid.xi2 * np.abs(fft(grid, q)) ** 2))
    mass = float(np.sum(np.abs(q) ** 2) * dv)
    quart = float(np.sum(np.abs(q) ** 4) * dv)
    return grad2, mass, quart


def identity_residuals(grid, q):
    """Relative residuals of the energy and Pohozaev identities for a profile array."""
    d = grid.d
    grad2, mass, quart = _integrals(grid, q)
    r1 = abs(-grad2 - mass + quart) / quart
    r2 = abs((d - 2) / 2 * grad2 + d / 2 * mass - d / 4 * quart) / quart
    return r1, r2


def certify_identities(Q: GroundState):
    return identity_residuals(Q.grid, Q.profile.values)


def profile_from_field(f: Field, tol=np.inf, iterations=0):
    """Wrap a stored profile (e.g. loaded from disk) as a GroundState."""
    q = f.values.real
    return GroundState(Field(f.grid, q), residual_norm(f.grid, q), f.mass(), tol, iterations, 1.0)


__all__ = [
    "GroundState",
    "petviashvili_solve",
    "soliton_orbit",
    "certify_identities",
    "identity_residuals",
    "residual_norm",
    "gaussian_seed",
    "profile_from_field",
]
