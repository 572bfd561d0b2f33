"""Pseudospectral solver and verification harness for the dispersion-managed cubic NLS
``i u_t + gamma(t/eps) Lap u = -|u|^2 u`` in the fast dispersion management regime."""

__version__ = "0.1.0"

from .dispersion_map import (  # noqa: E402
    NAMED_MAPS,
    named_map,
    DispersionMap,
    Gamma,
    gamma_at,
    gamma_deviation_sup,
    validate_admissible,
)
from .evolution import Trajectory, decomposition_diagnostics, duhamel_residual, evolve, strang_step  # noqa: E402
from .ground_state import GroundState, certify_identities, petviashvili_solve, soliton_orbit  # noqa: E402
from .norms import lebesgue_norm, sobolev_norm, strichartz_norm, trajectory_difference_norm  # noqa: E402
from .propagators import (  # noqa: E402
    AdmissiblePair,
    dm_propagator,
    free_propagator,
    propagator_difference_norm,
    uniform_strichartz_ratio,
)
from .spectral_grid import Field, SpectralGrid, apply_multiplier, forward_transform, inverse_transform  # noqa: E402
