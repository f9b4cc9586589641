"""Numerical laboratory for radial energy-critical waves outside a ball.

Submodules:
    field_core        grids, states, trajectories, energies
    linear_radiation  radiation profiles and the free evolution
    spacetime_norms   region-restricted Y norms and dyadic channel sums
    nonlinear_evolve  leapfrog evolution, exterior problems, convergence
    scatter_analysis  profile extraction and characteristic numbers
    family_construct  fixed-point constructions of scattering families
    nonradiative_ode  the stationary branch: tails, inward integration
    serialize         CSV / JSON artifact formats
    cli_runner        the exterior-wave-lab command line
"""

from .errors import (
    ConfigError,
    ContractViolation,
    NumericalFailure,
    UnsupportedOperation,
)
from .family_construct import (
    DEFAULT_SMALLNESS,
    ConstructAlphaResult,
    ConstructPrimaryResult,
    construct_alpha,
    construct_primary,
)
from .field_core import (
    BlowupReport,
    RadialGrid,
    RadialState,
    Trajectory,
    conserved_energy,
    exterior_energy,
    integral_between,
    quad_radial,
    radial_derivative,
)
from .linear_radiation import (
    RadiationProfile,
    data_from_profile,
    linear_evolve,
    plus_profile,
    profile_energy,
    profile_from_data,
    random_smooth_profile,
)
from .nonlinear_evolve import (
    ConvergenceReport,
    Nonlinearity,
    duhamel_linear,
    evolve,
    evolve_exterior,
    fill_interior,
    self_convergence,
)
from .nonradiative_ode import (
    NonradiativeBranch,
    TailResult,
    branch_state,
    default_R_start,
    ground_state_reference,
    integrate_inward,
    nonradiative_branch,
    radius_for_target,
    static_evolution_check,
    tail_energy,
    tail_fixed_point,
)
from .scatter_analysis import (
    PROFILE_SOURCE_CONSTANT,
    CharacteristicNumber,
    ProfileEstimate,
    ResidualCurve,
    VerdictConfig,
    characteristic_number,
    equiv_residual,
    extract_profile,
    scattering_verdict,
    time_slice,
)
from .spacetime_norms import (
    ChannelNorms,
    RegionSpec,
    dyadic_channel_norms,
    source_l1l2_norm,
    y_norm,
)

__version__ = "0.1.0"

__all__ = [
    "BlowupReport",
    "ChannelNorms",
    "CharacteristicNumber",
    "ConfigError",
    "ConstructAlphaResult",
    "ConstructPrimaryResult",
    "ContractViolation",
    "ConvergenceReport",
    "DEFAULT_SMALLNESS",
    "NumericalFailure",
    "Nonlinearity",
    "NonradiativeBranch",
    "PROFILE_SOURCE_CONSTANT",
    "ProfileEstimate",
    "RadialGrid",
    "RadialState",
    "RadiationProfile",
    "RegionSpec",
    "ResidualCurve",
    "TailResult",
    "Trajectory",
    "UnsupportedOperation",
    "VerdictConfig",
    "branch_state",
    "characteristic_number",
    "conserved_energy",
    "construct_alpha",
    "construct_primary",
    "data_from_profile",
    "default_R_start",
    "duhamel_linear",
    "dyadic_channel_norms",
    "equiv_residual",
    "evolve",
    "evolve_exterior",
    "exterior_energy",
    "extract_profile",
    "fill_interior",
    "ground_state_reference",
    "integral_between",
    "integrate_inward",
    "linear_evolve",
    "nonradiative_branch",
    "plus_profile",
    "profile_energy",
    "profile_from_data",
    "quad_radial",
    "radial_derivative",
    "radius_for_target",
    "random_smooth_profile",
    "scattering_verdict",
    "self_convergence",
    "source_l1l2_norm",
    "static_evolution_check",
    "tail_energy",
    "tail_fixed_point",
    "time_slice",
    "y_norm",
]
