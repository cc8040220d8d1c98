"""supbound: numerical laboratory for the sharp pointwise bound

    sup |u|  <=  (2 pi)^(-1/2) ( ||grad u|| ||lap u|| )^(1/2)

for functions with zero boundary values on open sets in R^3, together with
its constructive ingredients (eigen-span quotient maximization, Helmholtz
Green-function bounds, the radial extremal family) and its application to
a priori energy bounds for the 3D Burgers equation.
"""

from .burgers import (
    BoundMonitor,
    BurgersState,
    blowup_horizon,
    comparison_ode_oracle,
    energy_identity_residual,
    monitor_bounds,
    simulate,
    step,
)
from .eigen import DEFAULT_SEED, EigenPair, check_corollary2, compute_eigenpairs
from .extremal import (
    RadialProfile,
    cutoff_sequence,
    embed_in_domain,
    extremal_value,
    radial_integrals,
    uncut_profile,
)
from .green import GreenSolution, check_l2_bound, check_pointwise_bound, parseval_partial_sums, solve_green
from .grid import (
    ScalarField,
    Shape,
    VectorField3,
    VoxelDomain,
    build_domain,
    grad_norm_sq,
    l2_inner,
    l2_norm,
    l2_norm_sq,
    laplacian,
    sup_norm,
    unit_box,
)
from .quotient import (
    SHARP_CONSTANT,
    QuotientResult,
    brute_force_maximize,
    maximize_over_span,
    quotient,
    step2_chain_check,
    vector_quotient,
)

__version__ = "0.1.0"

__all__ = [
    "BoundMonitor",
    "BurgersState",
    "DEFAULT_SEED",
    "EigenPair",
    "GreenSolution",
    "QuotientResult",
    "RadialProfile",
    "SHARP_CONSTANT",
    "ScalarField",
    "Shape",
    "VectorField3",
    "VoxelDomain",
    "blowup_horizon",
    "brute_force_maximize",
    "build_domain",
    "check_corollary2",
    "check_l2_bound",
    "check_pointwise_bound",
    "comparison_ode_oracle",
    "compute_eigenpairs",
    "cutoff_sequence",
    "embed_in_domain",
    "energy_identity_residual",
    "extremal_value",
    "grad_norm_sq",
    "l2_inner",
    "l2_norm",
    "l2_norm_sq",
    "laplacian",
    "maximize_over_span",
    "monitor_bounds",
    "parseval_partial_sums",
    "quotient",
    "radial_integrals",
    "simulate",
    "solve_green",
    "step",
    "step2_chain_check",
    "sup_norm",
    "unit_box",
    "uncut_profile",
    "vector_quotient",
]
