"""sl3flows: a numerical laboratory for perturbed unipotent flows on SL(3,R)."""

from .lie_core import (
    BASIS_NAMES,
    FRAME,
    AlgebraElement,
    GroupElement,
    StructureTable,
    STRUCTURE,
    Z,
    ad_matrix,
    adjoint_matrix,
    bracket,
    decompose,
    exp_map,
    frame_element,
    heisenberg_partner,
    jordan_blocks,
    unipotent,
)
from .fields import (
    CocyclePair,
    ConditionReport,
    FieldSyntaxError,
    PerturbationData,
    ScalarField,
    TransferDomainError,
    cocycle_from_perturbation,
    cocycle_residual,
    condition_check,
    constant_field,
    directional_derivative,
    from_transfer,
    invariance_residual,
    parse_field,
)
from .flow_engine import (
    DeterminantDriftError,
    FlowSpec,
    IntegratorConfig,
    PerturbationConditionError,
    TimeChangeSignError,
    Trajectory,
    flow_constant,
    flow_perturbed,
    flow_timechange,
    flow_trajectory,
    orbit_average,
)
from .pushforward import (
    DifferentialSeries,
    FrameCoefficients,
    TimechangeDifferential,
    closed_form_W,
    closed_form_W_series,
    closed_form_Z,
    closed_form_Z_series,
    differential_matrix,
    dyadic_times,
    growth_exponent,
    integrate_pushforward,
    timechange_differential,
    ztilde_transport_residual,
)
from .shear_lab import (
    EllBounds,
    LimitDistance,
    ShearCurve,
    ZtildeFactor,
    ell_bounds,
    ell_value,
    limit_comparison,
    shear_curve,
    shear_diagnostics,
    tangent_residual,
    w_pushforward_of_ztilde,
)
from .conjugacy_lab import (
    ConjugacyMap,
    KakutaniResult,
    KakutaniSpec,
    LambdaTransferSeries,
    bracket_expansion_check,
    chain_rule_residuals,
    conjugacy_residual,
    kakutani_invariant,
    lambda_transfer_diagnostic,
    pushforward_identity_check,
    telescoping_residual,
)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
