"""Divisible-good allocation under curved (CES) welfare.

Solve for the welfare-maximizing allocation, build the convex pricing rule
whose equilibrium is that optimum, certify equilibria by their first-order
residuals, run the single-good truthful mechanism, measure Sybil-proofness,
convert to budget (Fisher) markets, and reproduce the boundary cases where
supporting prices cannot exist.
"""

from .errors import (
    BadBid,
    BadMultiplicity,
    BadParameter,
    BadRho,
    BoundaryGradient,
    CesMarketError,
    DidNotConverge,
    DimensionMismatch,
    DomainError,
    EmptyInput,
    InconsistentMultipliers,
    InstanceFormatError,
    NotDifferentiable,
    NotEquilibrium,
    NotLeontief,
    QuadratureFailure,
    TooLarge,
    UnsupportedDegree,
    UnsupportedValuation,
)
from .valuations import (
    CesForm,
    CobbDouglas,
    Leontief,
    Linear,
    Power,
    Valuation,
    euler_residual,
    from_json as valuation_from_json,
    gradient,
    value,
)
from .welfare import (
    WelfareParams,
    ces_objective,
    ces_welfare,
    nash_objective,
    objective_and_gradient_via_val_gradients,
)
from .solver import (
    Instance,
    LeontiefResult,
    SolveResult,
    as_allocation,
    closed_form_single_good,
    extract_multipliers,
    grid_oracle,
    kkt_residual,
    solve_ces,
    solve_leontief,
)
from .pricing import (
    Certificate,
    FisherBudgets,
    PricingRule,
    demand_residual,
    equilibrium_rule,
    make_pricing_rule,
    to_fisher,
    we_certificate,
    weighted_shift_certificate,
)
from .mechanism import (
    BidProfile,
    best_response_scan,
    response_curve,
    single_bid_payment,
    truthful_allocation,
    truthful_payment,
    vcg_single_good,
)
from .sybil import (
    SweReport,
    SybilParams,
    SybilStatus,
    single_good_sybil_cap,
    swe_check,
    sybil_status,
    sybil_utility,
)
from .demos import (
    GapReport,
    ViolationReport,
    exchange_violation_demo,
    first_welfare_check,
    linear_gap_demo,
    nash_threshold_pricing,
)
from .jsonio import (
    canonical_dumps,
    instance_from_json,
    instance_to_json,
    load_instance,
    load_solution,
    save_instance,
)

__version__ = "0.1.0"

__all__ = [
    "BadBid",
    "BadMultiplicity",
    "BadParameter",
    "BadRho",
    "BidProfile",
    "BoundaryGradient",
    "Certificate",
    "CesForm",
    "CesMarketError",
    "CobbDouglas",
    "DidNotConverge",
    "DimensionMismatch",
    "DomainError",
    "EmptyInput",
    "FisherBudgets",
    "GapReport",
    "InconsistentMultipliers",
    "Instance",
    "InstanceFormatError",
    "Leontief",
    "LeontiefResult",
    "Linear",
    "NotDifferentiable",
    "NotEquilibrium",
    "NotLeontief",
    "Power",
    "PricingRule",
    "QuadratureFailure",
    "SolveResult",
    "SweReport",
    "SybilParams",
    "SybilStatus",
    "TooLarge",
    "UnsupportedDegree",
    "UnsupportedValuation",
    "Valuation",
    "ViolationReport",
    "WelfareParams",
    "as_allocation",
    "best_response_scan",
    "canonical_dumps",
    "ces_objective",
    "ces_welfare",
    "closed_form_single_good",
    "demand_residual",
    "equilibrium_rule",
    "euler_residual",
    "exchange_violation_demo",
    "extract_multipliers",
    "first_welfare_check",
    "gradient",
    "grid_oracle",
    "instance_from_json",
    "instance_to_json",
    "kkt_residual",
    "linear_gap_demo",
    "load_instance",
    "load_solution",
    "make_pricing_rule",
    "nash_objective",
    "nash_threshold_pricing",
    "objective_and_gradient_via_val_gradients",
    "response_curve",
    "save_instance",
    "single_bid_payment",
    "single_good_sybil_cap",
    "solve_ces",
    "solve_leontief",
    "swe_check",
    "sybil_status",
    "sybil_utility",
    "to_fisher",
    "truthful_allocation",
    "truthful_payment",
    "value",
    "valuation_from_json",
    "vcg_single_good",
    "we_certificate",
    "weighted_shift_certificate",
]
