"""Optimal uncoded cache placement for coded caching under nonuniform popularity.

The library computes the minimum-average-rate cache placement from
closed-form candidates, certifies it against an independent LP solver,
simulates the XOR multicast delivery bit-exactly, and evaluates converse
bounds and subpacketization levels.
"""

from .bounds import (
    BoundReport,
    BoundScheme,
    bound_exhaustive,
    bound_generic,
    bound_prior,
    bound_proposed,
    bound_two_group,
    bound_value,
    merge_count,
)
from .delivery import (
    DeliveryTranscript,
    FileLibrary,
    MonteCarloResult,
    PlacementRealization,
    decode,
    minimal_file_size,
    monte_carlo_rate,
    random_library,
    realize,
    sample_demands,
    serve,
)
from .errors import (
    BinomialRangeError,
    CodedCacheError,
    DecodeError,
    DimensionMismatchError,
    InfeasibleCaseError,
    InstanceTooLargeError,
    InvalidDistributionError,
    InvalidFileSizeError,
    InvalidParameterError,
    PopularityFirstError,
    SolverStalledError,
)
from .lp_oracle import (
    CertificationReport,
    LinearProgram,
    LpSolution,
    StructuralReport,
    build_p2,
    certify,
)
from .lp_oracle import solve as solve_lp
from .placement import (
    FileGroupReport,
    PlacementMatrix,
    RateCoefficients,
    SubpacketizationReport,
    analyze_groups,
    average_rate,
    binom_ext,
    rate_coefficients,
    subpacketization,
    worst_case_subpacketization_bound,
)
from .popularity import (
    OrderStatTable,
    PopularityModel,
    make_custom,
    make_step,
    make_zipf,
    order_stats,
)
from .popularity import from_spec as popularity_from_spec
from .solver import (
    CandidateSolution,
    PlacementCase,
    algorithm1,
    algorithm2,
    algorithm3,
    algorithm4,
    case2i_placement,
    case2ii_placement,
    one_group_placement,
)

__version__ = "0.1.0"

__all__ = [
    "BinomialRangeError",
    "BoundReport",
    "BoundScheme",
    "CandidateSolution",
    "CertificationReport",
    "CodedCacheError",
    "DecodeError",
    "DeliveryTranscript",
    "DimensionMismatchError",
    "FileGroupReport",
    "FileLibrary",
    "InfeasibleCaseError",
    "InstanceTooLargeError",
    "InvalidDistributionError",
    "InvalidFileSizeError",
    "InvalidParameterError",
    "LinearProgram",
    "LpSolution",
    "MonteCarloResult",
    "OrderStatTable",
    "PlacementCase",
    "PlacementMatrix",
    "PlacementRealization",
    "PopularityFirstError",
    "PopularityModel",
    "RateCoefficients",
    "SolverStalledError",
    "StructuralReport",
    "SubpacketizationReport",
    "algorithm1",
    "algorithm2",
    "algorithm3",
    "algorithm4",
    "analyze_groups",
    "average_rate",
    "binom_ext",
    "bound_exhaustive",
    "bound_generic",
    "bound_prior",
    "bound_proposed",
    "bound_two_group",
    "bound_value",
    "build_p2",
    "case2i_placement",
    "case2ii_placement",
    "certify",
    "decode",
    "make_custom",
    "make_step",
    "make_zipf",
    "merge_count",
    "minimal_file_size",
    "monte_carlo_rate",
    "one_group_placement",
    "order_stats",
    "popularity_from_spec",
    "random_library",
    "rate_coefficients",
    "realize",
    "sample_demands",
    "serve",
    "solve_lp",
    "subpacketization",
    "worst_case_subpacketization_bound",
]
