"""Critical-points verification protocols, margin oracles and
Leave-One-Out dimension."""
from .critical import (
    CriticalRequest,
    CriticalResult,
    RequestError,
    critical_points,
    critical_points_verified,
    robust_critical_points,
)
from .dimension import (
    MarginClassSystem,
    SetSystem,
    brute_force_loo,
    is_witness,
    loo_dimension,
    margin_class_system,
    parse_set_system,
    robust_loo_dimension,
)
from .geometry import (
    ConstructionFailed,
    DomainError,
    VectorFamily,
    construct_margin_third,
    construct_small_margin,
    loo_bound,
    margin_of,
    nearly_orthogonal,
    robust_loo_bound,
    verify_skew_obtuse,
)
from .hypothesis import (
    FiniteClass,
    LabeledSet,
    LinearMarginClass,
    Oracle,
    OracleVerdict,
    erm_with_slack,
    max_margin,
    membership_finite,
    membership_linear_margin,
)
from .protocol import (
    AliceStrategy,
    BobStrategy,
    Document,
    Instance,
    Metrics,
    ProtocolAborted,
    Transcript,
    lower_bound_witness,
    run_error_tolerant,
    run_realizable,
    run_robust,
    withholding_check,
)
