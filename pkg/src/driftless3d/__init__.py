"""Numerical toolkit for time-optimal control of driftless two-input 3D
systems with box-constrained controls.

The package covers the full first- and second-order analysis pipeline:
polynomial vector fields with Lie-bracket calculus and moving-frame audits
(:mod:`.geometry`), flow maps and covector transport (:mod:`.flows`),
extremal integration with bang/singular arc decomposition and regime
classification (:mod:`.extremal`), the second-order rejection test for
six-arc bang-bang candidates (:mod:`.second_order`), a brute-force
time-optimal oracle with bound and sharpness verification (:mod:`.oracle`),
and a batch CLI (:mod:`.cli`).
"""

from ._kernels import HAS_NUMBA, PackedSystem, endpoint, endpoints_batch, get_backend, set_backend
from .errors import (
    AmbiguousFeedback,
    BlowUp,
    ChatteringSuspected,
    ConfigError,
    Driftless3DError,
    EmptyRegion,
    FixtureInvalid,
    LiftConstructionFailed,
    NonzeroViolation,
    RankDeficient,
    SingularDenominator,
    StepTooSmall,
    Unreachable,
    ZeroCovector,
)
from .extremal import (
    ArcDecomposition,
    ArcInfo,
    ExtremalRun,
    ExtremalState,
    IntegrationOptions,
    PatternMatch,
    RegimeKind,
    RegimeReport,
    SwitchingTraces,
    build_pattern_schedule,
    classify_regime,
    detect_pattern,
    integrate_extremal,
    maximality_check,
    normalize_initial,
    singular_control,
    switching_derivative_check,
)
from .flows import ArcSchedule, flow_map, integrate_flow, transport_field_vector, transported_field
from .geometry import (
    Box,
    FrameReport,
    NumericField,
    PolyField,
    SmoothField,
    SystemPair,
    TangentVector,
    ad,
    frame_condition_triples,
    lie_bracket,
    moving_basis_check,
)
from .oracle import (
    BoundSummary,
    CandidateFamily,
    OracleResult,
    SharpnessSummary,
    bound_verification,
    default_sharpness_candidates,
    extremal_lift_check,
    fixtures,
    get_fixture,
    min_time_to_target,
    sharpness_search,
)
from .second_order import (
    LIMIT_MATRIX,
    HFieldSet,
    LimitMatrixReport,
    SecondOrderReport,
    Verdict,
    build_h_fields,
    limit_matrix_comparison,
    shoot_lift,
    six_arc_rejection,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousFeedback",
    "ArcDecomposition",
    "ArcInfo",
    "ArcSchedule",
    "BlowUp",
    "BoundSummary",
    "Box",
    "CandidateFamily",
    "ChatteringSuspected",
    "ConfigError",
    "Driftless3DError",
    "EmptyRegion",
    "ExtremalRun",
    "ExtremalState",
    "FixtureInvalid",
    "FrameReport",
    "HAS_NUMBA",
    "HFieldSet",
    "IntegrationOptions",
    "LIMIT_MATRIX",
    "LiftConstructionFailed",
    "LimitMatrixReport",
    "NonzeroViolation",
    "NumericField",
    "OracleResult",
    "PackedSystem",
    "PatternMatch",
    "PolyField",
    "RankDeficient",
    "RegimeKind",
    "RegimeReport",
    "SecondOrderReport",
    "SharpnessSummary",
    "SingularDenominator",
    "SmoothField",
    "StepTooSmall",
    "SwitchingTraces",
    "SystemPair",
    "TangentVector",
    "Unreachable",
    "Verdict",
    "ZeroCovector",
    "ad",
    "bound_verification",
    "build_h_fields",
    "build_pattern_schedule",
    "classify_regime",
    "default_sharpness_candidates",
    "detect_pattern",
    "endpoint",
    "endpoints_batch",
    "extremal_lift_check",
    "fixtures",
    "flow_map",
    "frame_condition_triples",
    "get_backend",
    "get_fixture",
    "integrate_extremal",
    "integrate_flow",
    "lie_bracket",
    "limit_matrix_comparison",
    "maximality_check",
    "min_time_to_target",
    "moving_basis_check",
    "normalize_initial",
    "set_backend",
    "sharpness_search",
    "shoot_lift",
    "singular_control",
    "six_arc_rejection",
    "switching_derivative_check",
    "transport_field_vector",
    "transported_field",
]
