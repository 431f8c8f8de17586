"""Tube-family overlap integrals and machine-checked multiscale bound certificates."""

from .certifier import (
    Certificate,
    Constants,
    certify_multiscale,
    count_intersections,
    cover_for_arbitrary_s,
    delta_for_epsilon,
    identically_one_check,
    step_bound,
    verify_step_inequality,
)
from .errors import (
    CellBudgetExceeded,
    KakeyaError,
    NonConvergence,
    PropertyViolation,
    ValidationError,
)
from .evaluator import (
    FamilyMember,
    GridSpec,
    OverlapValue,
    TubeFamily,
    average_integral,
    evaluate_overlap,
    evaluate_refined,
    exact_overlap_2d,
    overlap_integrand,
)
from .geometry import (
    Cap,
    Cube,
    Direction,
    Line,
    LinearMap,
    LipschitzCurve,
    Tube,
    angle_from_axis,
    cap_cover,
    curve_indicator,
    fatten_axis_parallel,
    frame_map,
    subdivide_cube,
    tube_indicator,
    tube_intersects_cube,
    wedge_volume,
)
from .loomis_whitney import (
    BallSum,
    Box,
    ProjectionFunction,
    ball_sum_l1,
    lw_left,
    lw_right,
    project,
    unit_ball_volume,
    verify_lw,
)
from .reduction import (
    ReducedProblem,
    reduce_general_to_small_angle,
    split_by_caps,
    transversal_reduce,
    weighted_multiplicity_check,
)
from .generators import (
    AxisParallel,
    GeneralAngle,
    GenSpec,
    Lipschitz,
    SmallAngle,
    Weighted,
    enumerate_grid_axis_parallel,
    generate,
)
from .experiments import extremal_search, sweep_scale

__version__ = "0.1.0"
