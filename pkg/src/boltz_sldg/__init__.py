"""Semi-Lagrangian DG solver for kinetic equations with stiff BGK-penalized
collision terms, plus tableau analysis and experiment drivers."""

from .errors import (
    ConfigError,
    DegenerateMomentsError,
    InvalidArgumentError,
    SingularTableauError,
    StepFailureError,
)
from .mesh import (
    BoundaryKind,
    NodalBasis,
    SpatialMesh,
    gauss_legendre_unit,
    lagrange_eval,
    locate_upstream,
    node_coordinates,
)
from .velocity import (
    DistributionField,
    MacroField,
    VelocityGrid,
    ap_error,
    error_norms,
    euler_flux,
    maxwellian,
    moments,
)
from .transport import (
    ShiftCache,
    ShiftPlan,
    ShiftPlanSet,
    build_shift_matrices,
    build_shift_plan,
    shift_apply,
)
from .collision import (
    CollisionPlan,
    PenaltyField,
    build_collision_plan,
    g_p,
    penalty_beta,
    q_direct,
    q_p,
    q_spectral,
)

from .imex import (
    ButcherPair,
    ShuOsherCoeffs,
    TableauClass,
    builtin_tableaux,
    classify,
    imex_step,
    imex_step_shu_osher,
    limiting_euler_step,
    moments_update,
    shu_osher_coeffs,
)
from .analysis import (
    FirstOrderReport,
    OrderReport,
    PositivityReport,
    first_order_gh,
    limiting_order_coeffs,
    positivity_zmax,
)
from .limiter import LimiterConfig, lmpp_apply
from .harness import (
    APDecayResult,
    ConvergenceTable,
    EpsilonSpec,
    InitialCondition,
    MixingResult,
    RunConfig,
    RunResult,
    SodResult,
    TableauReport,
    analyze_tableau,
    apply_overrides,
    default_config,
    initial_field,
    load_tableau,
    parse_config,
    run_ap_decay,
    run_convergence,
    run_mixing,
    run_simulation,
    run_sod,
)

__version__ = "0.1.0"
