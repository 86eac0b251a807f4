"""fohc: fractional-order hybrid control toolkit.

Frequency-domain tuning of (fractional) controllers for switched plants
under quadratic-stability phase constraints, and time-domain simulation of
fractional-order reset control loops.
"""

from ._kernels import HAS_NUMBA, backend_name, set_backend
from .frlin import (
    FractionalPolynomial,
    FractionalTransferFunction,
    GlKernel,
    freq_response,
    gl_step,
    gl_weights,
    oustaloup_approx,
    oustaloup_differintegral,
)
from .freqdesign import (
    ControllerTemplate,
    GainCrossoverSpec,
    PhaseMarginSpec,
    SensitivityBoundSpec,
    StabilityReport,
    SwitchedPlant,
    characteristic_polynomial,
    default_grid,
    gain_at,
    max_phase_difference,
    phase_margin_at,
    quadratic_stability_check,
    sensitivity_margin,
    to_transfer_function,
)
from .hybridsim import (
    ClosedLoopConfig,
    ConfigError,
    ExplicitSwitching,
    FeedforwardTarget,
    FixedInstants,
    GeneralNonZeroTarget,
    NumericalError,
    PiecewiseReference,
    PlantModel,
    PlantStateTarget,
    RandomSwitching,
    ResetControllerSpec,
    ResetEvent,
    SimulationTrace,
    StepReference,
    VariableNonZeroTarget,
    ZeroCrossing,
    ZeroTarget,
    closed_loop_tf,
    feedforward_gain,
    make_general_reset,
    make_pci,
    make_pci_feedforward,
    make_pcid,
    make_pi_alpha_ci_alpha,
    make_zheng_reset,
    simulate,
)
from .metrics import (
    LimitCycleResult,
    ResponseMetrics,
    clegg_df,
    compute_metrics,
    describing_function,
    detect_limit_cycle,
    steady_control_value,
)
from .tuner import (
    DesignProblem,
    FeasibilityReport,
    NoFeasiblePoint,
    OptimizationResult,
    assemble,
    solve,
    verify,
)

__version__ = "0.1.0"
