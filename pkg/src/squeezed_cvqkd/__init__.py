"""Security analysis of squeezed-state continuous-variable QKD with noisy squeezing."""
from .exceptions import (
    AllocationOutOfRange,
    BracketingFailure,
    DegenerateMeasurement,
    DomainError,
    EvaluationFailure,
    NonSymmetric,
    NoPositiveKey,
    NumericalFailure,
    QKDError,
    SingularModulation,
    Unphysical,
)
from .fading import (
    FadingMoments,
    build_cm_fading,
    fading_equivalent_noise,
    fading_moments,
    fading_mutual_information,
    key_rate_fading,
)
from .finite_size import (
    BlockAllocation,
    EstimatorStats,
    FiniteKeyRateResult,
    delta_n,
    estimator_variances_heterodyne,
    estimator_variances_homodyne,
    key_rate_finite,
    worst_case_bounds,
)
from .gaussian import (
    P,
    X,
    condition_on_heterodyne,
    condition_on_homodyne,
    g_function,
    symplectic_eigenvalues,
    von_neumann_entropy,
)
from .montecarlo import SimConfig, empirical_variance_report, simulate_block
from .optimize import (
    OptimizationProblem,
    ToleranceQuery,
    evaluate,
    maximize_key,
    solve_tolerance,
)
from .protocol import (
    Channel,
    FadingChannel,
    NoisySqueezedState,
    SourceSpec,
    allocate_noise,
    build_cm_heterodyne,
    build_cm_homodyne,
    eb_equivalents,
    noisy_state_from_loss,
    pure_loss_eve_cm,
)
from .security import (
    BiasedHomodyne,
    HomodyneP,
    HomodyneX,
    ImbalancedHeterodyne,
    KeyRateResult,
    Side,
    allocation_holevo,
    dr_key_with_allocation,
    holevo_bound,
    key_rate_asymptotic,
    mutual_information,
    pure_loss_limits,
    worst_case_allocation,
)

__version__ = "0.1.0"
