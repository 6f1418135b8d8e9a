"""Quasi-likelihood tools for multivariate point processes.

Event streams, exponential-kernel mutually exciting models, closed-form
order-book models, likelihood machinery with exact derivatives, frequentist
and Bayesian estimators, simulators, and ergodicity/identifiability
diagnostics, plus a command-line harness for Monte Carlo studies.
"""

from .events import (
    EventDataError,
    EventStream,
    TimeWindow,
    ValidationReport,
    read_events,
    restrict,
    validate,
    write_events,
)
from .models import (
    HawkesModel,
    HawkesParams,
    HawkesState,
    LinearLOBModel,
    LinearLOBParams,
    LOBState,
    ParamBox,
    PoissonModel,
    PoissonParams,
    branching_matrix,
    hawkes_compensator,
    hawkes_evolve,
    hawkes_intensity,
    hawkes_spectral_radius,
    lob_intensity,
    poisson_intensity,
)
from .likelihood import (
    LikelihoodEvaluation,
    QuadratureError,
    RatioFieldSample,
    ZeroIntensityAtEvent,
    compensator_path,
    empirical_fisher,
    evaluate,
    intensity_path,
    log_likelihood,
    observed_information,
    ratio_field,
    score,
)
from .simulation import (
    LOBTrajectory,
    SimConfig,
    conditional_jump_density,
    simulate_exact,
    simulate_lob,
    simulate_thinning,
    stationary_burn_in,
)
from .estimation import (
    BayesResult,
    FitResult,
    NoConvergence,
    PoorMixing,
    SingularInformation,
    bayes_report,
    confidence_intervals,
    fit_report,
    qbe,
    qmle,
)
from .diagnostics import (
    CouplingDecay,
    DiagnosticsReport,
    ErgodicTrace,
    IdentifiabilityProbe,
    MixingEstimate,
    RescalingResult,
    coupling_decay,
    diagnose,
    ergodic_average_trace,
    identifiability_probe,
    mixing_covariance,
    time_rescaling_test,
)
from .study import StudyReport, StudyRow, run_mc_study, summarize_rows
from .rng import rng_stream

__version__ = "0.1.0"
