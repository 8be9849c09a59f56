"""flowprobe: curvature-adaptive integration for flow-matching vector fields.

A one-shot lookahead probe measures how straight the local generative
trajectory is and schedules integration steps accordingly, against fixed-step
Euler, Adams-Bashforth-2, and Dormand-Prince 5(4) baselines, on analytic
fields with known flows and on a small learned field.
"""

from . import errors
from .bench import (
    CSV_COLUMNS,
    EpsilonRow,
    ExperimentConfig,
    ReportBundle,
    RunRecord,
    TOOL_VERSION,
    emit_reports,
    load_bundle,
    mixed_corpus,
    piecewise_corpus,
    run_matrix,
    solver_label,
    sweep_bundle,
    sweep_epsilon,
    sweep_horizon,
)
from .fields import (
    AffineField,
    ConstantField,
    FIELD_KINDS,
    FieldSpec,
    PiecewiseCurvatureField,
    RotationField,
    VectorField,
    exact_endpoint,
    nfe_count,
)
from .metrics import (
    DistributionDistance,
    RunAggregate,
    aggregate,
    distribution_distance,
    endpoint_error,
)
from .mlp import (
    DATASETS,
    MlpField,
    TrainingConfig,
    TrainingTrace,
    fm_loss,
    fm_loss_and_grads,
    load_weights,
    load_weights_file,
    sample_batch,
    sample_pair,
    save_weights,
    save_weights_file,
    train,
)
from .probe import (
    HorizonRow,
    ProbeResult,
    ScheduleParams,
    adaptive_solve,
    probe,
    schedule_steps,
    sweep_probe_horizon,
)
from .solvers import (
    Rk45Config,
    SolveReport,
    ab2_solve,
    euler_solve,
    reference_solve,
    rk45_solve,
)

__version__ = TOOL_VERSION
