"""Data-driven LQR synthesis library.

Pipelines: simulate or load experiment data, identify or directly
parameterize the regulator, synthesize gains under certainty-equivalence /
robustness-promoting / mixed regularization, certify closed-loop stability,
and reproduce the Monte-Carlo comparisons through the benchmark harness or
the ``ddlqr`` command-line tool.
"""

from .bench import (
    SnrScalingReport,
    SweepResult,
    SweepSummary,
    TrialMetrics,
    run_trial,
    snr_scaling_report,
    sweep_lambda,
    sweep_noise,
    table2_methods,
)
from .data import Dataset, DerivedData, derive, generate_dataset, least_squares_id, load_dataset, save_dataset
from .design import (
    Certificates,
    LqrSolution,
    Method,
    certificates,
    detect_lambda_star,
    export_solution,
    model_lqr,
    stability_test,
    synthesize,
)
from .errors import (
    DdlqrError,
    DegenerateRecovery,
    Infeasible,
    InvalidInput,
    NotIdentifiable,
    NotSchur,
    NotStabilizable,
    OracleRequired,
)
from .linalg import SvdResult, dare_gain, dlyap, is_schur, matrix_rank, pinv, spectral_radius, svd
from .sdp import ConicProgram, ConicSolution, solve
from .system import (
    LqrWeights,
    LtiSystem,
    NoiseSpec,
    closed_loop,
    h2_norm_sq,
    laplacian3,
    laplacian3_weights,
    simulate,
)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
