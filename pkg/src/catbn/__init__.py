"""catbn: adaptive testing with discrete Bayesian networks.

Learn student models from answer data (EM over latent skills), run
adaptive tests that pick the next question by expected information gain,
and compare model structures by cross-validated answer prediction.
"""

from .network import (
    Cpt,
    Distribution,
    Evidence,
    Network,
    NetworkError,
    Variable,
    load_network,
    network_from_json,
    network_to_json,
    save_network,
    validate_network,
)
from .inference import (
    ImpossibleEvidenceError,
    evidence_log_probability,
    joint_posterior,
    log_likelihood,
    posterior_marginals,
)
from .learning import (
    EmConfig,
    FitResult,
    LearningError,
    Observations,
    em_fit,
    fit_complete,
    sparsity_metrics,
)
from .zoo import (
    BlueprintError,
    InfoDef,
    ModelSpec,
    QuestionDef,
    TestBlueprint,
    build_model,
    demo_blueprint,
    enumerate_specs,
    load_blueprint,
    save_blueprint,
    spec_by_id,
)
from .dataset import (
    DataError,
    Dataset,
    ScoreGroups,
    discretize_scores,
    generate_synthetic,
    grade_correlations,
    load_csv,
    save_csv,
    to_boolean,
)
from .session import (
    AnswerPrediction,
    SessionError,
    TerminationRule,
    TestSession,
    entropy,
    expected_entropy,
    information_gain,
)
from .evaluation import (
    EvalConfig,
    EvalReport,
    EvaluationError,
    cross_validate,
    emit_report,
    simulate_student,
    success_ratio_step,
)
from .estimator import CatModel

__all__ = [
    "AnswerPrediction",
    "BlueprintError",
    "CatModel",
    "Cpt",
    "DataError",
    "Dataset",
    "Distribution",
    "EmConfig",
    "EvalConfig",
    "EvalReport",
    "EvaluationError",
    "Evidence",
    "FitResult",
    "ImpossibleEvidenceError",
    "InfoDef",
    "LearningError",
    "ModelSpec",
    "Network",
    "NetworkError",
    "Observations",
    "QuestionDef",
    "ScoreGroups",
    "SessionError",
    "TerminationRule",
    "TestBlueprint",
    "TestSession",
    "Variable",
    "build_model",
    "cross_validate",
    "demo_blueprint",
    "discretize_scores",
    "emit_report",
    "entropy",
    "enumerate_specs",
    "evidence_log_probability",
    "em_fit",
    "expected_entropy",
    "fit_complete",
    "generate_synthetic",
    "grade_correlations",
    "information_gain",
    "joint_posterior",
    "load_blueprint",
    "load_csv",
    "load_network",
    "log_likelihood",
    "network_from_json",
    "network_to_json",
    "posterior_marginals",
    "save_blueprint",
    "save_csv",
    "save_network",
    "simulate_student",
    "spec_by_id",
    "sparsity_metrics",
    "success_ratio_step",
    "to_boolean",
    "validate_network",
]

__version__ = "0.1.0"
