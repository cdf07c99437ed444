from .exceptions import (
    BracketError,
    ConvergenceError,
    DegenerateFoldError,
    DomainError,
    KernelScalingError,
    MatrixFormatError,
    NonSeparableError,
    QuadratureError,
    SelfConsistencyBreakdown,
    TrainerError,
)
from .schema import (
    CoefficientEstimate,
    ExplicitSpectrum,
    GramSpectrum,
    KernelSpec,
    LambdaRule,
    LearningCurve,
    LinearClassifier,
    OrderParameters,
    PointDiagnostics,
    PowerLawFit,
    PowerLawModel,
    RateReport,
    RunConfig,
    SolverConfig,
    SyntheticDataset,
)
from .rates import compare, ridge_optimal, svm_rate
from .state_evolution import (
    misclassification_error,
    solve_hinge_regularized,
    solve_maxmargin,
    solve_ridge,
    theory_sweep,
)
from .simulator import empirical_learning_curve, sample_dataset, train_ridge, train_svm_hinge
from .estimation import estimate_coefficients, estimate_from_data

__all__ = [
    "BracketError",
    "ConvergenceError",
    "DegenerateFoldError",
    "DomainError",
    "KernelScalingError",
    "MatrixFormatError",
    "NonSeparableError",
    "QuadratureError",
    "SelfConsistencyBreakdown",
    "TrainerError",
    "CoefficientEstimate",
    "ExplicitSpectrum",
    "GramSpectrum",
    "KernelSpec",
    "LambdaRule",
    "LearningCurve",
    "LinearClassifier",
    "OrderParameters",
    "PointDiagnostics",
    "PowerLawFit",
    "PowerLawModel",
    "RateReport",
    "RunConfig",
    "SolverConfig",
    "SyntheticDataset",
    "compare",
    "ridge_optimal",
    "svm_rate",
    "misclassification_error",
    "solve_hinge_regularized",
    "solve_maxmargin",
    "solve_ridge",
    "theory_sweep",
    "empirical_learning_curve",
    "sample_dataset",
    "train_ridge",
    "train_svm_hinge",
    "estimate_coefficients",
    "estimate_from_data",
]
