from typing import Optional


class KernelScalingError(Exception):
    """Base class for every error raised by kernel_scaling_laws."""
    pass


class DomainError(KernelScalingError, ValueError):
    """Raised when a parameter lies outside the domain an operation supports."""
    pass


class ConvergenceError(KernelScalingError):
    """Raised when a fixed-point iteration exhausts its iteration budget."""

    def __init__(
        self,
        message: str,
        iterations: int = 0,
        residuals: Optional[dict[str, float]] = None,
        damping_trace: Optional[list[float]] = None,
    ):
        super().__init__(message)
        self.iterations = iterations
        self.residuals = residuals or {}
        self.damping_trace = damping_trace or []


class QuadratureError(KernelScalingError):
    """Raised when adaptive quadrature misses its tolerance."""
    pass


class SelfConsistencyBreakdown(DomainError):
    """Raised when the ridge overlap equation has no positive solution (T2 >= 1)."""
    pass


class BracketError(KernelScalingError):
    """Raised when a root bracket does not change sign."""
    pass


class TrainerError(KernelScalingError):
    """Raised when a classifier cannot be trained."""

    def __init__(self, message: str, kkt_violation: Optional[float] = None):
        super().__init__(message)
        self.kkt_violation = kkt_violation


class DegenerateFoldError(KernelScalingError):
    """Raised when a cross-validation split keeps producing single-class folds."""
    pass


class MatrixFormatError(KernelScalingError):
    """Raised when a matrix or label file cannot be decoded."""
    pass


class NonSeparableError(KernelScalingError):
    """Raised when a fitted teacher misclassifies some training points."""

    def __init__(self, message: str, violations: int = 0):
        super().__init__(message)
        self.violations = violations
