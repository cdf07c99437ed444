"""Closed-form learning-curve exponents.

An exponent a means the misclassification error decays like n^-a.
"""
from typing import Optional
import math

from kernel_scaling_laws.exceptions import DomainError
from kernel_scaling_laws.schema import RateReport

APPROXIMATION_EXPONENT = 1.0 / 3.0

# (alpha, r, a_svm, a_ridge) as measured on CIFAR-10 and MNIST gram matrices
TABLE_ONE = (
    ("CIFAR 10 polynomial", 1.51, 0.07, 0.095, 0.086),
    ("CIFAR 10 RBF", 1.005, 0.07, 0.067, 0.063),
    ("MNIST polynomial", 1.72, 0.23, 0.28, 0.22),
    ("MNIST RBF", 1.65, 0.39, 0.39, 0.28),
)


def _check(alpha: float, r: float) -> None:
    if not alpha > 1.0:
        raise DomainError(f"capacity alpha must exceed 1, got {alpha}")
    if r < 0.0:
        raise DomainError(f"source r must be nonnegative, got {r}")


def svm_rate(alpha: float, r: float) -> float:
    """Max-margin exponent alpha min(r, 1/2) / (1 + alpha min(r, 1/2))."""
    _check(alpha, r)
    s = alpha * min(r, 0.5)
    return s / (1.0 + s)


def ridge_rate(alpha: float, r: float, ell: float) -> float:
    """Ridge exponent for lambda = n^-ell; zero on the plateau ell > alpha."""
    _check(alpha, r)
    if ell < 0:
        raise DomainError(f"decay ell must be nonnegative, got {ell}")
    if ell > alpha:
        return 0.0
    return 0.5 * min(2.0 * ell * min(r, 1.0), (alpha - ell) / alpha)


def ridge_optimal(alpha: float, r: float) -> tuple[float, float]:
    """(ell*, exponent) of the best power-law ridge regularization."""
    _check(alpha, r)
    s = alpha * min(r, 1.0)
    return alpha / (1.0 + 2.0 * s), s / (1.0 + 2.0 * s)


def ridge_regime_boundaries(alpha: float, r: float) -> dict[str, tuple[float, float]]:
    """ell ranges where the source, the capacity or the plateau sets the ridge rate."""
    ell_star, _ = ridge_optimal(alpha, r)
    return {
        "source_limited": (0.0, ell_star),
        "capacity_limited": (ell_star, alpha),
        "plateau": (alpha, math.inf),
    }


def hinge_boundary(alpha: float, r: float) -> float:
    """ell* = alpha (1 + min(r, 1/2)) / (1 + alpha min(r, 1/2))."""
    _check(alpha, r)
    s = min(r, 0.5)
    return alpha * (1.0 + s) / (1.0 + alpha * s)


def hinge_regularized_rate(alpha: float, r: float, ell: float) -> tuple[float, float]:
    """(exponent, ell*) for the hinge classifier with lambda = n^-ell.

    Derived only for r <= 1/2; above that the finite-ell regime is unknown.
    """
    _check(alpha, r)
    if r > 0.5:
        raise DomainError(f"unsupported source range: hinge rate needs r <= 1/2, got {r}")
    if ell < 0:
        raise DomainError(f"decay ell must be nonnegative, got {ell}")
    ell_star = hinge_boundary(alpha, r)
    return min(ell, ell_star) * r / (1.0 + r), ell_star


def noisy_ridge_rate(alpha: float, r: float, ell: float) -> float:
    """Excess-error exponent of ridge under label noise, twice the noiseless one."""
    return 2.0 * ridge_rate(alpha, r, ell)


def noisy_crossover_rate(alpha: float) -> float:
    if alpha <= 0:
        raise DomainError(f"capacity alpha must be positive, got {alpha}")
    return alpha / (1.0 + alpha)


def _steinwart_bound(alpha: float, b: float, theta: float) -> float:
    # Bernstein constants B = V = 2 are absorbed in the exponent
    return min(2.0 * b / (1.0 + b), alpha * b / (b * (2.0 * alpha - 1.0 - alpha * theta + theta) + 1.0))


def worst_case_svm_bound(alpha: float) -> float:
    """Classical SVM upper-bound exponent min(1/2, alpha / (3 + alpha))."""
    if alpha <= 0:
        raise DomainError(f"capacity alpha must be positive, got {alpha}")
    return _steinwart_bound(alpha, APPROXIMATION_EXPONENT, 1.0)


def compare(alpha: float, r: float) -> RateReport:
    """Every exponent for (alpha, r) plus the SVM-vs-ridge comparison flags."""
    a_svm = svm_rate(alpha, r)
    ell_star_ridge, a_ridge = ridge_optimal(alpha, r)
    worst: Optional[float] = worst_case_svm_bound(alpha) if r > 0.5 else None
    return RateReport(
        alpha=alpha,
        r=r,
        a_svm=a_svm,
        a_ridge_opt=a_ridge,
        ell_star_ridge=ell_star_ridge,
        ell_star_hinge=hinge_boundary(alpha, r),
        a_worst_case=worst,
        a_noisy_opt=noisy_ridge_rate(alpha, r, ell_star_ridge),
        a_noisy_crossover=noisy_crossover_rate(alpha),
        b=APPROXIMATION_EXPONENT,
        svm_beats_ridge=a_svm > a_ridge if r > 0 else a_svm >= a_ridge,
        svm_beats_worst_case=None if worst is None else a_svm > worst,
    )
