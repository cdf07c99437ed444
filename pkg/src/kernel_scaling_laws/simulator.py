"""Monte Carlo learning curves on Gaussian-design power-law data.

Row mu of a dataset draws its features from a Philox stream keyed by
(seed, 2 mu) and its label noise from (seed, 2 mu + 1), so datasets with the
same seed are nested and independent of execution order.
"""
from functools import partial
from typing import Literal, Optional, Sequence
import logging
import math

import numpy as np
from scipy import linalg
from sklearn.model_selection import KFold
from sklearn.utils import check_random_state

from kernel_scaling_laws.exceptions import DegenerateFoldError, DomainError, KernelScalingError, TrainerError
from kernel_scaling_laws.runner import run_points
from kernel_scaling_laws.schema import (
    CurveFailure,
    CurveMeta,
    CurvePoint,
    LambdaRule,
    LearningCurve,
    LinearClassifier,
    SeedRecord,
    SyntheticDataset,
)
from kernel_scaling_laws.spectrum import SpectrumLike, as_spectrum
from kernel_scaling_laws.spectrum import rho as spectrum_rho
from kernel_scaling_laws.state_evolution import excess_error

logger = logging.getLogger(__name__)

MAXMARGIN_LAMBDA = 1e-4
DEFAULT_TOL = 1e-6
DEFAULT_MAX_SWEEPS = 10_000

SimMethod = Literal["svm", "ridge", "hinge"]


def _row_generator(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, stream]))


def sample_dataset(model: SpectrumLike, n: int, sigma: float = 0.0, seed: int = 0) -> SyntheticDataset:
    """Draw n Gaussian feature rows with covariance diag(omega) and their labels."""
    if n < 1:
        raise DomainError(f"sample count must be at least 1, got {n}")
    if sigma < 0:
        raise DomainError(f"noise level must be nonnegative, got {sigma}")
    if seed < 0:
        raise DomainError(f"seed must be nonnegative, got {seed}")
    spectrum = as_spectrum(model)
    scale = np.sqrt(spectrum.eigenvalues)
    p = spectrum.p_cut

    features = np.empty((n, p))
    noise = np.empty(n)
    for mu in range(n):
        features[mu] = scale * _row_generator(seed, 2 * mu).standard_normal(p)
        noise[mu] = _row_generator(seed, 2 * mu + 1).standard_normal()

    field = features @ spectrum.teacher + sigma * noise
    labels = np.where(field >= 0, 1.0, -1.0)
    return SyntheticDataset(
        features=features,
        teacher=spectrum.teacher,
        labels=labels,
        noise=noise,
        sigma=sigma,
        seed=seed,
    )


def train_ridge(data: SyntheticDataset, lam: float) -> LinearClassifier:
    """Minimizer of (1/n) sum (y - w.psi)^2 + lam |w|^2.

    Solved in the dual (n x n) when n <= p and in the primal (p x p) otherwise.
    """
    if lam < 0:
        raise DomainError(f"lambda must be nonnegative, got {lam}")
    psi, y, n = data.features, data.labels, data.n
    try:
        if n <= data.p:
            system = psi @ psi.T + n * lam * np.eye(n)
            dual = linalg.cho_solve(linalg.cho_factor(system), y)
            weights = psi.T @ dual
        else:
            system = psi.T @ psi + n * lam * np.eye(data.p)
            dual = None
            weights = linalg.cho_solve(linalg.cho_factor(system), psi.T @ y)
    except linalg.LinAlgError as exc:
        raise TrainerError(f"ridge system is singular at lambda={lam:g}, n={n}") from exc
    return LinearClassifier(weights=weights, dual_coeffs=dual, lam=lam, method="ridge")


def _kkt_violation(alpha: np.ndarray, gradient: np.ndarray, C: float) -> float:
    projected = np.where(
        alpha <= 0.0,
        np.minimum(gradient, 0.0),
        np.where(alpha >= C, np.maximum(gradient, 0.0), gradient),
    )
    return float(np.max(np.abs(projected))) if projected.size else 0.0


def solve_hinge_dual(
    gram: np.ndarray,
    labels: np.ndarray,
    C: float,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    random_state: Optional[int] = None,
) -> tuple[np.ndarray, int, float]:
    """Coordinate ascent on max sum(a) - a'Qa/2 over the box [0, C], Q = yy' * K.

    Returns the dual coefficients, the number of sweeps and the final
    projected-gradient violation.
    """
    rs = check_random_state(random_state)
    Q = gram * np.outer(labels, labels)
    diag = np.diag(Q).copy()
    n = len(labels)
    alpha = np.zeros(n)
    Qa = np.zeros(n)
    violation = math.inf

    for sweep in range(1, max_sweeps + 1):
        for i in rs.permutation(n):
            if diag[i] <= 0.0:
                continue
            gradient = Qa[i] - 1.0
            updated = min(max(alpha[i] - gradient / diag[i], 0.0), C)
            delta = updated - alpha[i]
            if delta != 0.0:
                alpha[i] = updated
                Qa += delta * Q[i]
        violation = _kkt_violation(alpha, Qa - 1.0, C)
        if violation < tol:
            logger.debug(f"dual coordinate ascent converged in {sweep} sweeps")
            return alpha, sweep, violation

    raise TrainerError(
        f"dual coordinate ascent hit {max_sweeps} sweeps with KKT violation {violation:.3g}",
        kkt_violation=violation,
    )


def train_svm_hinge(
    data: SyntheticDataset,
    lam: float,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> LinearClassifier:
    """Minimizer of (1/n) sum hinge + lam |w|^2 through its dual with C = 1/(2 n lam)."""
    if lam <= 0:
        raise DomainError(f"hinge training needs lambda > 0, got {lam}")
    C = 1.0 / (2.0 * data.n * lam)
    alpha, sweeps, violation = solve_hinge_dual(
        data.features @ data.features.T, data.labels, C, tol, max_sweeps, random_state=data.seed
    )
    return LinearClassifier(
        weights=data.features.T @ (alpha * data.labels),
        dual_coeffs=alpha,
        lam=lam,
        method="hinge",
        C=C,
        kkt_violation=violation,
        iterations=sweeps,
    )


def duality_gap(data: SyntheticDataset, classifier: LinearClassifier) -> float:
    """Primal minus dual objective of the C-scaled hinge problem."""
    if classifier.method != "hinge" or classifier.dual_coeffs is None:
        raise DomainError("duality_gap needs a hinge classifier with dual coefficients")
    w = classifier.weights
    hinge = np.maximum(0.0, 1.0 - data.labels * (data.features @ w))
    norm = float(w @ w)
    primal = 0.5 * norm + classifier.C * float(hinge.sum())
    dual = float(classifier.dual_coeffs.sum()) - 0.5 * norm
    return primal - dual


def analytic_error(
    classifier: LinearClassifier,
    model: SpectrumLike,
    teacher: Optional[np.ndarray] = None,
    sigma: float = 0.0,
) -> float:
    """Exact Gaussian-design test error (1/pi) arccos of the noise-scaled cosine.

    The cosine keeps its sign, so an anti-aligned classifier scores above 1/2.
    """
    spectrum = as_spectrum(model)
    omega = spectrum.eigenvalues
    theta = spectrum.teacher if teacher is None else np.asarray(teacher, dtype=float)
    w = classifier.weights
    if w.shape != omega.shape:
        raise DomainError(f"classifier has {w.size} weights for a {omega.size}-mode spectrum")
    q = float(np.sum(omega * w * w))
    if q <= 0:
        raise DomainError("zero-weight classifier has no defined error")
    rho = float(np.sum(omega * theta * theta))
    m = float(np.sum(omega * w * theta))
    cosine = m / math.sqrt(rho * q) * math.sqrt(rho / (rho + sigma ** 2))
    return math.acos(min(max(cosine, -1.0), 1.0)) / math.pi


def _predict(classifier: LinearClassifier, features: np.ndarray) -> np.ndarray:
    return np.where(features @ classifier.weights >= 0, 1.0, -1.0)


def empirical_error(classifier: LinearClassifier, test_data: SyntheticDataset) -> float:
    """Fraction of test labels the classifier gets wrong."""
    if test_data.n == 0:
        raise DomainError("empty test set")
    return float(np.mean(_predict(classifier, test_data.features) != test_data.labels))


def empirical_mse(classifier: LinearClassifier, test_data: SyntheticDataset) -> float:
    """Test mean-squared error of the pre-activation against the labels."""
    residual = test_data.labels - test_data.features @ classifier.weights
    return float(np.mean(residual ** 2))


def support_vector_fraction(classifier: LinearClassifier) -> float:
    """Share of training points with a dual coefficient above 1e-8 C."""
    if classifier.method != "hinge" or classifier.dual_coeffs is None or classifier.C is None:
        raise DomainError("support vectors are defined for hinge classifiers only")
    duals = classifier.dual_coeffs
    return float(np.mean(duals > 1e-8 * classifier.C)) if duals.size else 0.0


def _fold_errors_ridge(
    features: np.ndarray,
    labels: np.ndarray,
    train: np.ndarray,
    valid: np.ndarray,
    grid: Sequence[float],
) -> np.ndarray:
    psi = features[train]
    y = labels[train]
    spectrum, vectors = linalg.eigh(psi @ psi.T)
    projected = vectors.T @ y
    cross = features[valid] @ psi.T
    cutoff = np.finfo(float).eps * max(float(spectrum.max()), 1.0) * len(train)
    errors = np.empty(len(grid))
    for index, lam in enumerate(grid):
        shifted = spectrum + len(train) * lam
        inverse = np.where(shifted > cutoff, 1.0 / np.where(shifted > cutoff, shifted, 1.0), 0.0)
        dual = vectors @ (inverse * projected)
        predictions = np.where(cross @ dual >= 0, 1.0, -1.0)
        errors[index] = np.mean(predictions != labels[valid])
    return errors


def _fold_errors_hinge(
    data: SyntheticDataset,
    train: np.ndarray,
    valid: np.ndarray,
    grid: Sequence[float],
    tol: float,
) -> np.ndarray:
    fold = SyntheticDataset(
        features=data.features[train],
        teacher=data.teacher,
        labels=data.labels[train],
        noise=data.noise[train],
        sigma=data.sigma,
        seed=data.seed,
    )
    errors = np.empty(len(grid))
    for index, lam in enumerate(grid):
        classifier = train_svm_hinge(fold, lam, tol)
        predictions = _predict(classifier, data.features[valid])
        errors[index] = np.mean(predictions != data.labels[valid])
    return errors


def _splits(labels: np.ndarray, folds: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    for attempt in range(2):
        splitter = KFold(n_splits=folds, shuffle=True, random_state=seed + attempt)
        splits = list(splitter.split(labels))
        if all(len(np.unique(labels[train])) == 2 for train, _ in splits):
            return splits
        logger.info(f"single-class training fold with random_state={seed + attempt}, redrawing")
    raise DegenerateFoldError(f"{folds}-fold split keeps producing single-class training folds")


def cross_validate_lambda(
    data: SyntheticDataset,
    grid: Sequence[float],
    folds: int = 5,
    method: Literal["ridge", "hinge"] = "ridge",
    tol: float = DEFAULT_TOL,
) -> tuple[float, list[tuple[float, float]]]:
    """Grid point with the lowest mean validation error; ties go to the smaller lambda."""
    if folds < 2:
        raise DomainError(f"cross validation needs at least 2 folds, got {folds}")
    grid = [float(lam) for lam in grid]
    if not grid:
        raise DomainError("empty lambda grid")
    if data.n < folds:
        raise DomainError(f"{data.n} samples cannot fill {folds} folds")
    if len(grid) == 1:
        return grid[0], [(grid[0], math.nan)]

    scores = np.zeros(len(grid))
    for train, valid in _splits(data.labels, folds, data.seed):
        if method == "ridge":
            scores += _fold_errors_ridge(data.features, data.labels, train, valid, grid)
        else:
            scores += _fold_errors_hinge(data, train, valid, grid, tol)
    scores /= folds

    best = float(scores.min())
    winners = [lam for lam, score in zip(grid, scores) if score <= best]
    return min(winners), list(zip(grid, scores.tolist()))


def _train(
    method: SimMethod,
    data: SyntheticDataset,
    rule: LambdaRule,
    tol: float,
) -> LinearClassifier:
    if method == "svm":
        return train_svm_hinge(data, MAXMARGIN_LAMBDA, tol)
    if rule.kind == "optimal":
        lam, _ = cross_validate_lambda(data, rule.optimal_grid(), method=method, tol=tol)
    else:
        lam = rule.at(data.n)
    if method == "ridge":
        return train_ridge(data, lam)
    return train_svm_hinge(data, lam, tol)


def simulate_seed(
    method: SimMethod,
    model: SpectrumLike,
    rule: LambdaRule,
    sigma: float,
    tol: float,
    task: tuple[int, int],
) -> SeedRecord:
    """Train one classifier on a fresh dataset and score it analytically."""
    n, seed = task
    data = sample_dataset(model, n, sigma, seed)
    classifier = _train(method, data, rule, tol)
    support = support_vector_fraction(classifier) if classifier.method == "hinge" else None
    return SeedRecord(
        n=n,
        seed=seed,
        value=analytic_error(classifier, model, sigma=sigma),
        lam=classifier.lam,
        support_fraction=support,
    )


_LABELS = {"svm": "sim-svm", "ridge": "sim-ridge", "hinge": "sim-hinge"}


def empirical_learning_curve(
    method: SimMethod,
    model: SpectrumLike,
    n_grid: Sequence[int],
    seeds: int = 1,
    lambda_rule: LambdaRule = LambdaRule(),
    sigma: float = 0.0,
    base_seed: int = 0,
    excess: bool = False,
    tol: float = DEFAULT_TOL,
    jobs: Optional[int] = None,
) -> LearningCurve:
    """Seed-averaged analytic test error with its standard error at each n."""
    if seeds < 1:
        raise DomainError(f"seeds must be at least 1, got {seeds}")
    ns = [int(n) for n in n_grid]
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        raise DomainError(f"n_grid must be nonempty and increasing, got {ns}")

    tasks = [(n, base_seed + s) for n in ns for s in range(seeds)]
    results = run_points(partial(simulate_seed, method, model, lambda_rule, sigma, tol), tasks, jobs)

    points, failures, records = [], [], []
    for n in ns:
        outcomes = [result for (task_n, _), result in zip(tasks, results) if task_n == n]
        good = [result for result in outcomes if isinstance(result, SeedRecord)]
        for result in outcomes:
            if isinstance(result, BaseException) and not isinstance(result, KernelScalingError):
                raise result
        failed = len(outcomes) - len(good)
        if failed:
            message = "; ".join(sorted({str(r) for r in outcomes if isinstance(r, BaseException)}))
            logger.warning(f"{failed} of {seeds} seeds failed at n={n}: {message}")
            failures.append(CurveFailure(n=n, error="TrainerFailures", message=f"{failed}/{seeds} seeds: {message}"))
        if not good:
            continue
        records.extend(good)
        values = np.array([record.value for record in good])
        stderr = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
        lams = [record.lam for record in good]
        points.append(
            CurvePoint(
                n=n,
                value=float(values.mean()),
                stderr=stderr,
                lam=lams[0] if len(set(lams)) == 1 else float(np.median(lams)),
                seeds=len(good),
            )
        )

    meta = CurveMeta(
        alpha=getattr(model, "alpha", None),
        r=getattr(model, "r", None),
        p_cut=model.p_cut,
        ell=lambda_rule.value if lambda_rule.kind == "power" else None,
        lam=MAXMARGIN_LAMBDA if method == "svm" else (lambda_rule.value if lambda_rule.kind == "fixed" else None),
        sigma=sigma,
        rule="maxmargin" if method == "svm" else lambda_rule.kind,
    )
    curve = LearningCurve(points=points, label=_LABELS[method], meta=meta, failures=failures, records=records)
    if excess and sigma > 0:
        curve = excess_error(curve, spectrum_rho(model), sigma)
    return curve


def double_descent_probe(
    model: SpectrumLike,
    n_grid: Sequence[int],
    lam: float = 1e-8,
    seeds: int = 5,
    base_seed: int = 0,
    jobs: Optional[int] = None,
) -> LearningCurve:
    """Nearly unregularized ridge curve on a small finite spectrum."""
    return empirical_learning_curve(
        "ridge",
        model,
        n_grid,
        seeds=seeds,
        lambda_rule=LambdaRule(kind="fixed", value=lam),
        base_seed=base_seed,
        jobs=jobs,
    )


def first_ascent(curve: LearningCurve) -> Optional[int]:
    """Sample count at which the error first increases, None for a monotone curve."""
    for previous, current in zip(curve.points, curve.points[1:]):
        if current.value > previous.value:
            return current.n
    return None
