"""Source and capacity coefficients of a dataset from its gram matrix.

The gram matrix G of m points is diagonalized as G/m = U diag(omega) U',
giving the embedding Psi = sqrt(m) U diag(omega)^(1/2). A teacher separating
the labels in that embedding is fitted by max-margin, and the tails of the
cumulative sums of omega and omega theta^2 are regressed on k in log-log.
"""
from pathlib import Path
from typing import Literal, Optional, Union
import logging
import math
import struct

import numpy as np
from scipy import linalg, stats
from sklearn.linear_model import LogisticRegression
from sklearn.metrics.pairwise import linear_kernel, polynomial_kernel, rbf_kernel

from kernel_scaling_laws.artifacts import atomic_write
from kernel_scaling_laws.exceptions import DomainError, MatrixFormatError, NonSeparableError
from kernel_scaling_laws.rates import compare
from kernel_scaling_laws.schema import CoefficientEstimate, GramSpectrum, KernelSpec, PowerLawFit
from kernel_scaling_laws.simulator import solve_hinge_dual

logger = logging.getLogger(__name__)

KMX_MAGIC = b"KMX1"
KMX_HEADER = struct.Struct("<4sQQ")
TEACHER_LAMBDA = 1e-6
TEACHER_TOL = 1e-4
MIN_AUTO_LENGTH = 50

MatrixFormat = Literal["csv", "kmx"]


def _check_finite(matrix: np.ndarray, source: str) -> np.ndarray:
    if not np.all(np.isfinite(matrix)):
        raise MatrixFormatError(f"{source} contains non-finite entries")
    return matrix


def load_matrix(path: Union[str, Path], format: MatrixFormat = "csv") -> np.ndarray:
    """Read a headerless CSV or a KMX binary matrix."""
    path = Path(path)
    match format:
        case "csv":
            try:
                matrix = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
            except ValueError as exc:
                raise MatrixFormatError(f"{path}: {exc}") from exc
        case "kmx":
            data = path.read_bytes()
            if len(data) < KMX_HEADER.size:
                raise MatrixFormatError(f"{path}: malformed header ({len(data)} bytes)")
            magic, rows, cols = KMX_HEADER.unpack_from(data)
            if magic != KMX_MAGIC:
                raise MatrixFormatError(f"{path}: malformed header, magic {magic!r}")
            payload = data[KMX_HEADER.size:]
            if len(payload) != rows * cols * 8:
                raise MatrixFormatError(
                    f"{path}: dimension mismatch, {rows}x{cols} needs {rows * cols * 8} bytes, got {len(payload)}"
                )
            matrix = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(float)
        case _:
            raise DomainError(f"unknown matrix format {format!r}")
    return _check_finite(matrix, str(path))


def write_matrix(path: Union[str, Path], matrix: np.ndarray, format: MatrixFormat = "csv") -> Path:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    match format:
        case "csv":
            text = "\n".join(",".join(repr(float(x)) for x in row) for row in matrix) + "\n"
            return atomic_write(path, text)
        case "kmx":
            rows, cols = matrix.shape
            payload = KMX_HEADER.pack(KMX_MAGIC, rows, cols) + np.ascontiguousarray(matrix, dtype="<f8").tobytes()
            return atomic_write(path, payload)
        case _:
            raise DomainError(f"unknown matrix format {format!r}")


def load_labels(path: Union[str, Path]) -> np.ndarray:
    """Read a label vector, mapping {0, 1} or {-1, 1} onto {-1, 1}."""
    try:
        labels = np.loadtxt(path, delimiter=",", ndmin=1, dtype=float).ravel()
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: {exc}") from exc
    values = set(np.unique(labels).tolist())
    if values <= {0.0, 1.0}:
        return np.where(labels > 0, 1.0, -1.0)
    if values <= {-1.0, 1.0}:
        return labels
    raise MatrixFormatError(f"{path}: labels must be 0/1 or -1/+1, got {sorted(values)[:5]}")


def gram_matrix(X: np.ndarray, kernel: KernelSpec = KernelSpec()) -> np.ndarray:
    """Gram matrix of the rows of X for an rbf, polynomial or linear kernel."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DomainError(f"gram_matrix needs at least 2 rows, got shape {X.shape}")
    match kernel.kind:
        case "rbf":
            G = rbf_kernel(X, gamma=kernel.gamma)
        case "polynomial":
            if kernel.normalize:
                X = X / math.sqrt(float(np.mean(np.sum(X * X, axis=1))) or 1.0)
            G = polynomial_kernel(X, degree=kernel.degree, gamma=1.0, coef0=kernel.offset)
        case "linear":
            G = linear_kernel(X)
    if not np.all(np.isfinite(G)):
        raise DomainError(f"{kernel.kind} kernel produced non-finite values")
    return 0.5 * (G + G.T)


def spectral_embedding(G: np.ndarray) -> GramSpectrum:
    """Eigen-embedding Psi with Psi Psi' = G and Psi'Psi / m = diag(omega)."""
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DomainError(f"gram matrix must be square, got shape {G.shape}")
    if not np.allclose(G, G.T, rtol=1e-10, atol=1e-12 * max(float(np.abs(G).max()), 1.0)):
        raise DomainError("gram matrix is not symmetric")
    m = G.shape[0]
    try:
        eigenvalues, vectors = linalg.eigh(G / m)
    except linalg.LinAlgError as exc:
        raise DomainError(f"eigendecomposition failed: {exc}") from exc
    eigenvalues, vectors = eigenvalues[::-1], vectors[:, ::-1]
    clipped = int(np.sum(eigenvalues < 0))
    if clipped:
        logger.info(f"clipped {clipped} negative eigenvalues of the gram matrix")
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    embedding = math.sqrt(m) * vectors * np.sqrt(eigenvalues)
    return GramSpectrum(eigenvalues=eigenvalues, embedding=embedding, clipped=clipped)


def fit_teacher(
    spectrum: GramSpectrum,
    labels: np.ndarray,
    lam: float = TEACHER_LAMBDA,
    method: Literal["hinge", "logistic"] = "hinge",
    tol: float = TEACHER_TOL,
) -> np.ndarray:
    """Teacher vector theta* with sign(Psi theta*) = labels."""
    labels = np.asarray(labels, dtype=float)
    psi = spectrum.embedding
    m = spectrum.m
    if labels.shape != (m,):
        raise DomainError(f"expected {m} labels, got {labels.shape}")
    if not set(np.unique(labels).tolist()) <= {-1.0, 1.0}:
        raise DomainError("labels must be -1 or +1")
    C = 1.0 / (2.0 * m * lam)
    match method:
        case "hinge":
            alpha, _, _ = solve_hinge_dual(psi @ psi.T, labels, C, tol)
            teacher = psi.T @ (alpha * labels)
        case "logistic":
            model = LogisticRegression(C=C, fit_intercept=False, max_iter=10_000)
            teacher = model.fit(psi, labels).coef_.ravel()
    violations = int(np.sum(np.where(psi @ teacher > 0, 1.0, -1.0) != labels))
    if violations:
        raise NonSeparableError(f"teacher misclassifies {violations} of {m} points", violations=violations)
    return teacher


def cumulative_curves(spectrum: GramSpectrum) -> tuple[np.ndarray, np.ndarray]:
    """Suffix sums C1(k) = sum_{j>=k} omega_j and C2(k) = sum_{j>=k} omega_j theta_j^2."""
    if spectrum.teacher is None:
        raise DomainError("cumulative curves need a fitted teacher")
    omega = spectrum.eigenvalues
    c1 = np.cumsum(omega[::-1])[::-1]
    c2 = np.cumsum((omega * spectrum.teacher ** 2)[::-1])[::-1]
    return c1, c2


def cumulative_table(spectrum: GramSpectrum) -> np.ndarray:
    """Rows (k, C1(k), C2(k))."""
    c1, c2 = cumulative_curves(spectrum)
    return np.column_stack([np.arange(1, c1.size + 1, dtype=float), c1, c2])


def fit_powerlaw(
    xs: np.ndarray,
    ys: np.ndarray,
    k_min: Optional[int] = None,
    k_max: Optional[int] = None,
) -> PowerLawFit:
    """Least squares on (log x, log y) over the 1-based index range [k_min, k_max]."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    k_min = 1 if k_min is None else k_min
    k_max = len(xs) if k_max is None else k_max
    x, y = xs[k_min - 1 : k_max], ys[k_min - 1 : k_max]
    if x.size < 3:
        raise DomainError(f"fit range [{k_min}, {k_max}] holds fewer than 3 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError(f"nonpositive values in fit range [{k_min}, {k_max}]")
    fit = stats.linregress(np.log(x), np.log(y))
    return PowerLawFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        k_min=k_min,
        k_max=k_max,
        r_squared=min(max(float(fit.rvalue) ** 2, 0.0), 1.0),
    )


def auto_range(
    sequence: np.ndarray,
    k_min: Optional[int] = None,
    k_max: Optional[int] = None,
) -> tuple[int, int]:
    """Fit range over indices 0.5% to 10% of the length unless overridden.

    Past roughly a tenth of the sample count the empirical spectrum bends
    away from its population power law and the cumulative slopes steepen.
    """
    length = len(sequence)
    if length < MIN_AUTO_LENGTH:
        raise DomainError(f"sequence of length {length} is too short for an automatic fit range")
    return (
        k_min if k_min is not None else max(int(0.005 * length), 1),
        k_max if k_max is not None else int(0.1 * length),
    )


def estimate_coefficients(
    spectrum: GramSpectrum,
    range1: Optional[tuple[int, int]] = None,
    range2: Optional[tuple[int, int]] = None,
) -> CoefficientEstimate:
    """alpha = 1 - slope(C1) and r = -slope(C2) / (2 alpha)."""
    c1, c2 = cumulative_curves(spectrum)
    ks = np.arange(1, c1.size + 1, dtype=float)
    range1 = range1 or auto_range(c1)
    range2 = range2 or auto_range(c2)
    capacity = fit_powerlaw(ks, c1, *range1)
    source = fit_powerlaw(ks, c2, *range2)

    alpha_hat = 1.0 - capacity.slope
    if alpha_hat <= 0:
        raise DomainError(f"capacity fit gives nonpositive alpha {alpha_hat:.4g}")
    r_hat = -source.slope / (2.0 * alpha_hat)

    outside = alpha_hat <= 1.0 or r_hat < 0.0
    if outside:
        logger.warning(f"estimate alpha={alpha_hat:.4g}, r={r_hat:.4g} lies outside the rate formulas' domain")
    return CoefficientEstimate(
        alpha_hat=alpha_hat,
        r_hat=r_hat,
        capacity_fit=capacity,
        source_fit=source,
        predicted=None if outside else compare(alpha_hat, r_hat),
        outside_domain=outside,
        clipped_modes=spectrum.clipped,
    )


def estimate_from_data(
    X: np.ndarray,
    labels: np.ndarray,
    kernel: KernelSpec = KernelSpec(),
    range1: Optional[tuple[int, int]] = None,
    range2: Optional[tuple[int, int]] = None,
    teacher_method: Literal["hinge", "logistic"] = "hinge",
    gram: bool = False,
) -> tuple[CoefficientEstimate, GramSpectrum]:
    """Gram matrix, embedding, teacher and fits in one pass.

    With gram=True, X is taken to be the gram matrix itself.
    """
    G = np.asarray(X, dtype=float) if gram else gram_matrix(X, kernel)
    spectrum = spectral_embedding(G)
    teacher = fit_teacher(spectrum, labels, method=teacher_method)
    spectrum = spectrum.model_copy(update={"teacher": teacher})
    return estimate_coefficients(spectrum, range1, range2), spectrum
