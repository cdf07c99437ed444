from typing import Any, Literal, Optional
import math
import os

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _as_float_array(value: Any) -> np.ndarray:
    array = np.array(value, dtype=float)
    array.setflags(write=False)
    return array


class ArrayModel(BaseModel):
    """Base for records that carry numpy arrays"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


# Spectra
class PowerLawModel(BaseModel):
    """Power-law spectrum omega_k = k^-alpha with teacher k^-(1+alpha(2r-1))/2, truncated at p_cut"""
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(gt=1.0)
    r: float = Field(ge=0.0)
    p_cut: int = Field(default=10_000, ge=1)


class ExplicitSpectrum(ArrayModel):
    """Arbitrary spectrum: descending positive eigenvalues and matching teacher components"""
    eigenvalues: np.ndarray
    teacher: np.ndarray

    @field_validator("eigenvalues", "teacher", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        array = _as_float_array(value)
        if array.ndim != 1 or array.size == 0:
            raise ValueError("expected a non-empty one-dimensional array")
        if not np.all(np.isfinite(array)):
            raise ValueError("array contains non-finite entries")
        return array

    @model_validator(mode="after")
    def _check(self) -> "ExplicitSpectrum":
        if self.eigenvalues.shape != self.teacher.shape:
            raise ValueError(
                f"eigenvalues and teacher differ in length: "
                f"{self.eigenvalues.size} != {self.teacher.size}"
            )
        if np.any(self.eigenvalues <= 0):
            raise ValueError("eigenvalues must be strictly positive")
        if np.any(np.diff(self.eigenvalues) > 0):
            raise ValueError("eigenvalues must be nonincreasing")
        return self

    @property
    def p_cut(self) -> int:
        return int(self.eigenvalues.size)


# State evolution
class SolverConfig(BaseModel):
    """Numerical settings shared by the fixed-point solvers"""
    model_config = ConfigDict(frozen=True)

    tol: float = Field(default=1e-9, gt=0.0)
    damping: float = Field(default=0.5, gt=0.0, le=1.0)
    max_iter: int = Field(default=50_000, ge=1)
    eta_clamp: float = Field(default=1.0 - 1e-12, gt=0.0, lt=1.0)
    quad_tol: float = Field(default=1e-10, gt=0.0)
    min_damping: float = Field(default=1.0 / 64, gt=0.0, le=1.0)
    oscillation_window: int = Field(default=10, ge=2)


class SolverDiagnostics(BaseModel):
    """Convergence record attached to every fixed point"""
    model_config = ConfigDict(validate_assignment=True)

    iterations: int
    residuals: dict[str, float]
    damping_trace: list[float] = Field(default_factory=list)
    clamped: bool = False
    converged: bool = True


class OrderParameters(BaseModel):
    """Converged state-evolution quantities

    z may be exactly 0 only for unregularized ridge with n >= p_cut, where the
    estimator interpolates and the resolvent sums are taken at their limit.
    """
    method: Literal["maxmargin", "hinge", "ridge"]
    n: int = Field(ge=1)
    lam: float = Field(ge=0.0)
    m: float
    q: float = Field(gt=0.0)
    V: float = Field(ge=0.0)
    rhat1: float
    rhat2: float = Field(ge=0.0)
    z: float = Field(ge=0.0)
    rho: float = Field(gt=0.0)
    eta: float = Field(ge=0.0, le=1.0)
    diagnostics: Optional[SolverDiagnostics] = None


class CurvePoint(BaseModel):
    """One point of a learning curve"""
    n: int = Field(ge=1)
    value: float = Field(ge=0.0)
    stderr: Optional[float] = None
    lam: Optional[float] = None
    seeds: Optional[int] = None


class SeedRecord(BaseModel):
    """One trained classifier inside an empirical learning curve"""
    n: int
    seed: int
    value: float
    lam: float
    support_fraction: Optional[float] = None


class CurveFailure(BaseModel):
    """A sweep point whose solver or trainer failed"""
    n: int
    error: str
    message: str


class PointDiagnostics(BaseModel):
    """Fixed point behind one theory point"""
    n: int
    lam: Optional[float] = None
    eta: float
    z: float
    diagnostics: Optional[SolverDiagnostics] = None


class CurveMeta(BaseModel):
    """Parameters a learning curve was computed with"""
    alpha: Optional[float] = None
    r: Optional[float] = None
    p_cut: Optional[int] = None
    ell: Optional[float] = None
    lam: Optional[float] = None
    sigma: float = 0.0
    rule: Literal["fixed", "power", "optimal", "maxmargin"] = "fixed"
    excess: bool = False


CurveLabel = Literal[
    "theory-svm", "theory-ridge", "theory-hinge", "sim-svm", "sim-ridge", "sim-hinge"
]


class LearningCurve(BaseModel):
    """Ordered (n, error) pairs with the failures that left gaps"""
    points: list[CurvePoint]
    label: CurveLabel
    meta: CurveMeta = Field(default_factory=CurveMeta)
    failures: list[CurveFailure] = Field(default_factory=list)
    records: list[SeedRecord] = Field(default_factory=list)
    diagnostics: list[PointDiagnostics] = Field(default_factory=list)

    @field_validator("points")
    @classmethod
    def _increasing(cls, points: list[CurvePoint]) -> list[CurvePoint]:
        for previous, current in zip(points, points[1:]):
            if current.n <= previous.n:
                raise ValueError(f"sample counts must increase: {previous.n} then {current.n}")
        return points

    @property
    def ns(self) -> np.ndarray:
        return np.array([point.n for point in self.points], dtype=float)

    @property
    def values(self) -> np.ndarray:
        return np.array([point.value for point in self.points], dtype=float)


class LambdaRule(BaseModel):
    """How the regularization is chosen at each sample count"""
    kind: Literal["fixed", "power", "optimal"] = "fixed"
    value: float = Field(default=0.0, ge=0.0)
    grid: Optional[list[float]] = None

    def at(self, n: int) -> float:
        """Regularization for the fixed and power rules."""
        match self.kind:
            case "fixed":
                return self.value
            case "power":
                return float(n) ** (-self.value)
            case _:
                raise ValueError("the optimal rule has no closed-form lambda")

    def optimal_grid(self) -> list[float]:
        if self.grid:
            return sorted(self.grid)
        return [float(x) for x in np.logspace(-8, 2, 41)]


# Rates
class RateReport(BaseModel):
    """Closed-form rate exponents for one (alpha, r) pair"""
    alpha: float
    r: float
    a_svm: float
    a_ridge_opt: float
    ell_star_ridge: float
    ell_star_hinge: float
    a_worst_case: Optional[float] = None
    a_noisy_opt: float
    a_noisy_crossover: float
    b: float = 1.0 / 3.0
    svm_beats_ridge: bool
    svm_beats_worst_case: Optional[bool] = None


# Simulation
class SyntheticDataset(ArrayModel):
    """Gaussian-design sample with its teacher, labels and noise draws"""
    features: np.ndarray
    teacher: np.ndarray
    labels: np.ndarray
    noise: np.ndarray
    sigma: float = 0.0
    seed: int = 0

    @field_validator("features", "teacher", "labels", "noise", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        return _as_float_array(value)

    @model_validator(mode="after")
    def _shapes(self) -> "SyntheticDataset":
        n, p = self.features.shape
        if self.teacher.shape != (p,):
            raise ValueError(f"teacher length {self.teacher.size} != feature dimension {p}")
        if self.labels.shape != (n,) or self.noise.shape != (n,):
            raise ValueError(f"labels and noise must have length {n}")
        return self

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def p(self) -> int:
        return int(self.features.shape[1])


class LinearClassifier(ArrayModel):
    """Linear estimator w_hat, with dual coefficients when trained in the dual"""
    weights: np.ndarray
    dual_coeffs: Optional[np.ndarray] = None
    lam: float
    method: Literal["ridge", "hinge"]
    C: Optional[float] = None
    kkt_violation: Optional[float] = None
    iterations: Optional[int] = None

    @field_validator("weights", "dual_coeffs", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> Optional[np.ndarray]:
        if value is None:
            return None
        return _as_float_array(value)

    @field_validator("weights")
    @classmethod
    def _finite(cls, weights: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(weights)):
            raise ValueError("classifier weights are not finite")
        return weights


# Estimation
class KernelSpec(BaseModel):
    """Kernel used to build a gram matrix"""
    kind: Literal["rbf", "polynomial", "linear"] = "rbf"
    gamma: float = Field(default=1.0, ge=0.0)
    degree: int = Field(default=5, ge=1)
    offset: float = 1.0
    normalize: bool = True


class GramSpectrum(ArrayModel):
    """Eigen-decomposition of a gram matrix as a feature embedding"""
    eigenvalues: np.ndarray
    embedding: np.ndarray
    teacher: Optional[np.ndarray] = None
    clipped: int = 0

    @field_validator("eigenvalues", "embedding", "teacher", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> Optional[np.ndarray]:
        if value is None:
            return None
        return _as_float_array(value)

    @property
    def m(self) -> int:
        return int(self.eigenvalues.size)


class PowerLawFit(BaseModel):
    """Least-squares line through (log x, log y)"""
    slope: float
    intercept: float
    k_min: int
    k_max: int
    r_squared: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _range(self) -> "PowerLawFit":
        if self.k_min >= self.k_max:
            raise ValueError(f"empty fit range [{self.k_min}, {self.k_max}]")
        return self


class CoefficientEstimate(BaseModel):
    """Source and capacity coefficients read off cumulative spectral curves"""
    alpha_hat: float
    r_hat: float
    capacity_fit: PowerLawFit
    source_fit: PowerLawFit
    predicted: Optional[RateReport] = None
    outside_domain: bool = False
    clipped_modes: int = 0

    @field_validator("alpha_hat")
    @classmethod
    def _positive(cls, alpha_hat: float) -> float:
        if not math.isfinite(alpha_hat) or alpha_hat <= 0:
            raise ValueError(f"estimated capacity must be positive, got {alpha_hat}")
        return alpha_hat


# Command line
Command = Literal["theory-rates", "se-solve", "se-sweep", "simulate", "estimate", "fit-curve"]

_MODEL_COMMANDS = {"theory-rates", "se-solve", "se-sweep", "simulate"}
_GRID_COMMANDS = {"se-solve", "se-sweep", "simulate"}


def parse_grid(text: str) -> list[float]:
    """Expand 'start:stop:xF', 'start:stop:+S' or a comma list into grid values."""
    text = text.strip()
    if ":" not in text:
        return [float(item) for item in text.split(",") if item.strip()]
    try:
        start_text, stop_text, step_text = text.split(":")
        start, stop = float(start_text), float(stop_text)
    except ValueError:
        raise ValueError(f"grid {text!r} is not of the form start:stop:xFACTOR or start:stop:+STEP")
    values = []
    if step_text.startswith("x"):
        factor = float(step_text[1:])
        if factor <= 1 or start <= 0:
            raise ValueError(f"geometric grid {text!r} needs start > 0 and factor > 1")
        value = start
        while value <= stop * (1 + 1e-12):
            values.append(value)
            value *= factor
    elif step_text.startswith("+"):
        step = float(step_text[1:])
        if step <= 0:
            raise ValueError(f"arithmetic grid {text!r} needs a positive step")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [start + i * step for i in range(count)]
    else:
        raise ValueError(f"grid step {step_text!r} must start with 'x' or '+'")
    return values


class RunConfig(BaseModel):
    """Everything one CLI invocation needs"""
    command: Command
    alpha: Optional[float] = None
    r: Optional[float] = None
    p_cut: int = Field(default=10_000, ge=1)
    method: Literal["maxmargin", "svm", "hinge", "ridge"] = "maxmargin"
    n: Optional[list[int]] = None
    lam: Optional[float] = Field(default=None, ge=0.0)
    ell: Optional[float] = Field(default=None, ge=0.0)
    optimal: bool = False
    lambda_grid: Optional[list[float]] = None
    sigma: float = Field(default=0.0, ge=0.0)
    seeds: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)
    excess: bool = False
    fit: bool = False
    table: bool = False
    input: Optional[str] = None
    labels: Optional[str] = None
    format: Literal["csv", "kmx"] = "csv"
    gram: bool = False
    kernel: Literal["rbf", "polynomial", "linear"] = "rbf"
    gamma: float = Field(default=1.0, ge=0.0)
    degree: int = Field(default=5, ge=1)
    offset: float = 1.0
    normalize: bool = True
    teacher_method: Literal["hinge", "logistic"] = "hinge"
    range1: Optional[tuple[int, int]] = None
    range2: Optional[tuple[int, int]] = None
    out: str = "."
    jobs: Optional[int] = Field(default=None, ge=1)
    log_level: str = Field(default_factory=lambda: os.getenv("KSL_LOG_LEVEL", "WARNING"))
    tol: Optional[float] = Field(default=None, gt=0.0)
    damping: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    max_iter: Optional[int] = Field(default=None, ge=1)
    svm_tol: float = Field(default=1e-6, gt=0.0)

    @field_validator("n", mode="before")
    @classmethod
    def _grid(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [int(round(x)) for x in parse_grid(value)]
        if isinstance(value, (int, float)):
            return [int(value)]
        return value

    @field_validator("lambda_grid", mode="before")
    @classmethod
    def _lambda_grid(cls, value: Any) -> Any:
        return parse_grid(value) if isinstance(value, str) else value

    @field_validator("range1", "range2", mode="before")
    @classmethod
    def _range(cls, value: Any) -> Any:
        if isinstance(value, str):
            lo, _, hi = value.partition(":")
            return int(lo), int(hi)
        return value

    @model_validator(mode="after")
    def _required(self) -> "RunConfig":
        if self.command in _MODEL_COMMANDS and (self.alpha is None or self.r is None):
            raise ValueError(f"{self.command} requires --alpha and --r")
        if self.command in _GRID_COMMANDS:
            if not self.n:
                raise ValueError(f"{self.command} requires --n")
            if any(b <= a for a, b in zip(self.n, self.n[1:])):
                raise ValueError(f"--n must be strictly increasing, got {self.n}")
            if self.command == "se-solve" and len(self.n) != 1:
                raise ValueError("se-solve takes a single --n")
        if self.command in {"estimate", "fit-curve"} and not self.input:
            raise ValueError(f"{self.command} requires --input")
        if self.command == "estimate" and not self.labels:
            raise ValueError("estimate requires --labels")
        chosen = sum([self.lam is not None, self.ell is not None, self.optimal])
        if chosen > 1:
            raise ValueError("--lambda, --ell and --optimal are mutually exclusive")
        if self.command in _GRID_COMMANDS and self.method in {"hinge", "ridge"} and chosen == 0:
            raise ValueError(f"method {self.method} requires one of --lambda, --ell or --optimal")
        return self

    def power_law(self) -> PowerLawModel:
        return PowerLawModel(alpha=self.alpha, r=self.r, p_cut=self.p_cut)

    def lambda_rule(self) -> LambdaRule:
        if self.optimal:
            return LambdaRule(kind="optimal", grid=self.lambda_grid)
        if self.ell is not None:
            return LambdaRule(kind="power", value=self.ell)
        return LambdaRule(kind="fixed", value=self.lam or 0.0)

    def solver_config(self) -> SolverConfig:
        overrides = {key: getattr(self, key) for key in ("tol", "damping", "max_iter") if getattr(self, key) is not None}
        return SolverConfig(**overrides)

    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(
            kind=self.kernel, gamma=self.gamma, degree=self.degree, offset=self.offset, normalize=self.normalize
        )
