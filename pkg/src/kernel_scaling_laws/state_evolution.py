"""Self-consistent equations for max-margin, regularized hinge and ridge classifiers.

All resolvent sums are written in terms of kappa = z / n, so that
(n/z) / (1 + n omega / z) = 1 / (omega + kappa) stays finite when z -> 0.
"""
from functools import partial
from typing import Callable, Literal, Optional, Sequence
import logging
import math

import numpy as np
from scipy import integrate, optimize, special

from kernel_scaling_laws.exceptions import (
    BracketError,
    ConvergenceError,
    DomainError,
    KernelScalingError,
    QuadratureError,
    SelfConsistencyBreakdown,
)
from kernel_scaling_laws.schema import (
    CurveFailure,
    CurveMeta,
    CurvePoint,
    LambdaRule,
    LearningCurve,
    OrderParameters,
    PointDiagnostics,
    SolverConfig,
    SolverDiagnostics,
)
from kernel_scaling_laws.spectrum import SpectrumLike, as_spectrum, rho as spectrum_rho
from kernel_scaling_laws.spectrum import shifted_sum, trace_sigma

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = SolverConfig()
GAUSSIAN_TAIL = 12.0
QUAD_LIMIT = 500
_SQRT_2PI = math.sqrt(2.0 * math.pi)

Method = Literal["maxmargin", "hinge", "ridge"]


def _gaussian_density(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT_2PI


def _gaussian_cdf(x: float) -> float:
    return 0.5 * special.erfc(-x / math.sqrt(2.0))


def _erf_difference(a: float, b: float) -> float:
    """erf(a) - erf(b) without cancellation when a and b share a sign."""
    if a >= 0 and b >= 0:
        return float(special.erfc(b) - special.erfc(a))
    if a <= 0 and b <= 0:
        return float(special.erfc(-a) - special.erfc(-b))
    return float(special.erf(a) - special.erf(b))


def gaussian_indicator_integral(
    q: float,
    eta: float,
    lower: float,
    upper: float,
    moment: int = 0,
    config: SolverConfig = DEFAULT_CONFIG,
) -> float:
    """Integral of Dx [1 + erf(sqrt(eta / (2(1 - eta))) x)] (1 - sqrt(q) x)^moment.

    Dx is the standard Gaussian measure. Infinite bounds are cut at twelve
    standard deviations. At or above the eta clamp the bracket is replaced by
    its limit 2 * 1{x > 0}.
    """
    if q <= 0:
        raise DomainError(f"q must be positive, got {q}")
    if moment not in (0, 1, 2):
        raise DomainError(f"moment must be 0, 1 or 2, got {moment}")
    if lower > upper:
        raise DomainError(f"integration bounds out of order: {lower} > {upper}")
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0, 1], got {eta}")

    lo = max(lower, -GAUSSIAN_TAIL)
    hi = min(upper, GAUSSIAN_TAIL)
    sqrt_q = math.sqrt(q)

    if eta >= config.eta_clamp:
        lo = max(lo, 0.0)

        def integrand(x: float) -> float:
            return 2.0 * _gaussian_density(x) * (1.0 - sqrt_q * x) ** moment
    else:
        slope = math.sqrt(eta / (2.0 * (1.0 - eta)))

        def integrand(x: float) -> float:
            return _gaussian_density(x) * (1.0 + math.erf(slope * x)) * (1.0 - sqrt_q * x) ** moment

    if lo >= hi:
        return 0.0

    points = [0.0] if lo < 0.0 < hi else None
    result = integrate.quad(
        integrand,
        lo,
        hi,
        epsabs=0.0,
        epsrel=config.quad_tol,
        limit=QUAD_LIMIT,
        points=points,
        full_output=1,
    )
    if len(result) > 3:
        value, abserr = result[0], result[1]
        if abserr > max(1e3 * config.quad_tol * abs(value), 1e-300):
            raise QuadratureError(
                f"quadrature on [{lo:.6g}, {hi:.6g}] missed tolerance: "
                f"estimate {value!r}, error {abserr!r}: {result[3]}"
            )
    return float(result[0])


def hinge_prox(omega: float, y: float, V: float) -> float:
    """Proximal map of the hinge loss with step V."""
    if V <= 0:
        raise DomainError(f"V must be positive, got {V}")
    margin = y * omega
    if margin <= 1.0 - V:
        return omega + y * V
    if margin <= 1.0:
        return y
    return omega


# Shared pieces of the fixed-point maps
def _solve_kappa(model: SpectrumLike, target: float) -> float:
    """kappa solving sum omega / (omega + kappa) = target, 0 when target >= p_cut."""
    p_cut = as_spectrum(model).p_cut
    if target <= 0:
        raise DomainError(f"degrees-of-freedom target must be positive, got {target}")
    if target >= p_cut:
        return 0.0
    upper = 2.0 * trace_sigma(model) / target

    def excess(kappa: float) -> float:
        return shifted_sum(model, kappa, 1, 1) - target

    try:
        return float(optimize.brentq(excess, 0.0, upper, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))
    except ValueError as exc:
        raise BracketError(f"no sign change for kappa on [0, {upper:.6g}] at target {target:.6g}") from exc


def _overlaps(model: SpectrumLike, kappa: float, rhat1: float, rhat2: float, n: int) -> tuple[float, float]:
    m = rhat1 * shifted_sum(model, kappa, 2, 1, teacher_weighted=True)
    q = rhat1 ** 2 * shifted_sum(model, kappa, 3, 2, teacher_weighted=True) + rhat2 / n * shifted_sum(
        model, kappa, 2, 2
    )
    return m, q


def _susceptibility_sum(model: SpectrumLike, kappa: float) -> float:
    """S = sum omega kappa / (omega + kappa)."""
    if kappa == 0.0:
        return 0.0
    return kappa * shifted_sum(model, kappa, 1, 1)


def _eta(m: float, q: float, rho: float, clamp: float) -> tuple[float, bool]:
    raw = float(m * m / (rho * q))
    return min(raw, 1.0), bool(raw >= clamp)


def _hinge_loss_side(
    q: float,
    eta: float,
    V: Optional[float],
    rho: float,
    config: SolverConfig,
) -> tuple[float, float, float]:
    """(I0, rhat1, rhat2) for the hinge loss; V=None is the max-margin limit."""
    eta_c = min(eta, config.eta_clamp)
    sqrt_q = math.sqrt(q)
    upper = 1.0 / sqrt_q
    spread = math.sqrt(q * (1.0 - eta_c))
    s = math.sqrt(2.0) * spread
    if V is None:
        i0 = gaussian_indicator_integral(q, eta_c, -math.inf, upper, 0, config)
        i2 = gaussian_indicator_integral(q, eta_c, -math.inf, upper, 2, config)
        numerator = _SQRT_2PI * (1.0 + special.erf(1.0 / s)) + 2.0 * spread * math.exp(-1.0 / s ** 2)
        rhat2 = i2 / i0 ** 2
    else:
        lower = (1.0 - V) / sqrt_q
        i0 = gaussian_indicator_integral(q, eta_c, lower, upper, 0, config)
        i2 = gaussian_indicator_integral(q, eta_c, lower, upper, 2, config)
        below = gaussian_indicator_integral(q, eta_c, -math.inf, lower, 0, config)
        numerator = (
            _SQRT_2PI * _erf_difference(1.0 / s, (1.0 - V) / s)
            + 2.0 * spread * (math.exp(-1.0 / s ** 2) - math.exp(-((1.0 - V) / s) ** 2))
            + _SQRT_2PI * V * special.erfc((V - 1.0) / s)
        )
        rhat2 = (V * V * below + i2) / i0 ** 2
    if i0 <= 0:
        raise DomainError(f"vanishing margin mass at q={q:.6g}, eta={eta:.6g}")
    rhat1 = numerator / (2.0 * math.pi * math.sqrt(rho) * i0)
    return i0, rhat1, rhat2


def _iterate(
    step: Callable[[dict[str, float]], tuple[dict[str, float], dict[str, float]]],
    state: dict[str, float],
    config: SolverConfig,
    label: str,
) -> tuple[dict[str, float], dict[str, float], SolverDiagnostics]:
    """Damped fixed-point iteration of step over the state variables."""
    damping = config.damping
    damping_trace = [damping]
    last_signs: list[float] = []
    residuals: dict[str, float] = {}

    for iteration in range(1, config.max_iter + 1):
        proposal, aux = step(state)
        residuals = {
            key: float(abs(proposal[key] - state[key]) / max(abs(state[key]), 1e-300)) for key in state
        }
        if max(residuals.values()) < config.tol:
            logger.debug(f"{label} converged after {iteration} iterations")
            return state, aux, SolverDiagnostics(
                iterations=iteration,
                residuals=residuals,
                damping_trace=damping_trace,
            )

        sign = math.copysign(1.0, proposal["q"] - state["q"])
        last_signs.append(sign)
        if len(last_signs) > config.oscillation_window:
            last_signs.pop(0)
        if len(last_signs) == config.oscillation_window and all(
            a != b for a, b in zip(last_signs, last_signs[1:])
        ):
            if damping > config.min_damping:
                damping = max(damping / 2.0, config.min_damping)
                damping_trace.append(damping)
                logger.warning(f"{label} oscillating, damping lowered to {damping:g}")
            last_signs.clear()

        state = {key: damping * proposal[key] + (1.0 - damping) * state[key] for key in state}

    raise ConvergenceError(
        f"{label} did not converge in {config.max_iter} iterations, residuals {residuals}",
        iterations=config.max_iter,
        residuals=residuals,
        damping_trace=damping_trace,
    )


def _check_n(n: int) -> None:
    if n < 1:
        raise DomainError(f"sample count must be at least 1, got {n}")


def _initial_state(rho: float) -> dict[str, float]:
    q0, eta0 = 1.0, 0.5
    return {"m": math.sqrt(eta0 * rho * q0), "q": q0}


def solve_maxmargin(model: SpectrumLike, n: int, config: SolverConfig = DEFAULT_CONFIG) -> OrderParameters:
    """Fixed point of the max-margin (lambda = 0+) hinge system.

    V is reported in the rescaled form S(z) = sum omega / (1 + n omega / z),
    the finite limit of lambda times the susceptibility.
    """
    _check_n(n)
    rho = spectrum_rho(model)
    clamped = False

    def step(state: dict[str, float]) -> tuple[dict[str, float], dict[str, float]]:
        nonlocal clamped
        eta, hit = _eta(state["m"], state["q"], rho, config.eta_clamp)
        clamped = clamped or hit
        i0, rhat1, rhat2 = _hinge_loss_side(state["q"], eta, None, rho, config)
        kappa = _solve_kappa(model, n * i0)
        m, q = _overlaps(model, kappa, rhat1, rhat2, n)
        return {"m": m, "q": q}, {"rhat1": rhat1, "rhat2": rhat2, "kappa": kappa}

    state, aux, diagnostics = _iterate(step, _initial_state(rho), config, f"max-margin n={n}")
    eta, hit = _eta(state["m"], state["q"], rho, config.eta_clamp)
    if clamped or hit:
        logger.warning(f"max-margin n={n}: eta reached the clamp {config.eta_clamp}")
    diagnostics.clamped = clamped or hit
    kappa = aux["kappa"]
    return OrderParameters(
        method="maxmargin",
        n=n,
        lam=0.0,
        m=state["m"],
        q=state["q"],
        V=_susceptibility_sum(model, kappa),
        rhat1=aux["rhat1"],
        rhat2=aux["rhat2"],
        z=n * kappa,
        rho=rho,
        eta=eta,
        diagnostics=diagnostics,
    )


def solve_hinge_regularized(
    model: SpectrumLike,
    n: int,
    lam: float,
    config: SolverConfig = DEFAULT_CONFIG,
) -> OrderParameters:
    """Fixed point of the hinge system for the risk (1/n) sum hinge + lam |w|^2.

    The prox step is V = S(z) / (2 n lam); the integration range of the
    margin equations is clipped to [(1 - V)/sqrt(q), 1/sqrt(q)].
    """
    _check_n(n)
    if lam < 0:
        raise DomainError(f"lambda must be nonnegative, got {lam}")
    if lam == 0:
        params = solve_maxmargin(model, n, config)
        return params.model_copy(update={"method": "hinge"})

    rho = spectrum_rho(model)
    penalty = 2.0 * n * lam
    clamped = False

    def step(state: dict[str, float]) -> tuple[dict[str, float], dict[str, float]]:
        nonlocal clamped
        eta, hit = _eta(state["m"], state["q"], rho, config.eta_clamp)
        clamped = clamped or hit
        i0, rhat1, rhat2 = _hinge_loss_side(state["q"], eta, state["V"], rho, config)
        kappa = _solve_kappa(model, n * i0)
        m, q = _overlaps(model, kappa, rhat1, rhat2, n)
        V = _susceptibility_sum(model, kappa) / penalty
        return {"m": m, "q": q, "V": max(V, 1e-300)}, {"rhat1": rhat1, "rhat2": rhat2, "kappa": kappa}

    initial = _initial_state(rho)
    kappa0 = max(n * lam, 1.0) / n
    initial["V"] = max(_susceptibility_sum(model, kappa0) / penalty, 1e-300)

    state, aux, diagnostics = _iterate(step, initial, config, f"hinge n={n} lambda={lam:g}")
    eta, hit = _eta(state["m"], state["q"], rho, config.eta_clamp)
    diagnostics.clamped = clamped or hit
    if diagnostics.clamped:
        logger.warning(f"hinge n={n} lambda={lam:g}: eta reached the clamp {config.eta_clamp}")
    return OrderParameters(
        method="hinge",
        n=n,
        lam=lam,
        m=state["m"],
        q=state["q"],
        V=state["V"],
        rhat1=aux["rhat1"],
        rhat2=aux["rhat2"],
        z=n * aux["kappa"],
        rho=rho,
        eta=eta,
        diagnostics=diagnostics,
    )


def solve_z_ridge(model: SpectrumLike, n: int, lam: float) -> float:
    """Root of z = n lam + (z/n) sum omega / (omega + z/n) by bisection.

    The positive root is assumed unique; the map is concave in z so the
    bracket [n lam, n lam + tr Sigma] holds exactly one sign change.
    """
    _check_n(n)
    if lam < 0:
        raise DomainError(f"lambda must be nonnegative, got {lam}")
    trace = trace_sigma(model)
    p_cut = as_spectrum(model).p_cut
    rtol = 4 * np.finfo(float).eps

    if lam == 0:
        if p_cut <= n:
            return 0.0

        def reduced(z: float) -> float:
            return shifted_sum(model, z / n, 1, 1) / n - 1.0

        lo, hi, fn = 0.0, trace, reduced
    else:

        def fn(z: float) -> float:
            kappa = z / n
            return n * lam + kappa * shifted_sum(model, kappa, 1, 1) - z

        lo, hi = n * lam, n * lam + trace

    f_lo, f_hi = fn(lo), fn(hi)
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0:
        raise BracketError(f"ridge z equation has no sign change on [{lo:.6g}, {hi:.6g}]")
    return float(optimize.bisect(fn, lo, hi, xtol=1e-300, rtol=rtol, maxiter=2000))


def solve_ridge(
    model: SpectrumLike,
    n: int,
    lam: float,
    sigma: float = 0.0,
    config: SolverConfig = DEFAULT_CONFIG,
) -> OrderParameters:
    """Closed-form ridge fixed point for labels sign(teacher + sigma noise)."""
    if sigma < 0:
        raise DomainError(f"noise level must be nonnegative, got {sigma}")
    z = solve_z_ridge(model, n, lam)
    kappa = z / n
    rho = spectrum_rho(model)
    rhat1 = math.sqrt(2.0 / (math.pi * (rho + sigma ** 2)))

    m = rhat1 * shifted_sum(model, kappa, 2, 1, teacher_weighted=True)
    t1 = rhat1 ** 2 * shifted_sum(model, kappa, 3, 2, teacher_weighted=True)
    t2 = shifted_sum(model, kappa, 2, 2) / n
    if t2 >= 1.0:
        raise SelfConsistencyBreakdown(
            f"ridge self-consistency breakdown at n={n}, lambda={lam:g}: T2={t2:.6g} >= 1"
        )
    q = (t1 + (1.0 - 2.0 * m * rhat1) * t2) / (1.0 - t2)
    rhat2 = 1.0 + q - 2.0 * m * rhat1
    residual = abs(t1 + rhat2 * t2 - q) / q

    susceptibility = _susceptibility_sum(model, kappa)
    V = susceptibility / (n * lam) if lam > 0 else susceptibility
    eta = min(m * m / (rho * q), 1.0)
    return OrderParameters(
        method="ridge",
        n=n,
        lam=lam,
        m=m,
        q=q,
        V=V,
        rhat1=rhat1,
        rhat2=rhat2,
        z=z,
        rho=rho,
        eta=eta,
        diagnostics=SolverDiagnostics(iterations=1, residuals={"q": residual}),
    )


def misclassification_error(params: OrderParameters, sigma: float = 0.0) -> float:
    """Test error (1/pi) arccos(sqrt(rho/(rho + sigma^2) eta))."""
    cosine = math.sqrt(params.rho / (params.rho + sigma ** 2) * min(max(params.eta, 0.0), 1.0))
    return math.acos(min(cosine, 1.0)) / math.pi


def residual_error(rho: float, sigma: float) -> float:
    """Error floor of a perfectly aligned estimator under label noise."""
    if rho <= 0 or sigma < 0:
        raise DomainError(f"residual_error needs rho > 0 and sigma >= 0, got {rho}, {sigma}")
    return math.acos(math.sqrt(rho / (rho + sigma ** 2))) / math.pi


def training_loss(params: OrderParameters, config: SolverConfig = DEFAULT_CONFIG) -> float:
    """Mean hinge loss on the training set at a regularized hinge fixed point.

    The loss of a training point is the hinge gap left after the proximal
    step; its average over the fluctuating part of the field is closed form.
    """
    if params.method != "hinge" or params.lam <= 0:
        raise DomainError("training_loss needs a regularized hinge fixed point")
    slope = params.m / math.sqrt(params.rho)
    spread = math.sqrt(params.q * max(1.0 - params.eta, 0.0))
    gap = 1.0 - params.V

    def expected_gap(u: float) -> float:
        if spread == 0.0:
            return max(1.0 - hinge_prox(slope * u, 1.0, params.V), 0.0)
        shift = gap - slope * u
        t = shift / spread
        return spread * (t * _gaussian_cdf(t) + _gaussian_density(t))

    value, _ = integrate.quad(
        lambda u: 2.0 * _gaussian_density(u) * expected_gap(u),
        0.0,
        GAUSSIAN_TAIL,
        epsabs=0.0,
        epsrel=config.quad_tol,
        limit=QUAD_LIMIT,
    )
    return float(value)


def weight_norm(model: SpectrumLike, params: OrderParameters) -> float:
    """Squared norm |w|^2 of the estimator described by params."""
    kappa = params.z / params.n
    return params.rhat1 ** 2 * shifted_sum(model, kappa, 2, 2, teacher_weighted=True) + (
        params.rhat2 / params.n
    ) * shifted_sum(model, kappa, 1, 2)


def approximation_error(
    model: SpectrumLike,
    lam: float,
    ratio: float = 1e3,
    config: SolverConfig = DEFAULT_CONFIG,
) -> float:
    """Regularized hinge risk in the n >> p limit, evaluated at n = ratio * p_cut."""
    if lam <= 0:
        raise DomainError(f"approximation_error needs lambda > 0, got {lam}")
    n = int(round(ratio * as_spectrum(model).p_cut))
    params = solve_hinge_regularized(model, n, lam, config)
    return training_loss(params, config) + lam * weight_norm(model, params)


def ridge_regime(alpha: float, ell: float) -> Literal["regularized", "plateau"]:
    """Ridge with lambda = n^-ell is effectively regularized for ell < alpha."""
    return "regularized" if ell < alpha else "plateau"


def hinge_regime(params: OrderParameters) -> Literal["regularized", "maxmargin"]:
    """A hinge fixed point behaves like max-margin once the prox step exceeds the margin."""
    return "maxmargin" if params.V >= 1.0 else "regularized"


def excess_error(curve: LearningCurve, rho: float, sigma: float) -> LearningCurve:
    """Subtract the label-noise floor from every point of a curve."""
    floor = residual_error(rho, sigma)
    points, failures = [], list(curve.failures)
    for point in curve.points:
        excess = point.value - floor
        if excess > 0:
            points.append(point.model_copy(update={"value": excess}))
        else:
            failures.append(
                CurveFailure(n=point.n, error="BelowResidual", message=f"error {point.value:.6g} <= floor {floor:.6g}")
            )
    return curve.model_copy(
        update={"points": points, "failures": failures, "meta": curve.meta.model_copy(update={"excess": True})}
    )


def _optimal_ridge(model: SpectrumLike, n: int, rule: LambdaRule, sigma: float, config: SolverConfig) -> tuple[float, float]:
    grid = rule.optimal_grid()
    scores = []
    for lam in grid:
        try:
            scores.append(misclassification_error(solve_ridge(model, n, lam, sigma, config), sigma))
        except KernelScalingError:
            scores.append(math.inf)
    best = int(np.argmin(scores))
    if not math.isfinite(scores[best]):
        raise DomainError(f"no lambda on the grid gives a ridge fixed point at n={n}")
    positive = [lam for lam in grid if lam > 0]
    if grid[best] <= 0 or len(positive) < 2:
        return grid[best], scores[best]

    log_grid = np.log10(positive)
    index = positive.index(grid[best])
    lo = log_grid[max(index - 1, 0)]
    hi = log_grid[min(index + 1, len(positive) - 1)]

    def objective(log_lam: float) -> float:
        try:
            return misclassification_error(solve_ridge(model, n, 10.0 ** log_lam, sigma, config), sigma)
        except KernelScalingError:
            return math.inf

    refined = optimize.minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-4})
    if refined.fun < scores[best]:
        return float(10.0 ** refined.x), float(refined.fun)
    return grid[best], scores[best]


def solve_point(
    method: Method,
    model: SpectrumLike,
    rule: LambdaRule,
    sigma: float,
    config: SolverConfig,
    n: int,
) -> tuple[CurvePoint, OrderParameters]:
    """Theory error at one sample count, with the fixed point behind it."""
    if sigma > 0 and method != "ridge":
        raise DomainError("noisy theory is only available for ridge; use the simulator for noisy SVM")
    if method == "maxmargin":
        params = solve_maxmargin(model, n, config)
        return CurvePoint(n=n, value=misclassification_error(params), lam=0.0), params
    if rule.kind == "optimal":
        if method != "ridge":
            raise DomainError("the optimal lambda rule is only available for ridge theory")
        lam, value = _optimal_ridge(model, n, rule, sigma, config)
        return CurvePoint(n=n, value=value, lam=lam), solve_ridge(model, n, lam, sigma, config)
    lam = rule.at(n)
    if method == "ridge":
        params = solve_ridge(model, n, lam, sigma, config)
    else:
        params = solve_hinge_regularized(model, n, lam, config)
    return CurvePoint(n=n, value=misclassification_error(params, sigma), lam=lam), params


_LABELS = {"maxmargin": "theory-svm", "hinge": "theory-hinge", "ridge": "theory-ridge"}


def theory_sweep(
    method: Method,
    model: SpectrumLike,
    n_grid: Sequence[int],
    lambda_rule: LambdaRule = LambdaRule(),
    sigma: float = 0.0,
    config: SolverConfig = DEFAULT_CONFIG,
    jobs: Optional[int] = None,
) -> LearningCurve:
    """Theory learning curve, one solver call per sample count.

    Failed points are listed in the curve's failures instead of aborting.
    """
    from kernel_scaling_laws.runner import run_points

    ns = [int(n) for n in n_grid]
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        raise DomainError(f"n_grid must be nonempty and increasing, got {ns}")
    if sigma > 0 and method != "ridge":
        raise DomainError("noisy theory is only available for ridge; use the simulator for noisy SVM")

    results = run_points(partial(solve_point, method, model, lambda_rule, sigma, config), ns, jobs)
    points, failures, solves = [], [], []
    for n, result in zip(ns, results):
        if isinstance(result, KernelScalingError):
            logger.warning(f"{method} point n={n} failed: {result}")
            failures.append(CurveFailure(n=n, error=type(result).__name__, message=str(result)))
        elif isinstance(result, BaseException):
            raise result
        else:
            point, params = result
            points.append(point)
            solves.append(
                PointDiagnostics(n=n, lam=point.lam, eta=params.eta, z=params.z, diagnostics=params.diagnostics)
            )

    meta = CurveMeta(
        alpha=getattr(model, "alpha", None),
        r=getattr(model, "r", None),
        p_cut=model.p_cut,
        ell=lambda_rule.value if lambda_rule.kind == "power" else None,
        lam=lambda_rule.value if lambda_rule.kind == "fixed" else None,
        sigma=sigma,
        rule="maxmargin" if method == "maxmargin" else lambda_rule.kind,
    )
    return LearningCurve(points=points, label=_LABELS[method], meta=meta, failures=failures, diagnostics=solves)


def fit_curve_slope(curve: LearningCurve) -> float:
    """Least-squares slope of log error against log n."""
    ns, values = curve.ns, curve.values
    if len(ns) < 2 or np.any(values <= 0):
        raise DomainError("slope needs at least two points with positive error")
    slope, _ = np.polyfit(np.log(ns), np.log(values), 1)
    return float(slope)
