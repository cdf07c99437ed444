import math

import numpy as np
import pytest
from scipy import integrate, optimize
from scipy.stats import norm

from kernel_scaling_laws import (
    ConvergenceError,
    DomainError,
    LambdaRule,
    OrderParameters,
    PowerLawModel,
    SelfConsistencyBreakdown,
    SolverConfig,
)
from kernel_scaling_laws.rates import (
    APPROXIMATION_EXPONENT,
    hinge_regularized_rate,
    noisy_ridge_rate,
    ridge_optimal,
    ridge_rate,
    svm_rate,
)
from kernel_scaling_laws.spectrum import rho, shifted_sum
from kernel_scaling_laws.state_evolution import (
    approximation_error,
    excess_error,
    fit_curve_slope,
    gaussian_indicator_integral,
    hinge_prox,
    hinge_regime,
    misclassification_error,
    residual_error,
    ridge_regime,
    solve_hinge_regularized,
    solve_maxmargin,
    solve_point,
    solve_ridge,
    solve_z_ridge,
    theory_sweep,
    training_loss,
)

GOLDEN_RATIO = (1 + math.sqrt(5)) / 2


def _params(eta, rho=1.0, **overrides):
    values = dict(method="ridge", n=10, lam=0.1, m=math.sqrt(eta * rho), q=1.0, V=1.0,
                  rhat1=0.5, rhat2=1.0, z=1.0, rho=rho, eta=eta)
    values.update(overrides)
    return OrderParameters(**values)


# Gaussian integrals
def test_indicator_integral_at_eta_zero():
    assert gaussian_indicator_integral(1.0, 0.0, -math.inf, 1.0) == pytest.approx(norm.cdf(1.0), abs=1e-10)
    assert gaussian_indicator_integral(1.0, 0.0, -math.inf, 1.0, moment=2) == pytest.approx(
        2 * norm.cdf(1.0) + norm.pdf(1.0), abs=1e-10
    )


def test_indicator_integral_clamped_limit():
    assert gaussian_indicator_integral(1.0, 1.0, -math.inf, 1.0) == pytest.approx(
        2 * (norm.cdf(1.0) - 0.5), abs=1e-10
    )


def test_indicator_integral_matches_closed_form(rng):
    for _ in range(100):
        q = rng.uniform(0.1, 10.0)
        a, b = np.sort(rng.uniform(-5.0, 5.0, size=2))
        mass = norm.cdf(b) - norm.cdf(a)
        first = norm.pdf(a) - norm.pdf(b)
        second = mass + a * norm.pdf(a) - b * norm.pdf(b)
        expected = mass - 2 * math.sqrt(q) * first + q * second
        assert gaussian_indicator_integral(q, 0.0, a, b) == pytest.approx(mass, rel=1e-9, abs=1e-12)
        assert gaussian_indicator_integral(q, 0.0, a, b, moment=2) == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_indicator_integral_rejects_bad_arguments():
    with pytest.raises(DomainError) as exc_info:
        gaussian_indicator_integral(1.0, 0.5, 1.0, 0.0)
    assert "out of order" in str(exc_info.value)
    with pytest.raises(DomainError):
        gaussian_indicator_integral(0.0, 0.5, 0.0, 1.0)
    with pytest.raises(DomainError):
        gaussian_indicator_integral(1.0, 1.5, 0.0, 1.0)


@pytest.mark.parametrize(
    "omega, y, V, expected",
    [
        (0.5, 1.0, 1.0, 1.0),
        (-1.0, 1.0, 0.5, -0.5),
        (2.0, 1.0, 0.5, 2.0),
        (0.8, 1.0, 0.1, 0.9),
        (0.5, -1.0, 0.25, 0.25),
    ],
)
def test_hinge_prox(omega, y, V, expected):
    assert hinge_prox(omega, y, V) == pytest.approx(expected)


def test_hinge_prox_needs_positive_step():
    with pytest.raises(DomainError):
        hinge_prox(0.5, 1.0, 0.0)


# Ridge
def test_ridge_single_mode_golden_ratio(single_mode):
    z = solve_z_ridge(single_mode, 1, 1.0)
    assert z == pytest.approx(GOLDEN_RATIO, abs=1e-12)

    params = solve_ridge(single_mode, 1, 1.0)
    assert params.m == pytest.approx(0.30476, abs=1e-4)
    assert params.q == pytest.approx(0.19649, abs=1e-4)
    assert params.eta == pytest.approx(0.47268, abs=1e-3)
    assert misclassification_error(params) == pytest.approx(0.2587, abs=1e-3)
    assert params.diagnostics.residuals["q"] < 1e-12


def test_ridge_z_interpolation_limit(single_mode):
    assert solve_z_ridge(single_mode, 1, 0.0) == 0.0
    with pytest.raises(SelfConsistencyBreakdown) as exc_info:
        solve_ridge(single_mode, 1, 0.0)
    assert "T2" in str(exc_info.value)


def test_ridge_z_matches_independent_root(ridge_model):
    n, lam = 100, 1e-3
    omega = np.arange(1, ridge_model.p_cut + 1, dtype=float) ** -ridge_model.alpha

    def equation(z):
        return n * lam + (z / n) * np.sum(omega / (omega + z / n)) - z

    expected = optimize.brentq(equation, n * lam, n * lam + omega.sum(), xtol=1e-300, rtol=1e-15)
    assert solve_z_ridge(ridge_model, n, lam) == pytest.approx(expected, rel=1e-10)


def test_ridge_z_unregularized_below_threshold(ridge_model):
    n = 100
    z = solve_z_ridge(ridge_model, n, 0.0)
    assert z > 0
    assert shifted_sum(ridge_model, z / n, 1, 1) == pytest.approx(n, rel=1e-9)


def test_ridge_rejects_negative_inputs(ridge_model):
    with pytest.raises(DomainError):
        solve_z_ridge(ridge_model, 10, -1.0)
    with pytest.raises(DomainError):
        solve_z_ridge(ridge_model, 0, 1.0)
    with pytest.raises(DomainError):
        solve_ridge(ridge_model, 10, 1.0, sigma=-1.0)


def test_ridge_error_decreases_with_n(ridge_model):
    errors = [misclassification_error(solve_ridge(ridge_model, n, n ** -0.25)) for n in (50, 100, 200, 400)]
    assert all(b < a for a, b in zip(errors, errors[1:]))


def test_noisy_ridge_excess_is_positive(ridge_model):
    sigma = 1.0
    for n in (100, 400, 1600):
        params = solve_ridge(ridge_model, n, n ** -0.25, sigma=sigma)
        assert misclassification_error(params, sigma) > residual_error(params.rho, sigma)


# Errors
def test_misclassification_error_limits():
    assert misclassification_error(_params(1.0)) == 0.0
    assert misclassification_error(_params(0.0)) == pytest.approx(0.5)
    assert misclassification_error(_params(1.0), sigma=1.0) == pytest.approx(0.25)


def test_residual_error():
    assert residual_error(3.0, 1.0) == pytest.approx(1 / 6)
    assert residual_error(1.0, 0.0) == 0.0
    with pytest.raises(DomainError):
        residual_error(0.0, 1.0)


# Max-margin and hinge
def test_maxmargin_fixed_point(small_model, fast_config):
    params = solve_maxmargin(small_model, 64, fast_config)
    assert params.diagnostics.converged
    assert params.diagnostics.iterations < fast_config.max_iter
    assert 0.0 < params.eta < 1.0
    assert 0.0 < misclassification_error(params) < 0.5

    kappa = params.z / params.n
    assert params.m == pytest.approx(
        params.rhat1 * shifted_sum(small_model, kappa, 2, 1, teacher_weighted=True), rel=1e-6
    )
    i0 = gaussian_indicator_integral(params.q, params.eta, -math.inf, 1 / math.sqrt(params.q))
    assert shifted_sum(small_model, kappa, 1, 1) == pytest.approx(params.n * i0, rel=1e-5)


def test_maxmargin_error_decreases(small_model, fast_config):
    errors = [misclassification_error(solve_maxmargin(small_model, n, fast_config)) for n in (32, 64, 128, 256)]
    assert all(b <= a for a, b in zip(errors, errors[1:]))


@pytest.mark.slow
def test_maxmargin_single_mode_overlap():
    n = 100
    params = solve_maxmargin(PowerLawModel(alpha=2.0, r=0.5, p_cut=1), n)
    # one mode: m = rhat1 / (1 + kappa), q = (rhat1^2 + rhat2 / n) / (1 + kappa)^2
    expected = params.rhat1 ** 2 / (params.rhat1 ** 2 + params.rhat2 / n)
    assert params.eta == pytest.approx(expected, rel=1e-6)
    assert 1.0 - params.eta < 1e-3
    assert misclassification_error(params) < 0.01


def test_maxmargin_reports_non_convergence(small_model):
    with pytest.raises(ConvergenceError) as exc_info:
        solve_maxmargin(small_model, 64, SolverConfig(max_iter=1))
    assert exc_info.value.iterations == 1
    assert set(exc_info.value.residuals) == {"m", "q"}
    assert exc_info.value.damping_trace == [0.5]


def test_hinge_without_regularization_is_maxmargin(small_model, fast_config):
    maxmargin = solve_maxmargin(small_model, 64, fast_config)
    hinge = solve_hinge_regularized(small_model, 64, 0.0, fast_config)
    assert hinge.method == "hinge"
    assert hinge.eta == maxmargin.eta


def test_hinge_small_lambda_approaches_maxmargin(small_model, fast_config):
    maxmargin = solve_maxmargin(small_model, 64, fast_config)
    hinge = solve_hinge_regularized(small_model, 64, 1e-7, fast_config)
    assert hinge_regime(hinge) == "maxmargin"
    assert misclassification_error(hinge) == pytest.approx(misclassification_error(maxmargin), rel=1e-2)


def test_training_loss_needs_regularized_hinge(single_mode):
    with pytest.raises(DomainError):
        training_loss(solve_ridge(single_mode, 2, 1.0))


def test_approximation_error_rejects_zero_lambda(small_model):
    with pytest.raises(DomainError):
        approximation_error(small_model, 0.0)


def test_regimes():
    assert ridge_regime(2.0, 1.0) == "regularized"
    assert ridge_regime(2.0, 3.0) == "plateau"
    assert hinge_regime(_params(0.5, method="hinge", V=0.2)) == "regularized"


# Sweeps
def test_theory_sweep_records_failures(single_mode):
    curve = theory_sweep("ridge", single_mode, [1, 2], LambdaRule(kind="fixed", value=0.0))
    assert [point.n for point in curve.points] == [2]
    assert len(curve.failures) == 1
    assert curve.failures[0].n == 1
    assert curve.failures[0].error == "SelfConsistencyBreakdown"
    assert curve.label == "theory-ridge"


def test_theory_sweep_rejects_noisy_maxmargin(small_model):
    with pytest.raises(DomainError) as exc_info:
        theory_sweep("maxmargin", small_model, [16, 32], sigma=0.5)
    assert "only available for ridge" in str(exc_info.value)


def test_theory_sweep_rejects_unsorted_grid(small_model):
    with pytest.raises(DomainError):
        theory_sweep("ridge", small_model, [32, 16], LambdaRule(kind="power", value=0.5))


def test_excess_error_subtracts_floor(ridge_model):
    sigma = 0.5
    curve = theory_sweep("ridge", ridge_model, [100, 400], LambdaRule(kind="power", value=0.25), sigma=sigma)
    floor = residual_error(rho(ridge_model), sigma)
    excess = excess_error(curve, rho(ridge_model), sigma)
    assert excess.meta.excess
    for raw, reduced in zip(curve.points, excess.points):
        assert reduced.value == pytest.approx(raw.value - floor)


def test_solve_point_optimal_rule_is_ridge_only(small_model, fast_config):
    with pytest.raises(DomainError):
        solve_point("hinge", small_model, LambdaRule(kind="optimal"), 0.0, fast_config, 64)


def test_solve_point_optimal_ridge_beats_fixed(ridge_model, fast_config):
    optimal, _ = solve_point("ridge", ridge_model, LambdaRule(kind="optimal"), 0.0, fast_config, 200)
    fixed, _ = solve_point("ridge", ridge_model, LambdaRule(kind="fixed", value=1.0), 0.0, fast_config, 200)
    assert optimal.value <= fixed.value


def test_solve_point_optimal_ridge_reports_fixed_point(ridge_model, fast_config):
    point, params = solve_point("ridge", ridge_model, LambdaRule(kind="optimal"), 0.0, fast_config, 200)
    assert params.lam == point.lam
    assert misclassification_error(params) == pytest.approx(point.value, rel=1e-9)


@pytest.mark.parametrize("method", ["maxmargin", "hinge"])
def test_solve_point_rejects_noisy_hinge_family(small_model, fast_config, method):
    with pytest.raises(DomainError) as exc_info:
        solve_point(method, small_model, LambdaRule(kind="fixed", value=0.01), 0.5, fast_config, 64)
    assert "only available for ridge" in str(exc_info.value)


def test_theory_sweep_keeps_solver_diagnostics(small_model, fast_config):
    curve = theory_sweep("maxmargin", small_model, [32, 64], config=fast_config)
    assert [solve.n for solve in curve.diagnostics] == [32, 64]
    for point, solve in zip(curve.points, curve.diagnostics):
        params = solve_maxmargin(small_model, point.n, fast_config)
        assert solve.eta == params.eta
        assert solve.diagnostics.iterations == params.diagnostics.iterations
        assert max(solve.diagnostics.residuals.values()) < fast_config.tol
        assert solve.diagnostics.clamped is False


def test_hinge_fixed_point_satisfies_its_equations(small_model, fast_config):
    n, lam = 64, 0.01
    params = solve_hinge_regularized(small_model, n, lam, fast_config)
    kappa = params.z / n
    sqrt_q = math.sqrt(params.q)
    i0 = gaussian_indicator_integral(params.q, params.eta, (1 - params.V) / sqrt_q, 1 / sqrt_q)
    assert shifted_sum(small_model, kappa, 1, 1) == pytest.approx(n * i0, rel=1e-6)
    assert params.m == pytest.approx(
        params.rhat1 * shifted_sum(small_model, kappa, 2, 1, teacher_weighted=True), rel=1e-6
    )
    assert params.q == pytest.approx(
        params.rhat1 ** 2 * shifted_sum(small_model, kappa, 3, 2, teacher_weighted=True)
        + params.rhat2 / n * shifted_sum(small_model, kappa, 2, 2),
        rel=1e-6,
    )
    assert params.V == pytest.approx(kappa * shifted_sum(small_model, kappa, 1, 1) / (2 * n * lam), rel=1e-6)


def test_training_loss_matches_proximal_gap_integral():
    V = 0.3
    params = _params(0.5, method="hinge", lam=0.01, V=V)
    slope = params.m / math.sqrt(params.rho)
    spread = math.sqrt(params.q * (1 - params.eta))

    def gap(xi, u):
        return 2 * norm.pdf(u) * norm.pdf(xi) * max(1 - hinge_prox(slope * u + spread * xi, 1.0, V), 0.0)

    expected, _ = integrate.dblquad(gap, 0.0, 12.0, -12.0, 12.0, epsabs=1e-10)
    assert training_loss(params) == pytest.approx(expected, abs=1e-6)


def test_training_loss_of_an_aligned_estimator():
    V = 0.3
    params = _params(1.0, method="hinge", lam=0.01, V=V)
    cut = 1 - V
    # 2 * integral over 0 < u < cut of (cut - u) phi(u)
    expected = cut * (2 * norm.cdf(cut) - 1) - 2 * (norm.pdf(0.0) - norm.pdf(cut))
    assert training_loss(params) == pytest.approx(expected, abs=1e-7)


# Asymptotic slopes
SWEEP = [2 ** k for k in range(7, 14)]


@pytest.mark.slow
@pytest.mark.parametrize("alpha, r", [(2.0, 0.25), (2.0, 0.75), (1.5, 0.5)])
def test_maxmargin_slope(alpha, r):
    curve = theory_sweep("maxmargin", PowerLawModel(alpha=alpha, r=r, p_cut=10_000), SWEEP)
    assert fit_curve_slope(curve) == pytest.approx(-svm_rate(alpha, r), abs=0.05)


@pytest.mark.slow
def test_maxmargin_order_parameters_share_one_exponent():
    model = PowerLawModel(alpha=2.0, r=0.25, p_cut=10_000)
    fixed_points = [solve_maxmargin(model, n) for n in SWEEP]
    log_n = np.log(SWEEP)

    def slope(values):
        return np.polyfit(log_n, np.log(values), 1)[0]

    slopes = [
        slope([params.m for params in fixed_points]),
        slope([math.sqrt(params.q) for params in fixed_points]),
        slope([params.rhat1 for params in fixed_points]),
    ]
    assert max(slopes) - min(slopes) < 0.03
    for value in slopes:
        assert abs(value) == pytest.approx(svm_rate(2.0, 0.25), abs=0.05)


@pytest.mark.slow
@pytest.mark.parametrize("ell", [0.25, 0.6])
def test_ridge_slope_below_capacity(ell):
    model = PowerLawModel(alpha=2.0, r=0.5, p_cut=10_000)
    curve = theory_sweep("ridge", model, SWEEP, LambdaRule(kind="power", value=ell))
    assert fit_curve_slope(curve) == pytest.approx(-ridge_rate(2.0, 0.5, ell), abs=0.03)


@pytest.mark.slow
def test_ridge_plateau_above_capacity():
    model = PowerLawModel(alpha=2.0, r=0.5, p_cut=10_000)
    curve = theory_sweep("ridge", model, SWEEP, LambdaRule(kind="power", value=3.0))
    assert abs(fit_curve_slope(curve)) < 0.05


@pytest.mark.slow
@pytest.mark.parametrize("r", [0.5, 1.0])
def test_ridge_optimal_slope(r):
    model = PowerLawModel(alpha=2.0, r=r, p_cut=10_000)
    curve = theory_sweep("ridge", model, SWEEP, LambdaRule(kind="optimal"))
    assert fit_curve_slope(curve) == pytest.approx(-ridge_optimal(2.0, r)[1], abs=0.05)


@pytest.mark.slow
@pytest.mark.parametrize("ell", [0.8, 1.0, 1.2, 2.5])
def test_hinge_slope(ell):
    model = PowerLawModel(alpha=2.0, r=0.25, p_cut=10_000)
    curve = theory_sweep("hinge", model, SWEEP, LambdaRule(kind="power", value=ell))
    rate, ell_star = hinge_regularized_rate(2.0, 0.25, ell)
    assert fit_curve_slope(curve) == pytest.approx(-rate, abs=0.05)
    if ell >= ell_star:
        maxmargin = theory_sweep("maxmargin", model, SWEEP)
        assert fit_curve_slope(curve) == pytest.approx(fit_curve_slope(maxmargin), abs=0.05)


@pytest.mark.slow
def test_noisy_ridge_excess_slope():
    sigma = 1.0
    model = PowerLawModel(alpha=2.0, r=0.5, p_cut=10_000)
    curve = theory_sweep("ridge", model, SWEEP, LambdaRule(kind="power", value=0.25), sigma=sigma)
    excess = excess_error(curve, rho(model), sigma)
    assert excess.failures == []
    assert fit_curve_slope(excess) == pytest.approx(-noisy_ridge_rate(2.0, 0.5, 0.25), abs=0.05)


@pytest.mark.slow
@pytest.mark.parametrize("alpha, r", [(2.0, 0.25), (2.0, 0.5)])
def test_approximation_error_exponent(alpha, r):
    model = PowerLawModel(alpha=alpha, r=r, p_cut=1000)
    lams = np.logspace(-4, -1, 7)
    errors = [approximation_error(model, lam, ratio=100) for lam in lams]
    slope = np.polyfit(np.log(lams), np.log(errors), 1)[0]
    assert slope == pytest.approx(APPROXIMATION_EXPONENT, abs=0.05)
