import math

import pytest
from scipy import optimize

from kernel_scaling_laws import DomainError
from kernel_scaling_laws.rates import (
    TABLE_ONE,
    compare,
    hinge_boundary,
    hinge_regularized_rate,
    noisy_crossover_rate,
    noisy_ridge_rate,
    ridge_optimal,
    ridge_rate,
    ridge_regime_boundaries,
    svm_rate,
    worst_case_svm_bound,
)

# alpha in 1.01..4.96 and r in 0.01..1.96, both in steps of 0.05
ALPHAS = [round(1.01 + 0.05 * k, 2) for k in range(80)]
SOURCES = [round(0.01 + 0.05 * k, 2) for k in range(40)]
SMOOTH_SOURCES = [r for r in SOURCES if r > 0.5]


def _printed_decimals(value: float) -> int:
    return len(repr(value).split(".")[1])


def test_svm_rate_examples():
    assert svm_rate(2.0, 0.5) == pytest.approx(0.5)
    assert svm_rate(2.0, 0.25) == pytest.approx(1 / 3)
    assert svm_rate(2.0, 3.0) == svm_rate(2.0, 0.5)


def test_ridge_optimal_examples():
    ell_star, rate = ridge_optimal(2.0, 0.5)
    assert ell_star == pytest.approx(2 / 3)
    assert rate == pytest.approx(1 / 3)
    assert ridge_optimal(2.0, 1.0)[1] == pytest.approx(0.4)


def test_ridge_rate_examples():
    assert ridge_rate(2.0, 0.5, 0.25) == pytest.approx(0.125)
    assert ridge_rate(2.0, 0.5, 3.0) == 0.0
    assert ridge_rate(2.0, 0.5, 0.0) == 0.0


def test_ridge_rate_peaks_at_optimal_ell():
    for alpha in (1.5, 2.0, 3.0):
        for r in (0.25, 0.5, 1.0):
            ell_star, rate = ridge_optimal(alpha, r)
            best = optimize.minimize_scalar(
                lambda ell: -ridge_rate(alpha, r, ell), bounds=(0.0, alpha), method="bounded",
                options={"xatol": 1e-8},
            )
            assert best.x == pytest.approx(ell_star, abs=1e-3)
            assert ridge_rate(alpha, r, ell_star) == pytest.approx(rate)


def test_ridge_regime_boundaries():
    regimes = ridge_regime_boundaries(2.0, 0.5)
    assert regimes["source_limited"] == pytest.approx((0.0, 2 / 3))
    assert regimes["plateau"][0] == 2.0
    assert math.isinf(regimes["plateau"][1])


def test_hinge_rates():
    assert hinge_boundary(2.0, 0.25) == pytest.approx(5 / 3)
    rate, ell_star = hinge_regularized_rate(2.0, 0.5, math.inf)
    assert ell_star == pytest.approx(1.5)
    assert rate == pytest.approx(svm_rate(2.0, 0.5))
    assert hinge_regularized_rate(2.0, 0.5, 0.9)[0] == pytest.approx(0.3)


def test_hinge_rate_above_half_is_unsupported():
    with pytest.raises(DomainError) as exc_info:
        hinge_regularized_rate(2.0, 0.75, 1.0)
    assert "unsupported source range" in str(exc_info.value)


def test_noisy_rates():
    assert noisy_ridge_rate(2.0, 1.0, 0.4) == pytest.approx(0.8)
    assert noisy_ridge_rate(2.0, 0.5, 0.25) == pytest.approx(0.25)
    assert noisy_ridge_rate(2.0, 0.5, 2.5) == 0.0
    assert noisy_crossover_rate(1.0) == pytest.approx(0.5)


@pytest.mark.parametrize("alpha, expected", [(2.0, 0.4), (3.0, 0.5), (1.2, 1.2 / 4.2), (6.0, 0.5)])
def test_worst_case_bound(alpha, expected):
    assert worst_case_svm_bound(alpha) == pytest.approx(expected)


def test_domain_checks():
    with pytest.raises(DomainError):
        svm_rate(1.0, 0.5)
    with pytest.raises(DomainError):
        svm_rate(2.0, -0.1)
    with pytest.raises(DomainError):
        ridge_rate(2.0, 0.5, -1.0)
    with pytest.raises(DomainError):
        compare(0.5, 0.5)


def test_svm_beats_ridge_on_grid():
    for alpha in ALPHAS:
        for r in SOURCES:
            report = compare(alpha, r)
            assert report.a_svm > report.a_ridge_opt
            assert report.svm_beats_ridge


def test_svm_ties_ridge_without_source():
    report = compare(2.0, 0.0)
    assert report.a_svm == report.a_ridge_opt == 0.0
    assert report.svm_beats_ridge


def test_svm_beats_worst_case_for_smooth_targets():
    for alpha in ALPHAS:
        for r in SMOOTH_SOURCES:
            report = compare(alpha, r)
            assert report.a_worst_case is not None
            assert report.svm_beats_worst_case


def test_worst_case_absent_for_rough_targets():
    report = compare(2.0, 0.25)
    assert report.a_worst_case is None
    assert report.svm_beats_worst_case is None


def test_compare_example():
    report = compare(2.0, 0.5)
    assert report.a_svm == pytest.approx(0.5)
    assert report.a_ridge_opt == pytest.approx(1 / 3)
    assert report.ell_star_ridge == pytest.approx(2 / 3)
    assert report.b == pytest.approx(1 / 3)


@pytest.mark.parametrize("name, alpha, r, a_svm, a_ridge", TABLE_ONE)
def test_reference_table(name, alpha, r, a_svm, a_ridge):
    report = compare(alpha, r)
    assert round(report.a_svm, _printed_decimals(a_svm)) == pytest.approx(a_svm, abs=0.002)
    assert round(report.a_ridge_opt, _printed_decimals(a_ridge)) == pytest.approx(a_ridge, abs=0.002)
