import math

import numpy as np
import pytest
from pydantic import ValidationError

from kernel_scaling_laws import DomainError, ExplicitSpectrum, PowerLawModel
from kernel_scaling_laws.spectrum import (
    effective_dof,
    eigenvalue,
    resolvent_sum,
    rho,
    shifted_sum,
    teacher_component,
    trace_sigma,
)

ZETA_2 = math.pi ** 2 / 6
ZETA_3 = 1.2020569031595942


def test_eigenvalue_values():
    assert eigenvalue(1, PowerLawModel(alpha=2.0, r=0.5)) == 1.0
    assert eigenvalue(10, PowerLawModel(alpha=2.0, r=0.5)) == pytest.approx(0.01, rel=1e-15)
    assert eigenvalue(2, PowerLawModel(alpha=1.5, r=0.5)) == pytest.approx(0.35355339059327373, rel=1e-15)


def test_teacher_component_values():
    assert teacher_component(1, PowerLawModel(alpha=2.0, r=0.5)) == 1.0
    assert teacher_component(2, PowerLawModel(alpha=2.0, r=0.5)) == pytest.approx(1 / math.sqrt(2), rel=1e-15)
    assert teacher_component(4, PowerLawModel(alpha=2.0, r=0.75)) == pytest.approx(0.25, rel=1e-15)


@pytest.mark.parametrize("k", [0, 11])
def test_index_out_of_range(k):
    model = PowerLawModel(alpha=2.0, r=0.5, p_cut=10)
    with pytest.raises(DomainError) as exc_info:
        eigenvalue(k, model)
    assert "out of range" in str(exc_info.value)
    with pytest.raises(DomainError):
        teacher_component(k, model)


def test_power_law_rejects_bad_coefficients():
    with pytest.raises(ValidationError):
        PowerLawModel(alpha=1.0, r=0.5)
    with pytest.raises(ValidationError):
        PowerLawModel(alpha=2.0, r=-0.1)
    with pytest.raises(ValidationError):
        PowerLawModel(alpha=2.0, r=0.5, p_cut=0)


def test_rho_matches_zeta_values():
    # r = 1/4 at alpha = 2 gives theta^2 omega = k^-2
    assert rho(PowerLawModel(alpha=2.0, r=0.25, p_cut=1_000_000)) == pytest.approx(ZETA_2, abs=2e-6)
    assert rho(PowerLawModel(alpha=2.0, r=0.5, p_cut=1_000_000)) == pytest.approx(ZETA_3, abs=1e-9)


def test_rho_single_mode():
    assert rho(PowerLawModel(alpha=2.0, r=0.5, p_cut=1)) == 1.0


def test_trace_sigma():
    assert trace_sigma(PowerLawModel(alpha=2.0, r=0.5, p_cut=1)) == 1.0
    assert trace_sigma(PowerLawModel(alpha=2.0, r=0.5, p_cut=1_000_000)) == pytest.approx(ZETA_2, abs=2e-6)


def test_resolvent_sum_at_zero_is_rho():
    model = PowerLawModel(alpha=2.0, r=0.5, p_cut=5000)
    assert resolvent_sum(model, 0.0, 1, 1, teacher_weighted=True) == rho(model)


def test_resolvent_sum_counts_modes():
    model = PowerLawModel(alpha=2.5, r=0.3, p_cut=321)
    assert resolvent_sum(model, 0.0, 0, 0) == 321.0


def test_resolvent_sum_matches_term_by_term_sum():
    model = PowerLawModel(alpha=2.0, r=0.5, p_cut=10_000)
    expected = math.fsum(
        eigenvalue(k, model) ** 2 * teacher_component(k, model) ** 2 / (1.0 + eigenvalue(k, model)) ** 2
        for k in range(1, model.p_cut + 1)
    )
    assert resolvent_sum(model, 1.0, 2, 2, teacher_weighted=True) == pytest.approx(expected, rel=1e-12)


def test_resolvent_sum_monotone():
    model = PowerLawModel(alpha=1.5, r=0.5, p_cut=2000)
    ts = [0.0, 0.1, 1.0, 10.0, 100.0]
    values = [resolvent_sum(model, t, 1, 1) for t in ts]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert resolvent_sum(model, 3.0, 1, 2) < resolvent_sum(model, 3.0, 1, 1)


def test_resolvent_sum_rejects_bad_arguments():
    model = PowerLawModel(alpha=2.0, r=0.5, p_cut=10)
    with pytest.raises(DomainError):
        resolvent_sum(model, -1.0, 1, 1)
    with pytest.raises(DomainError):
        resolvent_sum(model, 1.0, 1, 3)


def test_shifted_sum_is_rescaled_resolvent():
    model = PowerLawModel(alpha=2.0, r=0.4, p_cut=3000)
    kappa = 0.037
    for a, c in [(1, 1), (2, 1), (2, 2), (3, 2)]:
        expected = kappa ** (-c) * resolvent_sum(model, 1.0 / kappa, a, c, teacher_weighted=True)
        assert shifted_sum(model, kappa, a, c, teacher_weighted=True) == pytest.approx(expected, rel=1e-12)


def test_shifted_sum_finite_at_zero():
    model = PowerLawModel(alpha=2.0, r=0.5, p_cut=100)
    assert shifted_sum(model, 0.0, 1, 1) == 100.0


def test_effective_dof_grows_to_mode_count():
    model = PowerLawModel(alpha=2.0, r=0.5, p_cut=50)
    assert effective_dof(model, 0.0) == 0.0
    values = [effective_dof(model, t) for t in [1.0, 1e2, 1e4, 1e8]]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(50.0, rel=1e-3)


def test_explicit_spectrum_validation():
    spectrum = ExplicitSpectrum(eigenvalues=[1.0, 0.5], teacher=[1.0, 0.0])
    assert spectrum.p_cut == 2
    assert rho(spectrum) == 1.0

    with pytest.raises(ValidationError) as exc_info:
        ExplicitSpectrum(eigenvalues=[1.0, 0.5], teacher=[1.0])
    assert "differ in length" in str(exc_info.value)
    with pytest.raises(ValidationError):
        ExplicitSpectrum(eigenvalues=[1.0, 0.0], teacher=[1.0, 1.0])
    with pytest.raises(ValidationError):
        ExplicitSpectrum(eigenvalues=[0.5, 1.0], teacher=[1.0, 1.0])
    with pytest.raises(ValidationError):
        ExplicitSpectrum(eigenvalues=[1.0, np.nan], teacher=[1.0, 1.0])


def test_explicit_spectrum_does_not_freeze_caller_arrays():
    eigenvalues = np.array([1.0, 0.5])
    spectrum = ExplicitSpectrum(eigenvalues=eigenvalues, teacher=[1.0, 1.0])
    eigenvalues[0] = 2.0
    assert spectrum.eigenvalues[0] == 1.0
    assert not spectrum.eigenvalues.flags.writeable
