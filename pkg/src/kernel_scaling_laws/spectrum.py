"""Power-law data model and the truncated spectral sums used by the solvers.

Every sum runs from the last mode towards the first so that the small tail
terms are accumulated before the order-one head.
"""
from functools import lru_cache
from typing import Union

import numpy as np

from kernel_scaling_laws.exceptions import DomainError
from kernel_scaling_laws.schema import ExplicitSpectrum, PowerLawModel

SpectrumLike = Union[PowerLawModel, ExplicitSpectrum]


def _check_index(k: int, model: SpectrumLike) -> None:
    if not 1 <= k <= model.p_cut:
        raise DomainError(f"index {k} out of range [1, {model.p_cut}]")


def eigenvalue(k: int, model: SpectrumLike) -> float:
    """k-th covariance eigenvalue omega_k."""
    _check_index(k, model)
    if isinstance(model, ExplicitSpectrum):
        return float(model.eigenvalues[k - 1])
    return float(k) ** (-model.alpha)


def teacher_component(k: int, model: SpectrumLike) -> float:
    """k-th teacher coefficient theta*_k."""
    _check_index(k, model)
    if isinstance(model, ExplicitSpectrum):
        return float(model.teacher[k - 1])
    return float(k) ** (-(1.0 + model.alpha * (2.0 * model.r - 1.0)) / 2.0)


@lru_cache(maxsize=32)
def _power_law_arrays(model: PowerLawModel) -> ExplicitSpectrum:
    k = np.arange(1, model.p_cut + 1, dtype=float)
    return ExplicitSpectrum(
        eigenvalues=k ** (-model.alpha),
        teacher=k ** (-(1.0 + model.alpha * (2.0 * model.r - 1.0)) / 2.0),
    )


def as_spectrum(model: SpectrumLike) -> ExplicitSpectrum:
    """Materialize any model as eigenvalue and teacher arrays."""
    if isinstance(model, ExplicitSpectrum):
        return model
    return _power_law_arrays(model)


def _tail_sum(terms: np.ndarray) -> float:
    return float(np.sum(terms[::-1]))


def rho(model: SpectrumLike) -> float:
    """Squared norm of the target, sum of theta*_k^2 omega_k."""
    spectrum = as_spectrum(model)
    return _tail_sum(spectrum.teacher ** 2 * spectrum.eigenvalues)


def trace_sigma(model: SpectrumLike) -> float:
    spectrum = as_spectrum(model)
    return _tail_sum(spectrum.eigenvalues)


def resolvent_sum(
    model: SpectrumLike,
    t: float,
    a: float,
    c: int,
    teacher_weighted: bool = False,
) -> float:
    """Sum of omega^a [theta*^2] / (1 + t omega)^c over the truncated spectrum."""
    if t < 0 or a < 0:
        raise DomainError(f"resolvent_sum needs t >= 0 and a >= 0, got t={t}, a={a}")
    if c not in (0, 1, 2):
        raise DomainError(f"denominator power must be 0, 1 or 2, got {c}")
    spectrum = as_spectrum(model)
    omega = spectrum.eigenvalues
    terms = omega ** a / (1.0 + t * omega) ** c
    if teacher_weighted:
        terms = terms * spectrum.teacher ** 2
    return _tail_sum(terms)


def shifted_sum(
    model: SpectrumLike,
    kappa: float,
    a: float,
    c: int,
    teacher_weighted: bool = False,
) -> float:
    """Sum of omega^a [theta*^2] / (omega + kappa)^c.

    Same family as resolvent_sum with t = 1/kappa, rescaled by kappa^c, and
    finite at kappa = 0.
    """
    spectrum = as_spectrum(model)
    omega = spectrum.eigenvalues
    terms = omega ** a / (omega + kappa) ** c
    if teacher_weighted:
        terms = terms * spectrum.teacher ** 2
    return _tail_sum(terms)


def effective_dof(model: SpectrumLike, t: float) -> float:
    """Degrees of freedom sum of t omega / (1 + t omega)."""
    if t < 0:
        raise DomainError(f"effective_dof needs t >= 0, got {t}")
    return t * resolvent_sum(model, t, 1, 1)
