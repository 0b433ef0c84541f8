"""Closed-form autoresonant germ and its companion estimates.

In rescaled variables (theta = beta^2 tau, phi = beta psi) the germ is

    Phi_G = (sqrt(theta) + beta^3 rho1) exp(i alpha0) exp(i beta alpha1),   0 < theta < f^2,

with sin(alpha0) = -sqrt(theta)/f, cos(alpha0) = -sqrt(f^2 - theta)/f,
alpha1 = 1 / (2 sqrt(theta (f^2 - theta))) and rho1 = sqrt(f^2 - theta) / (2 theta).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .resonance import SystemParams

__all__ = [
    "DomainError",
    "GermEvaluation",
    "EigenvaluePair",
    "alpha0",
    "alpha1",
    "rho1",
    "germ_phi",
    "germ_psi",
    "eigenvalues",
    "life_time",
    "max_amplitude",
    "residual",
    "in_germ_domain",
]

GUARD = 1e-9


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class GermEvaluation:
    value: complex
    modulus_factor: float
    phase_base: float
    phase_correction: float
    theta: float


@dataclass(frozen=True)
class EigenvaluePair:
    lambda1: complex
    lambda2: complex


def _check_theta(theta: float, f: float) -> None:
    margin = GUARD * f * f
    if not (margin <= theta <= f * f - margin):
        raise DomainError(f"theta={theta} outside the germ domain (0, {f * f})")


def in_germ_domain(tau: float, params: SystemParams) -> bool:
    """True if tau lies inside the guarded germ domain (0, f^2/beta^2)."""
    theta = params.beta**2 * tau
    margin = GUARD * params.f**2
    return margin <= theta <= params.f**2 - margin


def alpha0(theta: float, f: float) -> float:
    """Third-quadrant branch of sin(alpha0) = -sqrt(theta)/f, in (-pi, -pi/2]."""
    if not 0 <= theta <= f * f:
        raise DomainError(f"alpha0 needs 0 <= theta <= f^2, got theta={theta}")
    return math.atan2(-math.sqrt(theta) / f, -math.sqrt(f * f - theta) / f)


def alpha1(theta: float, f: float) -> float:
    if not 0 < theta < f * f:
        raise DomainError(f"alpha1 needs 0 < theta < f^2, got theta={theta}")
    return 1.0 / (2.0 * math.sqrt(theta * (f * f - theta)))


def rho1(theta: float, f: float) -> float:
    if not 0 < theta <= f * f:
        raise DomainError(f"rho1 needs 0 < theta <= f^2, got theta={theta}")
    return math.sqrt(f * f - theta) / (2.0 * theta)


def germ_phi(theta: float, params: SystemParams) -> GermEvaluation:
    f, b = params.f, params.beta
    _check_theta(theta, f)
    modulus = math.sqrt(theta) + b**3 * rho1(theta, f)
    base = alpha0(theta, f)
    correction = b * alpha1(theta, f)
    value = modulus * cmath.exp(1j * base) * cmath.exp(1j * correction)
    return GermEvaluation(value, modulus, base, correction, theta)


def germ_psi(tau: float, params: SystemParams) -> complex:
    """Germ in the original variables, valid for 0 < tau < f^2/beta^2."""
    f, b = params.f, params.beta
    if not in_germ_domain(tau, params):
        raise DomainError(f"tau={tau} outside the germ domain (0, {f * f / (b * b)})")
    q = math.sqrt(f * f - b * b * tau)
    rt = math.sqrt(tau)
    modulus = rt + q / (2.0 * tau)
    direction = complex(-q / f, -b * rt / f)
    return modulus * direction * cmath.exp(1j / (2.0 * rt * q))


def eigenvalues(theta: float, params: SystemParams) -> EigenvaluePair:
    """Three-term expansion of the linearised residual-system eigenvalues."""
    f, b = params.f, params.beta
    _check_theta(theta, f)
    rest = f * f - theta
    leading = math.sqrt(2.0 * theta) * rest**0.25 * math.sqrt(b)
    second = (theta * rest) ** 0.25 / (2.0 * math.sqrt(2.0) * rest) * b**1.5
    damping = -0.5 * b * b
    return EigenvaluePair(
        complex(damping, leading - second),
        complex(damping, -leading + second),
    )


def max_amplitude(params: SystemParams) -> float:
    return params.f / params.beta


def life_time(params: SystemParams) -> float:
    # squared ratio, so max_amplitude**2 == life_time holds bit for bit
    return max_amplitude(params) ** 2


def residual(tau: float, params: SystemParams, h: float | None = None) -> complex:
    """Defect of the germ in i psi' + (tau - |psi|^2) psi + i beta psi - f.

    The derivative is a central difference of step h (default 1e-4 * tau) so
    the check does not share code with any closed-form derivative.
    """
    if h is None:
        h = 1e-4 * tau
    if not h > 0:
        raise ValueError(f"h must be > 0, got {h}")
    g_plus = germ_psi(tau + h, params)
    g_minus = germ_psi(tau - h, params)
    g = germ_psi(tau, params)
    deriv = (g_plus - g_minus) / (2.0 * h)
    return 1j * deriv + (tau - abs(g) ** 2) * g + 1j * params.beta * g - params.f
