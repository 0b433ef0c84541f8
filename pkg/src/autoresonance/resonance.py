"""Primary resonance equation  i psi' + (tau - |psi|^2) psi + i beta psi = f.

The equation is solved for psi' once:

    psi' = -i f + i (g(tau) - |psi|^2) psi - beta psi

with ``g(tau) = tau`` for the linear detuning sweep and ``g(tau) = S tanh(tau / S)``
for the saturating (controlled) sweep.  The rescaled form uses
``theta = beta^2 tau`` and ``phi = beta psi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .integrate import IntegratorConfig, Trajectory, integrate

__all__ = [
    "SystemParams",
    "SweepLaw",
    "pr_rhs",
    "rescaled_rhs",
    "controlled_rhs",
    "controlled_omega",
    "simulate",
]

LAW_LINEAR = 0.0
LAW_SATURATING = 1.0


@dataclass(frozen=True)
class SystemParams:
    """Dissipation ``beta``, drive amplitude ``f`` and, for the full oscillator,
    the small parameter ``epsilon``.

    ``strict=False`` skips validation; it exists for closed-form test fixtures
    such as ``f = 0`` or ``beta = 0``.
    """

    beta: float
    f: float
    epsilon: float | None = None
    strict: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        values = [self.beta, self.f] + ([] if self.epsilon is None else [self.epsilon])
        if not all(math.isfinite(v) for v in values):
            raise ValueError("parameters must be finite")
        if not self.strict:
            return
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.f <= 0:
            raise ValueError(f"f must be > 0, got {self.f}")
        if self.epsilon is not None and not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    def require_epsilon(self) -> float:
        if self.epsilon is None:
            raise ValueError("epsilon is required for the full oscillator")
        return self.epsilon


@dataclass(frozen=True)
class SweepLaw:
    """Detuning sweep: ``linear`` (g = tau) or ``saturating`` (g = S tanh(tau/S)).

    ``scale=None`` on a saturating law means the default S = beta / f.
    """

    variant: str = "linear"
    scale: float | None = None

    def __post_init__(self):
        if self.variant not in ("linear", "saturating"):
            raise ValueError(f"unknown sweep law {self.variant!r}")
        if self.scale is not None and not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"sweep scale must be > 0, got {self.scale}")

    def resolved_scale(self, params: SystemParams) -> float:
        if self.scale is not None:
            return self.scale
        return params.beta / params.f

    def detuning(self, tau, params: SystemParams):
        if self.variant == "linear":
            return tau
        s = self.resolved_scale(params)
        return s * np.tanh(np.asarray(tau) / s) if np.ndim(tau) else s * math.tanh(tau / s)

    def code(self) -> float:
        return LAW_LINEAR if self.variant == "linear" else LAW_SATURATING


LINEAR = SweepLaw()


def pr_rhs(tau: float, psi: complex, params: SystemParams) -> complex:
    return -1j * params.f + 1j * (tau - abs(psi) ** 2) * psi - params.beta * psi


def rescaled_rhs(theta: float, phi: complex, params: SystemParams) -> complex:
    b = params.beta
    b3 = b**3
    return (-1j * b3 * params.f + 1j * (theta - abs(phi) ** 2) * phi - b3 * phi) / b**4


def controlled_rhs(tau: float, psi: complex, params: SystemParams, law: SweepLaw = LINEAR) -> complex:
    g = law.detuning(tau, params)
    return -1j * params.f + 1j * (g - abs(psi) ** 2) * psi - params.beta * psi


def controlled_omega(tau: float, params: SystemParams) -> float:
    """Drive frequency under the saturating sweep with S = beta/f.

    Uses  int_0^tau tanh(f s / beta) ds = (beta/f) ln cosh(f tau / beta).
    """
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    eps = params.require_epsilon()
    b, f = params.beta, params.f
    x = f * tau / b
    # ln cosh x without overflow
    log_cosh = x + math.log1p(math.exp(-2 * x)) - math.log(2.0) if x > 20 else math.log(math.cosh(x))
    return 1.0 - eps ** (2 / 3) * b**2 / (2 * f**2 * tau) * log_cosh


# compiled kernels on the interleaved (re, im) view; args = [beta, f, law, S, c_fall, tau_min]


@njit
def _detuning(t, args):
    if args[2] == LAW_SATURATING:
        return args[3] * math.tanh(t / args[3])
    return t


@njit
def envelope_rhs(t, y, args):
    beta = args[0]
    f = args[1]
    re = y[0]
    im = y[1]
    det = _detuning(t, args) - (re * re + im * im)
    out = np.empty(2)
    out[0] = -det * im - beta * re
    out[1] = -f + det * re - beta * im
    return out


@njit
def rescaled_envelope_rhs(theta, y, args):
    beta = args[0]
    f = args[1]
    b3 = beta**3
    b4 = beta**4
    re = y[0]
    im = y[1]
    det = theta - (re * re + im * im)
    out = np.empty(2)
    out[0] = (-det * im - b3 * re) / b4
    out[1] = (-b3 * f + det * re - b3 * im) / b4
    return out


@njit
def fall_stop(t, y, args):
    if t <= args[5]:
        return False
    return math.sqrt(y[0] * y[0] + y[1] * y[1]) < args[4] * math.sqrt(_detuning(t, args))


def kernel_args(params: SystemParams, law: SweepLaw = LINEAR, c_fall: float = 0.5, tau_min: float = 10.0) -> np.ndarray:
    scale = law.resolved_scale(params) if law.variant == "saturating" else 1.0
    return np.array([params.beta, params.f, law.code(), scale, c_fall, tau_min], dtype=np.float64)


def simulate(
    params: SystemParams,
    psi0: complex = 0j,
    tau_span: tuple[float, float] = (0.0, 600.0),
    law: SweepLaw = LINEAR,
    config: IntegratorConfig | None = None,
    stop_on_fall: tuple[float, float] | None = None,
) -> Trajectory:
    """Integrate the envelope equation for psi(tau).

    ``stop_on_fall=(c_fall, tau_min)`` ends the run at the first sample past
    tau_min where |psi| < c_fall * sqrt(g(tau)).
    """
    # c_fall = 0 disables the stop while keeping a single compiled specialization
    c_fall, tau_min = stop_on_fall if stop_on_fall is not None else (0.0, 0.0)
    args = kernel_args(params, law, c_fall, tau_min)
    return integrate(
        envelope_rhs,
        complex(psi0),
        tau_span,
        config,
        args=args,
        stop=fall_stop,
        meta={"params": params, "law": law, "psi0": complex(psi0), "model": "envelope"},
    )


def simulate_rescaled(
    params: SystemParams,
    phi0: complex,
    theta_span: tuple[float, float],
    config: IntegratorConfig | None = None,
) -> Trajectory:
    """Integrate the rescaled equation for phi(theta)."""
    return integrate(
        rescaled_envelope_rhs,
        complex(phi0),
        theta_span,
        config,
        args=kernel_args(params),
        meta={"params": params, "model": "rescaled"},
    )
