"""Swept-frequency Duffing oscillator with dissipation, and its envelope.

    u'' + u + 4 eps^(2/3) beta u' - 2 sqrt(2) u^3 = 4 sqrt(2) eps f cos(omega t),
    omega = 1 - eps^(4/3) t

The carrier phase is phi(t) = omega t = t - tau^2 with tau = eps^(2/3) t, and the
envelope is read off the quadrature pair (u, u').
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .integrate import IntegrationError, IntegratorConfig, Trajectory, integrate
from .resonance import SystemParams, simulate

__all__ = [
    "RealState",
    "carrier_phase",
    "duffing_rhs",
    "simulate_duffing",
    "demodulate",
    "reconstruct",
    "envelope_equivalent",
    "ComparisonReport",
    "compare_models",
    "DUFFING_CONFIG",
]

SQRT2 = math.sqrt(2.0)
CUBIC = 2.0 * SQRT2

# >= 30 steps per carrier period
DUFFING_CONFIG = IntegratorConfig(max_step=0.2, sample_stride=0.05)


class RealState(NamedTuple):
    u: float
    v: float


def carrier_phase(t, epsilon: float):
    return t - epsilon ** (4 / 3) * np.square(t)


def duffing_rhs(t: float, state: RealState, params: SystemParams, nonlinear: bool = True) -> RealState:
    eps = params.require_epsilon()
    u, v = state
    cubic = CUBIC if nonlinear else 0.0
    drive = 4.0 * SQRT2 * eps * params.f * math.cos((1.0 - eps ** (4 / 3) * t) * t)
    return RealState(v, -u - 4.0 * eps ** (2 / 3) * params.beta * v + cubic * u**3 + drive)


# args = [eps, beta, f, cubic coefficient]
@njit
def duffing_kernel(t, y, args):
    eps = args[0]
    u = y[0]
    v = y[1]
    out = np.empty(2)
    out[0] = v
    out[1] = (
        -u
        - 4.0 * eps ** (2.0 / 3.0) * args[1] * v
        + args[3] * u * u * u
        + 4.0 * SQRT2 * eps * args[2] * math.cos((1.0 - eps ** (4.0 / 3.0) * t) * t)
    )
    return out


def simulate_duffing(
    params: SystemParams,
    t_span: tuple[float, float],
    state0: tuple[float, float] = (0.0, 0.0),
    config: IntegratorConfig | None = None,
    nonlinear: bool = True,
) -> Trajectory:
    eps = params.require_epsilon()
    args = np.array([eps, params.beta, params.f, CUBIC if nonlinear else 0.0])
    return integrate(
        duffing_kernel,
        np.array(state0, dtype=float),
        t_span,
        config or DUFFING_CONFIG,
        args=args,
        meta={"params": params, "model": "duffing"},
    )


def demodulate(traj: Trajectory, params: SystemParams) -> Trajectory:
    """Envelope estimate psi = exp(-i phi) (u - i v) / (2 eps^(1/3)), indexed by tau."""
    eps = params.require_epsilon()
    t = traj.times
    u = traj.states[:, 0]
    v = traj.states[:, 1]
    psi = np.exp(-1j * carrier_phase(t, eps)) * (u - 1j * v) / (2.0 * eps ** (1 / 3))
    return Trajectory(eps ** (2 / 3) * t, psi, meta={"params": params, "model": "demodulated"})


def reconstruct(psi_traj: Trajectory, params: SystemParams) -> Trajectory:
    """Leading-order oscillator state from an envelope trajectory over tau.

    u = 2 eps^(1/3) Re(psi e^(i phi)); v differentiates the carrier only.
    """
    eps = params.require_epsilon()
    t = psi_traj.times / eps ** (2 / 3)
    rotated = psi_traj.states * np.exp(1j * carrier_phase(t, eps))
    amp = 2.0 * eps ** (1 / 3)
    dphi = 1.0 - 2.0 * eps ** (4 / 3) * t
    states = np.column_stack([amp * rotated.real, -amp * dphi * rotated.imag])
    return Trajectory(t, states, meta={"params": params, "model": "reconstructed"})


def envelope_equivalent(params: SystemParams) -> tuple[SystemParams, float, float]:
    """Envelope-equation parameters that the printed oscillator actually reduces to.

    Averaging the oscillator with carrier t - tau^2 gives
    2i psi' + 4 tau psi + 4i beta psi - 6 sqrt(2) |psi|^2 psi = 2 sqrt(2) f,
    which becomes the unit-coefficient envelope equation for
    chi(s) = sqrt(3) psi(s / sqrt(2)) with beta' = sqrt(2) beta and f' = sqrt(3) f.
    Returns (params', time scale s/tau, amplitude scale chi/psi).
    """
    mapped = SystemParams(SQRT2 * params.beta, math.sqrt(3.0) * params.f, params.epsilon)
    return mapped, SQRT2, math.sqrt(3.0)


@dataclass
class ComparisonReport:
    tau: np.ndarray
    psi_est: np.ndarray
    psi_ref: np.ndarray
    error: np.ndarray
    window: tuple[float, float]
    max_error: float
    max_error_rel: float
    max_abs_u: float
    max_abs_u_total: float
    t_fall: float | None
    duffing_failed_at: float | None
    reduced_max_error_rel: float
    duffing: Trajectory
    reference: Trajectory


def compare_models(
    params: SystemParams,
    t_span: tuple[float, float],
    config: IntegratorConfig | None = None,
    window: tuple[float, float] = (1.0, 20.0),
    c_fall: float = 0.5,
    tau_min: float = 10.0,
) -> ComparisonReport:
    """Integrate the oscillator and the envelope equation and compare envelopes.

    ``max_error_rel`` is max |psi_est - psi| over ``window`` divided by max |psi|.
    ``max_abs_u`` is taken over the captured stage [t0, t_fall] (the whole run
    if no fall is found).  If the oscillator escapes, its partial trajectory is
    used and ``duffing_failed_at`` records the time reached.
    """
    from .experiments import detect_fall

    eps = params.require_epsilon()
    e23 = eps ** (2 / 3)
    config = config or DUFFING_CONFIG
    failed_at = None
    try:
        duff = simulate_duffing(params, t_span, config=config)
    except IntegrationError as exc:
        if exc.partial is None:
            raise
        duff = exc.partial
        failed_at = exc.t_reached

    est = demodulate(duff, params)
    tau = est.times
    ref_config = IntegratorConfig(
        rel_tol=1e-10, abs_tol=1e-12, max_step=0.5, sample_stride=0.05
    )
    ref = simulate(params, 0j, (tau[0], tau[-1]), config=ref_config)
    psi_ref = ref.interpolate(tau)
    error = np.abs(est.states - psi_ref)

    w = (tau >= window[0]) & (tau <= window[1])
    max_error = float(error[w].max()) if w.any() else float("nan")
    scale = float(np.abs(psi_ref).max())

    mapped, time_scale, amp_scale = envelope_equivalent(params)
    red = simulate(mapped, 0j, (time_scale * tau[0], time_scale * tau[-1]), config=ref_config)
    psi_red = red.interpolate(time_scale * tau) / amp_scale
    red_err = np.abs(est.states - psi_red)
    reduced_rel = float(red_err[w].max() / np.abs(psi_red).max()) if w.any() else float("nan")

    tau_fall = detect_fall(est, params, c_fall, tau_min)
    t_fall = None if tau_fall is None else tau_fall / e23
    u = np.abs(duff.states[:, 0])
    captured = duff.times <= t_fall if t_fall is not None else np.ones(len(u), dtype=bool)

    return ComparisonReport(
        tau=tau,
        psi_est=est.states,
        psi_ref=psi_ref,
        error=error,
        window=window,
        max_error=max_error,
        max_error_rel=max_error / scale,
        max_abs_u=float(u[captured].max()),
        max_abs_u_total=float(u.max()),
        t_fall=t_fall,
        duffing_failed_at=failed_at,
        reduced_max_error_rel=reduced_rel,
        duffing=duff,
        reference=ref,
    )
