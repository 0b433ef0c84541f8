"""Fall detection, peak and sticking-rate measurements, and scaling-law sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import germ
from .integrate import IntegrationError, IntegratorConfig, Trajectory, detect_event
from .resonance import LINEAR, SweepLaw, SystemParams, simulate

__all__ = [
    "detect_fall",
    "measure_max",
    "deviation_envelope",
    "fit_sticking_rate",
    "PowerLawFit",
    "fit_power_law",
    "SweepSpec",
    "SweepRecord",
    "run_point",
    "run_sweep",
]

C_FALL = 0.5
TAU_MIN = 10.0


def detect_fall(
    traj: Trajectory,
    params: SystemParams,
    c_fall: float = C_FALL,
    tau_min: float = TAU_MIN,
    law: SweepLaw = LINEAR,
) -> float | None:
    """First tau > tau_min where |psi| drops below c_fall * sqrt(g(tau)).

    g is the detuning sweep (g = tau for the linear law), i.e. the leading
    modulus of the autoresonant track.
    """
    if not 0 < c_fall < 1:
        raise ValueError(f"c_fall must lie in (0, 1), got {c_fall}")
    if not tau_min > 0:
        raise ValueError(f"tau_min must be > 0, got {tau_min}")

    def below_track(state, tau):
        if tau <= tau_min:
            return 1.0
        return abs(state) - c_fall * math.sqrt(law.detuning(tau, params))

    return detect_event(traj, below_track)


def measure_max(traj: Trajectory) -> tuple[float, float]:
    """(tau at max, max |psi|) over the samples; first occurrence wins ties."""
    mod = np.abs(traj.states)
    i = int(np.argmax(mod))
    return float(traj.times[i]), float(mod[i])


def deviation_envelope(tau: np.ndarray, d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Peak-to-trough amplitude of an oscillating deviation.

    Each interior local maximum is paired with the mean of its neighbouring
    local minima, which removes a slowly varying offset under the oscillation.
    """
    inner = d[1:-1]
    is_max = (inner > d[:-2]) & (inner >= d[2:])
    is_min = (inner < d[:-2]) & (inner <= d[2:])
    maxima = np.flatnonzero(is_max) + 1
    minima = np.flatnonzero(is_min) + 1
    times, amps = [], []
    for i in maxima:
        k = np.searchsorted(minima, i)
        if k == 0 or k == len(minima):
            continue
        amp = d[i] - 0.5 * (d[minima[k - 1]] + d[minima[k]])
        if amp > 0:
            times.append(tau[i])
            amps.append(amp)
    return np.array(times), np.array(amps)


def fit_sticking_rate(traj: Trajectory, params: SystemParams, window: tuple[float, float]) -> float:
    """Exponential decay rate of the oscillation of |psi - psi_G| over ``window``."""
    lo, hi = window
    if not (0 < lo < hi < germ.life_time(params)):
        raise ValueError(f"window {window} must lie inside (0, {germ.life_time(params)})")
    sel = (traj.times >= lo) & (traj.times <= hi)
    tau = traj.times[sel]
    g = np.array([germ.germ_psi(t, params) for t in tau])
    d = np.abs(traj.states[sel] - g)
    t_env, env = deviation_envelope(tau, d)
    if len(env) < 3:
        raise ValueError(f"only {len(env)} envelope points in {window}; need at least 3")
    slope, _ = np.polyfit(t_env, np.log(env), 1)
    return float(-slope)


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    log_prefactor: float
    r_squared: float
    n_points: int


def fit_power_law(points) -> PowerLawFit:
    """Least squares of ln y on ln x."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("need at least two (x, y) points")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise ValueError("power-law fit needs finite positive data")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    design = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    ss_res = float(np.sum((ly - (slope * lx + intercept)) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return PowerLawFit(float(slope), float(intercept), min(1.0, max(0.0, r2)), len(pts))


@dataclass(frozen=True)
class SweepSpec:
    beta_values: list[float]
    f_values: list[float]
    psi0: complex = 0j
    tau_horizon_factor: float = 1.5
    config: IntegratorConfig = field(default_factory=IntegratorConfig)
    c_fall: float = C_FALL
    tau_min: float = TAU_MIN

    def __post_init__(self):
        if any(b <= 0 for b in self.beta_values) or any(f <= 0 for f in self.f_values):
            raise ValueError("sweep values must be positive")
        if not self.tau_horizon_factor > 1:
            raise ValueError("tau_horizon_factor must exceed 1")

    def points(self) -> list[SystemParams]:
        return [SystemParams(b, f) for b in self.beta_values for f in self.f_values]


@dataclass(frozen=True)
class SweepRecord:
    params: SystemParams
    tau_fall: float | None
    max_abs: float
    tau_at_max: float
    decay_rate: float | None
    status: str = "ok"


def run_point(params: SystemParams, spec: SweepSpec) -> SweepRecord:
    """One sweep point: integrate until the fall, then measure."""
    horizon = spec.tau_horizon_factor * germ.life_time(params)
    try:
        traj = simulate(
            params,
            spec.psi0,
            (0.0, horizon),
            config=spec.config,
            stop_on_fall=(spec.c_fall, spec.tau_min),
        )
    except IntegrationError as exc:
        return SweepRecord(params, None, float("nan"), float("nan"), None, f"failed: {exc}")
    tau_fall = detect_fall(traj, params, spec.c_fall, spec.tau_min)
    tau_at_max, max_abs = measure_max(traj)
    life = germ.life_time(params)
    try:
        rate = fit_sticking_rate(traj, params, (0.05 * life, 0.5 * life))
    except ValueError:
        rate = None
    return SweepRecord(params, tau_fall, max_abs, tau_at_max, rate)


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[SweepRecord]:
    """Records in input order (beta-major, then f), independent of ``workers``."""
    points = spec.points()
    if workers <= 1 or len(points) <= 1:
        return [run_point(p, spec) for p in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda p: run_point(p, spec), points))
