"""Adaptive Dormand-Prince 5(4) integration with grid-landed sampling and event refinement.

The stepping loop is a single function that runs either as plain Python or,
when both callbacks are numba dispatchers, as compiled code.  Right-hand sides
use the signature ``rhs(t, y, args) -> dy`` where ``y`` is a float64 vector and
``args`` a float64 parameter vector.  Complex states are integrated through an
interleaved ``(re, im)`` view, so a complex-valued problem needs an RHS written
on that real view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from numba import njit
from numba.core.registry import CPUDispatcher

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "IntegrationError",
    "integrate",
    "detect_event",
]

# Dormand-Prince tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

# PI controller constants (Hairer, Norsett & Wanner, DOPRI5)
_BETA_PI = 0.04
_EXPO1 = 0.2 - 0.75 * _BETA_PI
_SAFE = 0.9
_FACC1 = 1.0 / 0.2
_FACC2 = 1.0 / 10.0

STATUS_DONE = 0
STATUS_STOPPED = 1
STATUS_UNDERFLOW = 2
STATUS_NONFINITE = 3


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    initial_step: float = 1e-3
    max_step: float = 1.0
    sample_stride: float = 0.05

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "initial_step", "max_step", "sample_stride"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")

    def tightened(self, factor: float = 0.5) -> "IntegratorConfig":
        """Same config with both tolerances scaled by ``factor``."""
        return IntegratorConfig(
            rel_tol=self.rel_tol * factor,
            abs_tol=self.abs_tol * factor,
            initial_step=self.initial_step,
            max_step=self.max_step,
            sample_stride=self.sample_stride,
        )


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered samples of a state.

    ``states`` has shape ``(n,)`` for scalar states (typically a complex
    amplitude) and ``(n, d)`` for vector states.  ``derivs`` holds the
    right-hand side at each sample when known and enables cubic Hermite
    interpolation; without it interpolation is linear.
    """

    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if times.ndim != 1 or len(times) < 2:
            raise ValueError("a trajectory needs at least two samples")
        if len(states) != len(times):
            raise ValueError("times and states differ in length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.derivs is not None:
            derivs = np.asarray(self.derivs)
            if derivs.shape != states.shape:
                raise ValueError("derivs must match states in shape")
            object.__setattr__(self, "derivs", derivs)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def stride(self) -> float:
        """Nominal sample spacing (the configured stride if recorded)."""
        if "sample_stride" in self.meta:
            return float(self.meta["sample_stride"])
        return float(np.max(np.diff(self.times)))

    def interpolate(self, t):
        """State at time(s) ``t`` inside the sampled range."""
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        t_arr = np.atleast_1d(t_arr)
        if np.any(t_arr < self.times[0]) or np.any(t_arr > self.times[-1]):
            raise ValueError("interpolation time outside the trajectory")
        i = np.clip(np.searchsorted(self.times, t_arr, side="right") - 1, 0, len(self.times) - 2)
        t0 = self.times[i]
        h = self.times[i + 1] - t0
        s = (t_arr - t0) / h
        y0 = self.states[i]
        y1 = self.states[i + 1]
        if self.states.ndim > 1:
            s = s[:, None]
            h = h[:, None]
        if self.derivs is None:
            out = y0 + s * (y1 - y0)
        else:
            s2 = s * s
            s3 = s2 * s
            out = (
                (2 * s3 - 3 * s2 + 1) * y0
                + (s3 - 2 * s2 + s) * h * self.derivs[i]
                + (-2 * s3 + 3 * s2) * y1
                + (s3 - s2) * h * self.derivs[i + 1]
            )
        return out[0] if scalar else out


class IntegrationError(RuntimeError):
    """Integration stopped early. ``t_reached`` is the last accepted time and
    ``partial`` holds the samples produced so far (None if fewer than two)."""

    def __init__(self, message: str, t_reached: float, partial: Trajectory | None = None):
        super().__init__(f"{message} at t={t_reached:.12g}")
        self.t_reached = t_reached
        self.partial = partial


def _dopri_loop(rhs, stop, args, grid, y0, rtol, atol, h0, hmax):
    n_out = grid.shape[0]
    dim = y0.shape[0]
    ts = np.empty(n_out)
    ys = np.empty((n_out, dim))
    dys = np.empty((n_out, dim))

    t = grid[0]
    y = y0.copy()
    ytmp = np.empty(dim)
    k1 = rhs(t, y, args)
    ts[0] = t
    ys[0] = y
    dys[0] = k1
    n = 1
    status = STATUS_DONE

    h = min(h0, hmax)
    facold = 1e-4
    last_rejected = False
    while n < n_out:
        t_out = grid[n]
        h_free = min(h, hmax)
        h_try = h_free
        landing = False
        if t + h_try >= t_out or t_out - (t + h_try) < 1e-2 * h_try:
            h_try = t_out - t
            landing = True
        if h_try <= 1e-14 * max(1.0, abs(t)):
            status = STATUS_UNDERFLOW
            break

        for j in range(dim):
            ytmp[j] = y[j] + h_try * (A21 * k1[j])
        k2 = rhs(t + C2 * h_try, ytmp, args)
        for j in range(dim):
            ytmp[j] = y[j] + h_try * (A31 * k1[j] + A32 * k2[j])
        k3 = rhs(t + C3 * h_try, ytmp, args)
        for j in range(dim):
            ytmp[j] = y[j] + h_try * (A41 * k1[j] + A42 * k2[j] + A43 * k3[j])
        k4 = rhs(t + C4 * h_try, ytmp, args)
        for j in range(dim):
            ytmp[j] = y[j] + h_try * (A51 * k1[j] + A52 * k2[j] + A53 * k3[j] + A54 * k4[j])
        k5 = rhs(t + C5 * h_try, ytmp, args)
        for j in range(dim):
            ytmp[j] = y[j] + h_try * (A61 * k1[j] + A62 * k2[j] + A63 * k3[j] + A64 * k4[j] + A65 * k5[j])
        k6 = rhs(t + h_try, ytmp, args)
        y_new = np.empty(dim)
        for j in range(dim):
            y_new[j] = y[j] + h_try * (A71 * k1[j] + A73 * k3[j] + A74 * k4[j] + A75 * k5[j] + A76 * k6[j])
        t_new = t_out if landing else t + h_try
        k7 = rhs(t_new, y_new, args)

        acc = 0.0
        for j in range(dim):
            e = h_try * (E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j] + E6 * k6[j] + E7 * k7[j])
            sk = atol + rtol * max(abs(y[j]), abs(y_new[j]))
            acc += (e / sk) ** 2
        err = math.sqrt(acc / dim)

        if not math.isfinite(err):
            h = 0.1 * h_try
            last_rejected = True
            continue

        fac11 = err**_EXPO1
        if err <= 1.0:
            fac = fac11 / facold**_BETA_PI
            fac = max(_FACC2, min(_FACC1, fac / _SAFE))
            h_new = h_try / fac
            if last_rejected:
                h_new = min(h_new, h_try)
            facold = max(err, 1e-4)
            last_rejected = False
            t = t_new
            y = y_new
            k1 = k7
            if landing:
                h = max(h_new, h_free) if h_try < h_free else h_new
                ts[n] = t
                ys[n] = y
                dys[n] = k1
                n += 1
                finite = True
                for j in range(dim):
                    if not math.isfinite(y[j]):
                        finite = False
                if not finite:
                    status = STATUS_NONFINITE
                    break
                if stop(t, y, args):
                    status = STATUS_STOPPED
                    break
            else:
                h = h_new
        else:
            h = h_try / min(_FACC1, fac11 / _SAFE)
            last_rejected = True
    return status, n, t, ts, ys, dys


_dopri_loop_jit = njit(nogil=True)(_dopri_loop)


@njit
def _never(t, y, args):
    return False


def _is_jitted(fn) -> bool:
    return isinstance(fn, CPUDispatcher)


def _sample_grid(t0: float, t1: float, stride: float) -> np.ndarray:
    n_inner = int(math.floor((t1 - t0) / stride * (1.0 + 1e-12)))
    grid = t0 + stride * np.arange(n_inner + 1, dtype=float)
    if t1 - grid[-1] <= 1e-9 * stride:
        grid[-1] = t1
    else:
        grid = np.append(grid, t1)
    return grid


def integrate(
    rhs: Callable,
    y0,
    t_span: tuple[float, float],
    config: IntegratorConfig | None = None,
    args=None,
    stop: Callable | None = None,
    meta: dict[str, Any] | None = None,
) -> Trajectory:
    """Integrate ``y' = rhs(t, y, args)`` over ``t_span``.

    Samples land exactly on ``t0 + k * sample_stride`` plus the endpoint.
    ``stop(t, y, args)`` is checked at each sample; when it returns true the
    trajectory ends there and ``meta["stopped"]`` is set.  A complex ``y0``
    yields complex states; ``rhs`` then sees the interleaved real view.

    Raises IntegrationError on step-size underflow or a non-finite state.
    """
    config = config or IntegratorConfig()
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError(f"need t1 > t0, got {t_span!r}")

    y0_arr = np.asarray(y0)
    is_complex = np.iscomplexobj(y0_arr)
    scalar = y0_arr.ndim == 0
    if is_complex:
        y_real = np.ascontiguousarray(np.atleast_1d(y0_arr).astype(np.complex128)).view(np.float64).copy()
    else:
        y_real = np.atleast_1d(y0_arr).astype(np.float64).copy()
    if not np.all(np.isfinite(y_real)):
        raise ValueError("initial state must be finite")

    args_arr = np.zeros(1) if args is None else np.asarray(args, dtype=np.float64)
    stop_fn = _never if stop is None else stop
    grid = _sample_grid(t0, t1, config.sample_stride)

    loop = _dopri_loop_jit if (_is_jitted(rhs) and _is_jitted(stop_fn)) else _dopri_loop
    status, n, t_reached, ts, ys, dys = loop(
        rhs,
        stop_fn,
        args_arr,
        grid,
        y_real,
        config.rel_tol,
        config.abs_tol,
        config.initial_step,
        config.max_step,
    )

    ts = ts[:n]
    ys = ys[:n]
    dys = dys[:n]
    if is_complex:
        ys = np.ascontiguousarray(ys).view(np.complex128)
        dys = np.ascontiguousarray(dys).view(np.complex128)
    if scalar:
        ys = ys[:, 0]
        dys = dys[:, 0]

    info = {"config": config, "sample_stride": config.sample_stride, "stopped": status == STATUS_STOPPED}
    if meta:
        info.update(meta)
    traj = Trajectory(ts, ys, dys, info) if n >= 2 else None

    if status == STATUS_UNDERFLOW:
        raise IntegrationError("step size underflow", float(t_reached), traj)
    if status == STATUS_NONFINITE:
        raise IntegrationError("non-finite state", float(t_reached), traj)
    if traj is None:
        raise IntegrationError("stopped before a second sample", float(t_reached), None)
    return traj


def detect_event(traj: Trajectory, predicate: Callable, resolution: float | None = None) -> float | None:
    """First time where ``predicate(state, t)`` changes sign, or None.

    The bracketing sample interval is bisected on interpolated states until
    it is narrower than ``resolution`` (default: stride / 100).  A sample where
    the predicate is exactly zero is returned as is.
    """
    if resolution is None:
        resolution = traj.stride / 100.0
    times = traj.times
    prev = predicate(traj.states[0], times[0])
    if prev == 0:
        return float(times[0])
    for i in range(1, len(times)):
        cur = predicate(traj.states[i], times[i])
        if cur == 0:
            return float(times[i])
        if (cur > 0) != (prev > 0):
            lo, hi = times[i - 1], times[i]
            lo_pos = prev > 0
            while hi - lo > resolution:
                mid = 0.5 * (lo + hi)
                val = predicate(traj.interpolate(mid), mid)
                if val == 0:
                    return float(mid)
                if (val > 0) == lo_pos:
                    lo = mid
                else:
                    hi = mid
            return float(0.5 * (lo + hi))
        prev = cur
    return None
