import math

import numpy as np
import pytest

from autoresonance.experiments import (
    SweepSpec,
    deviation_envelope,
    detect_fall,
    fit_power_law,
    fit_sticking_rate,
    measure_max,
    run_sweep,
)
from autoresonance.germ import germ_psi, life_time
from autoresonance.integrate import Trajectory
from autoresonance.resonance import SystemParams

P = SystemParams(0.05, 1.0)


def _traj(tau, psi):
    return Trajectory(np.asarray(tau, float), np.asarray(psi, complex), meta={"sample_stride": tau[1] - tau[0]})


def test_detect_fall_on_synthetic_drop():
    tau = np.round(np.arange(0, 4001) * 0.05, 10)
    psi = np.where(tau <= 100.0, np.sqrt(tau), 0.1)
    fall = detect_fall(_traj(tau, psi), P)
    assert fall is not None and 100.0 <= fall <= 100.05


def test_detect_fall_absent_on_track():
    tau = np.arange(0, 4001) * 0.05
    assert detect_fall(_traj(tau, np.sqrt(tau)), P) is None


def test_detect_fall_ignores_start():
    tau = np.arange(0, 4001) * 0.05
    psi = np.where(tau < 5.0, 0.0, np.sqrt(tau))
    assert detect_fall(_traj(tau, psi), P, tau_min=10.0) is None


def test_detect_fall_monotone_in_threshold(reference_run):
    falls = [detect_fall(reference_run, P, c) for c in (0.3, 0.5, 0.7)]
    assert all(f is not None for f in falls)
    assert falls[0] >= falls[1] >= falls[2]
    assert 380 <= falls[1] <= 400


def test_detect_fall_validates_arguments(reference_run):
    with pytest.raises(ValueError):
        detect_fall(reference_run, P, c_fall=1.5)
    with pytest.raises(ValueError):
        detect_fall(reference_run, P, tau_min=0.0)


def test_measure_max():
    traj = _traj(np.array([0.0, 1.0, 2.0, 3.0]), [0, 1j, -3, 2])
    assert measure_max(traj) == (2.0, 3.0)


def test_measure_max_first_tie_wins():
    traj = _traj(np.array([0.0, 1.0, 2.0, 3.0]), [0, 2, 2j, 1])
    assert measure_max(traj) == (1.0, 2.0)


def test_deviation_envelope_removes_offset():
    tau = np.linspace(0, 100, 20001)
    d = 0.5 + 0.1 * tau / 100 + 0.2 * np.cos(tau)
    _, amps = deviation_envelope(tau, d)
    assert amps == pytest.approx(0.4, abs=1e-4)


def _sticking_fixture(deviation):
    tau = np.linspace(1.0, 390.0, 38901)
    g = np.array([germ_psi(t, P) for t in tau])
    return _traj(tau, g + deviation(tau))


@pytest.mark.parametrize("gamma", [0.005, 0.02])
def test_sticking_rate_rectified_cosine(gamma):
    traj = _sticking_fixture(lambda t: 0.3 * np.exp(-gamma * t) * np.cos(0.7 * t) * np.exp(0.4j))
    assert fit_sticking_rate(traj, P, (20.0, 200.0)) == pytest.approx(gamma, rel=0.01)


def test_sticking_rate_rotation_over_floor():
    gamma = 0.01
    traj = _sticking_fixture(lambda t: 0.5 + 0.05 * np.exp(-gamma * t) * np.exp(1j * t))
    assert fit_sticking_rate(traj, P, (20.0, 200.0)) == pytest.approx(gamma, rel=0.02)


def test_sticking_rate_on_reference_run(reference_run):
    rate = fit_sticking_rate(reference_run, P, (20.0, 200.0))
    assert 0 < rate < 0.2


def test_sticking_rate_needs_oscillation():
    traj = _sticking_fixture(lambda t: 0.3 * np.ones_like(t))
    with pytest.raises(ValueError):
        fit_sticking_rate(traj, P, (20.0, 200.0))


@pytest.mark.parametrize("window", [(0.0, 100.0), (100.0, 50.0), (20.0, 400.0)])
def test_sticking_rate_window_checked(reference_run, window):
    with pytest.raises(ValueError):
        fit_sticking_rate(reference_run, P, window)


def test_power_law_exact():
    x = np.array([0.2, 0.1, 0.05, 0.025])
    fit = fit_power_law(np.column_stack([x, 3.0 * x**-2]))
    assert fit.exponent == pytest.approx(-2.0, abs=1e-12)
    assert fit.log_prefactor == pytest.approx(math.log(3.0), abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.n_points == 4


def test_power_law_noisy_r_squared_below_one():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    fit = fit_power_law(np.column_stack([x, x * [1.0, 1.3, 0.8, 1.1]]))
    assert 0 <= fit.r_squared < 1


@pytest.mark.parametrize(
    "points",
    [[(1.0, 1.0)], [(1.0, 1.0), (0.0, 2.0)], [(1.0, -1.0), (2.0, 2.0)], [(1.0, float("nan")), (2.0, 2.0)]],
)
def test_power_law_rejects_bad_data(points):
    with pytest.raises(ValueError):
        fit_power_law(points)


@pytest.fixture(scope="module")
def small_sweep():
    return run_sweep(SweepSpec([0.2, 0.1], [1.0]))


def test_sweep_records(small_sweep):
    assert [r.params.beta for r in small_sweep] == [0.2, 0.1]
    for rec in small_sweep:
        life = life_time(rec.params)
        assert rec.status == "ok"
        assert rec.tau_fall == pytest.approx(life, rel=0.1)
        assert rec.tau_at_max <= rec.tau_fall
        assert rec.max_abs == pytest.approx(rec.params.f / rec.params.beta, rel=0.1)
        assert rec.decay_rate is not None and rec.decay_rate > 0


def test_sweep_empty():
    assert run_sweep(SweepSpec([], [1.0])) == []


def test_sweep_duplicates_and_workers(small_sweep):
    dup = run_sweep(SweepSpec([0.2, 0.2], [1.0]))
    assert dup[0] == dup[1] == small_sweep[0]
    assert run_sweep(SweepSpec([0.2, 0.1], [1.0]), workers=2) == small_sweep


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec([0.1, -0.2], [1.0])
    with pytest.raises(ValueError):
        SweepSpec([0.1], [1.0], tau_horizon_factor=1.0)
