import math

import numpy as np
import pytest

from autoresonance.duffing import (
    DUFFING_CONFIG,
    RealState,
    carrier_phase,
    compare_models,
    demodulate,
    duffing_kernel,
    duffing_rhs,
    envelope_equivalent,
    reconstruct,
    simulate_duffing,
)
from autoresonance.integrate import IntegratorConfig, Trajectory
from autoresonance.resonance import SystemParams, pr_rhs

EPS = 1e-3


def test_rhs_at_rest_is_pure_drive():
    p = SystemParams(0.05, 1.0, EPS)
    out = duffing_rhs(0.0, RealState(0.0, 0.0), p)
    assert out.u == 0.0
    assert out.v == pytest.approx(4 * math.sqrt(2) * EPS, rel=1e-15)


def test_rhs_needs_epsilon():
    with pytest.raises(ValueError):
        duffing_rhs(0.0, RealState(0.0, 0.0), SystemParams(0.05, 1.0))


def test_kernel_matches_public_rhs():
    p = SystemParams(0.2, 0.7, 3e-3)
    args = np.array([p.epsilon, p.beta, p.f, 2 * math.sqrt(2)])
    rng = np.random.default_rng(3)
    for t, u, v in rng.uniform(-1, 1, (20, 3)) * [500, 0.5, 0.5]:
        ref = duffing_rhs(t, RealState(u, v), p)
        got = duffing_kernel(t, np.array([u, v]), args)
        assert got == pytest.approx(np.array(ref), rel=1e-13, abs=1e-15)


def test_energy_conserved_without_drive_and_damping():
    p = SystemParams(0.0, 0.0, 0.0, strict=False)
    cfg = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14, max_step=0.2, sample_stride=0.05)
    traj = simulate_duffing(p, (0.0, 100.0), state0=(0.3, 0.0), config=cfg)
    u, v = traj.states[:, 0], traj.states[:, 1]
    energy = 0.5 * v**2 + 0.5 * u**2 - math.sqrt(2) / 2 * u**4
    assert np.max(np.abs(energy - energy[0])) <= 1e-8


def test_damped_linear_oscillator():
    beta = 0.2
    p = SystemParams(beta, 0.0, EPS, strict=False)
    traj = simulate_duffing(p, (0.0, 100.0), state0=(1.0, 0.0), nonlinear=False)
    gamma = 4 * EPS ** (2 / 3) * beta
    wd = math.sqrt(1 - gamma**2 / 4)
    t = traj.times
    exact = np.exp(-gamma * t / 2) * (np.cos(wd * t) + gamma / (2 * wd) * np.sin(wd * t))
    assert np.max(np.abs(traj.states[:, 0] - exact)) <= 1e-7


def test_carrier_phase():
    assert carrier_phase(0.0, EPS) == 0.0
    assert carrier_phase(100.0, EPS) == pytest.approx(100.0 - 1e-4 * 1e4, rel=1e-12)


def _envelope(times_tau, values):
    return Trajectory(np.asarray(times_tau, dtype=float), np.asarray(values, dtype=complex))


def test_demodulation_recovers_constant_envelope():
    p = SystemParams(0.05, 1.0, EPS)
    amp = 0.3 - 0.4j
    t = np.linspace(0.0, 100.0, 4001)
    signal = reconstruct(_envelope(EPS ** (2 / 3) * t, np.full(t.size, amp)), p)
    est = demodulate(signal, p)
    err = np.abs(est.states - amp)
    early = t <= 50.0
    assert err[early].max() <= 0.01 * abs(amp)
    # the leftover comes from the carrier chirp 2 eps^(4/3) t in phi'
    assert np.all(err <= 2 * EPS ** (4 / 3) * t * abs(amp) + 1e-14)


def test_demodulation_of_rest_is_zero():
    p = SystemParams(0.05, 1.0, EPS)
    traj = Trajectory(np.linspace(0, 10, 11), np.zeros((11, 2)))
    assert np.all(demodulate(traj, p).states == 0)


def test_demodulation_is_linear():
    p = SystemParams(0.05, 1.0, EPS)
    rng = np.random.default_rng(5)
    t = np.linspace(0, 50, 201)
    x = Trajectory(t, rng.normal(size=(201, 2)))
    y = Trajectory(t, rng.normal(size=(201, 2)))
    combo = Trajectory(t, 2.0 * x.states - 0.5 * y.states)
    lhs = demodulate(combo, p).states
    rhs = 2.0 * demodulate(x, p).states - 0.5 * demodulate(y, p).states
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_demodulated_time_axis():
    p = SystemParams(0.05, 1.0, EPS)
    traj = Trajectory(np.array([0.0, 1000.0]), np.zeros((2, 2)))
    assert demodulate(traj, p).times == pytest.approx([0.0, 10.0], rel=1e-12)


def test_reconstruct_initial_sample():
    p = SystemParams(0.05, 1.0, EPS)
    out = reconstruct(_envelope([0.0, 0.01], [1.0, 1.0]), p)
    assert out.states[0, 0] == pytest.approx(0.2, rel=1e-12)
    assert out.states[0, 1] == pytest.approx(0.0, abs=1e-15)


def test_reconstruct_round_trip_at_start():
    p = SystemParams(0.05, 1.0, EPS)
    psi = _envelope([0.0, 0.01], [0.7 + 0.2j, 0.7 + 0.2j])
    back = demodulate(reconstruct(psi, p), p)
    assert back.states[0] == pytest.approx(0.7 + 0.2j, abs=1e-14)


def test_reconstructed_zero_crossings_follow_carrier():
    p = SystemParams(0.05, 1.0, EPS)
    t = np.linspace(0, 60, 3001)
    amp = 0.5 * np.exp(0.3j)
    out = reconstruct(_envelope(EPS ** (2 / 3) * t, np.full(t.size, amp)), p)
    phase = np.cos(carrier_phase(t, EPS) + 0.3)
    assert np.array_equal(np.sign(out.states[:, 0]), np.sign(phase))


def test_envelope_equivalent_maps_the_averaged_equation():
    p = SystemParams(0.05, 0.8, EPS)
    mapped, ts, amp = envelope_equivalent(p)
    rng = np.random.default_rng(9)
    for tau, re, im in rng.uniform(0, 3, (10, 3)):
        psi = complex(re, im)
        # averaged oscillator: 2i psi' + 4 tau psi + 4i beta psi - 6 sqrt2 |psi|^2 psi = 2 sqrt2 f
        dpsi = (2 * math.sqrt(2) * p.f - 4 * tau * psi - 4j * p.beta * psi + 6 * math.sqrt(2) * abs(psi) ** 2 * psi) / 2j
        chi_dot = pr_rhs(ts * tau, amp * psi, mapped)
        assert chi_dot == pytest.approx(amp * dpsi / ts, rel=1e-12, abs=1e-12)


@pytest.mark.slow
def test_cross_model_error_shrinks_with_epsilon():
    errors = []
    for eps in (4e-3, 1e-3):
        p = SystemParams(0.2, 1.0, eps)
        report = compare_models(p, (0.0, 5.0 / eps ** (2 / 3)), window=(1.0, 5.0))
        assert report.duffing_failed_at is None
        errors.append(report.reduced_max_error_rel)
    assert errors[1] < 0.75 * errors[0]


def test_default_config_resolves_the_carrier():
    assert 2 * math.pi / DUFFING_CONFIG.max_step >= 30
