import math

import numpy as np
import pytest

import mpcspec.oracle as oracle
from mpcspec.jc import build_basis
from mpcspec.oracle import (
    DensityTrajectory, TraceDriftError, dc_component, integrate_master, max_step, slowest_period,
)
from mpcspec.params import fig2_params


def projector(i, d=9):
    r = np.zeros((d, d), dtype=complex)
    r[i, i] = 1.0
    return r


def whole_steps(T, limit):
    n = math.ceil(T / limit)
    return T / n


def test_vacuum_is_stationary_without_drives():
    p = fig2_params().with_amps(E1=0, E2=0, E3=0)
    dt = whole_steps(0.5, max_step(p.g_f, p))
    traj = integrate_master(p.g_f, p, projector(0), 0.5, dt, store_every=100)
    assert np.allclose(traj.rhos, projector(0)[None], atol=1e-15)


def test_single_excitation_decays_at_combined_rate():
    # with gamma_I = 2 kappa the photon and atom halves decay alike, so the
    # single-excitation population falls exactly as exp(-(kappa + gamma_I/2) t)
    p = fig2_params().with_amps(E1=0, E2=0, E3=0)
    p = type(p)(g_f=p.g_f, gamma_I=2.0, amps=p.amps, deltas_tilde=p.deltas_tilde)
    b = build_basis(p.n_couplets)
    per = math.ceil(0.25 / max_step(p.g_f, p))
    dt = 0.25 / per
    traj = integrate_master(p.g_f, p, projector(b.index(1, 1)), 4.0, dt, store_every=per)
    rate = p.kappa + p.gamma_I / 2
    for t in (1.0, 2.0, 4.0):
        i = int(np.argmin(np.abs(traj.times - t)))
        assert traj.times[i] == pytest.approx(t)
        assert traj.rhos[i][0, 0].real == pytest.approx(1 - math.exp(-rate * t), abs=1e-8)


def test_trajectory_invariants_under_weak_drive():
    p = fig2_params(-1.0).scaled(0.2)
    dt = whole_steps(1.0, max_step(p.g_f, p))
    traj = integrate_master(p.g_f, p, projector(0), 1.0, dt, store_every=50)
    for rho in traj.rhos:
        assert abs(np.trace(rho) - 1) < 1e-8
        assert np.allclose(rho, rho.conj().T, atol=1e-10)
        assert np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() >= -1e-6


def test_halving_step_converges():
    p = fig2_params(-1.0).scaled(0.2)
    T = 0.5
    dt = whole_steps(T, max_step(p.g_f, p))
    a = integrate_master(p.g_f, p, projector(0), T, dt, store_every=10**9)
    b = integrate_master(p.g_f, p, projector(0), T, dt / 2, store_every=10**9)
    assert np.abs(a.rhos[-1] - b.rhos[-1]).max() <= 1e-6


def test_input_validation():
    p = fig2_params()
    dt = max_step(p.g_f, p)
    with pytest.raises(ValueError, match="resolvable"):
        integrate_master(p.g_f, p, projector(0), 1.0, 10 * dt)
    with pytest.raises(ValueError, match="multiple"):
        integrate_master(p.g_f, p, projector(0), 1.0, 0.7 * dt + 1e-9)
    with pytest.raises(ValueError, match="unit trace"):
        integrate_master(p.g_f, p, 2 * projector(0), 1.0, dt)
    with pytest.raises(ValueError, match="9x9"):
        integrate_master(p.g_f, p, np.eye(3) / 3, 1.0, dt)


def test_trace_drift_aborts(monkeypatch):
    monkeypatch.setattr(oracle, "TRACE_DRIFT_TOL", -1.0)
    p = fig2_params()
    dt = 1e-4
    with pytest.raises(TraceDriftError, match="trace drifted"):
        integrate_master(p.g_f, p, projector(0), 10 * dt, dt)


def test_dc_component_of_constant_trajectory():
    A = np.diag([0.7, 0.3]).astype(complex)
    traj = DensityTrajectory(np.linspace(0, 1, 11), np.repeat(A[None], 11, axis=0), 0.1)
    assert np.allclose(dc_component(traj, 0.5), A)


def test_dc_component_removes_whole_periods_of_a_cosine():
    omega = 2 * np.pi / 0.3
    h = 0.3 / 40
    t = np.arange(0, 400 + 1) * h
    A = np.array([[0.6, 0.1j], [-0.1j, 0.4]])
    B = np.array([[0.05, 0.02], [0.02, -0.05]])
    rhos = A[None] + np.cos(omega * t)[:, None, None] * B[None]
    traj = DensityTrajectory(t, rhos, h)
    assert np.abs(dc_component(traj, 3 * 0.3) - A).max() < 1e-10
    with pytest.raises(ValueError, match="longer"):
        dc_component(traj, 40 * 0.3)
    with pytest.raises(ValueError, match="sample"):
        dc_component(traj, 0.3 + h / 3)


def test_slowest_period():
    p = fig2_params(-1.0)
    assert slowest_period(p) == pytest.approx(2 * np.pi / ((2 - math.sqrt(2)) * p.g_f))
    assert slowest_period(p.with_amps(E2=0.0, E3=0.0)) is None
