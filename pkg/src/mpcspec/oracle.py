"""Brute-force time integration of the driven master equation.

Used as an independent check of the harmonic steady-state solver: the same
rotating frame and truncated basis, but every tone is kept with its explicit
time dependence and nothing is expanded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mpcspec.jc import build_basis
from mpcspec.params import SystemParams
from mpcspec.steady import _static_supers, assemble_Q_direct, unvec, vec

STEP_FACTOR = 0.05
TRACE_DRIFT_TOL = 1e-6


class TraceDriftError(RuntimeError):
    """The integrated density matrix lost its unit trace."""


@dataclass(frozen=True)
class DensityTrajectory:
    times: np.ndarray
    rhos: np.ndarray  # (n_samples, d, d)
    dt: float

    @property
    def sample_spacing(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else self.dt

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])


def slowest_period(p: SystemParams, rel_tol: float = 1e-9) -> float | None:
    """Beat period of the smallest non-zero tone offset (``None`` if all tones coincide)."""
    offs = [abs(o) for o, a in zip(p.tone_offsets(), p.amps) if a and abs(o) > rel_tol * p.g_f]
    return 2 * math.pi / min(offs) if offs else None


def max_step(g: float, p: SystemParams) -> float:
    """Largest step with ``dt * max(max|offset|, max|generator element|) <= 0.05``."""
    Q = assemble_Q_direct(g, p.with_amps(E1=0.0)).matrix
    s = _static_supers(p.n_couplets)
    elem = float(np.abs(Q).max()) + sum(p.amps) * float(np.abs(s["S+"]).max())
    fast = max(max(abs(o) for o in p.tone_offsets()), elem)
    return STEP_FACTOR / fast


def integrate_master(g: float, p: SystemParams, rho0: np.ndarray, T: float, dt: float,
                     store_every: int = 1) -> DensityTrajectory:
    """Fixed-step RK4 for ``d rho/dt = L(t) rho`` with every tone time dependent.

    ``L(t) = Q_0 + sum_m E_m (exp(-i Delta_m t) [sigma_+, .] - exp(+i Delta_m t) [sigma_-, .])``
    where ``Q_0`` holds the Hamiltonian and dissipators only.
    """
    basis = build_basis(p.n_couplets)
    d = basis.dim
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (d, d):
        raise ValueError(f"rho0 must be {d}x{d}")
    if not np.allclose(rho0, rho0.conj().T, atol=1e-12) or abs(np.trace(rho0) - 1) > 1e-10:
        raise ValueError("rho0 must be Hermitian with unit trace")
    if np.linalg.eigvalsh(rho0).min() < -1e-10:
        raise ValueError("rho0 must be positive semidefinite")
    limit = max_step(g, p)
    if dt > limit * (1 + 1e-12):
        raise ValueError(f"dt={dt:g} exceeds the resolvable step {limit:g}")
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError("T must be a positive integer multiple of dt")

    s = _static_supers(basis.n_max)
    Q0 = assemble_Q_direct(g, p.with_amps(E1=0.0), basis).matrix
    stacked = np.vstack([Q0, s["S+"], s["S-"]])
    d2 = d * d
    offs = np.array(p.tone_offsets())
    amps = np.array(p.amps)
    tr = np.zeros(d2)
    tr[np.arange(d) * (d + 1)] = 1.0

    def coeffs(t):
        up = np.exp(-1j * np.multiply.outer(t, offs)) @ amps
        return np.stack([np.ones_like(up), up, -np.conj(up)], axis=1)

    v = vec(rho0).astype(complex)
    times = [0.0]
    rhos = [rho0.copy()]
    chunk = 4096
    for start in range(0, n, chunk):
        steps = np.arange(start, min(start + chunk, n))
        c0 = coeffs(steps * dt)
        ch = coeffs((steps + 0.5) * dt)
        c1 = coeffs((steps + 1) * dt)
        for j, i in enumerate(steps.tolist()):
            k1 = c0[j] @ (stacked @ v).reshape(3, d2)
            k2 = ch[j] @ (stacked @ (v + dt / 2 * k1)).reshape(3, d2)
            k3 = ch[j] @ (stacked @ (v + dt / 2 * k2)).reshape(3, d2)
            k4 = c1[j] @ (stacked @ (v + dt * k3)).reshape(3, d2)
            v = v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if (i + 1) % store_every == 0 or i == n - 1:
                drift = abs(tr @ v - 1.0)
                if drift > TRACE_DRIFT_TOL:
                    raise TraceDriftError(
                        f"trace drifted by {drift:.2e} at t={(i + 1) * dt:.6g} (g={g}, dt={dt:g})"
                    )
                times.append((i + 1) * dt)
                rhos.append(unvec(v, d).copy())
    return DensityTrajectory(times=np.array(times), rhos=np.array(rhos), dt=dt)


def dc_component(traj: DensityTrajectory, window: float) -> np.ndarray:
    """Mean of the last ``window`` of the trajectory.

    Uses the samples in ``[t_end - window, t_end)``, which integrates any
    oscillation whose period divides ``window`` exactly (up to the sampling
    Nyquist limit).  ``window`` must be a whole number of sample spacings.
    """
    h = traj.sample_spacing
    m = int(round(window / h))
    if m < 1 or abs(m * h - window) > 1e-6 * h:
        raise ValueError("window must be a positive whole number of sample spacings")
    if window > traj.duration * (1 + 1e-12):
        raise ValueError(f"window {window:g} is longer than the trajectory ({traj.duration:g})")
    return traj.rhos[-m - 1:-1].mean(axis=0)


def oracle_dc(g: float, p: SystemParams, settle: float = 8.0, min_window: float = 10.0,
              samples_per_period: int = 64) -> np.ndarray:
    """Time-averaged dc component of the trajectory started in ``|0)(0|``.

    After at least ``settle`` the trajectory is averaged over the smallest whole
    number of slowest-tone beat periods covering ``min_window``.  Faster beats
    that do not fit the window exactly leave a residue of order
    ``|rho_k| / (Delta_k * window)``, so the window is kept long.
    """
    period = slowest_period(p) or 1.0
    n_periods = max(1, math.ceil(min_window / period - 1e-9))
    window = n_periods * period
    h = period / samples_per_period
    per_sample = max(1, math.ceil(h / max_step(g, p)))
    dt = h / per_sample
    settle_periods = math.ceil(settle / period - 1e-9)
    T = (settle_periods + n_periods) * period
    d = build_basis(p.n_couplets).dim
    rho0 = np.zeros((d, d), dtype=complex)
    rho0[0, 0] = 1.0
    traj = integrate_master(g, p, rho0, T, dt, store_every=per_sample)
    return dc_component(traj, window)
