"""No-jump amplitude evolution under the non-Hermitian Hamiltonian.

The state is kept on ``|0)`` and couplets ``1..N`` (``2N + 1`` amplitudes).
In the frame of the first tone the amplitudes obey ``dc/dt = M(t) c`` with

    M(t) = -i H_frame - kappa a^dag a - (gamma_I / 2) sigma_+ sigma_-
           + sum_m E_m (exp(-i Delta_m t) sigma_+ - exp(+i Delta_m t) sigma_-).

Moving to the interaction picture of the dressed energies turns every matrix
element into a sum of pure oscillations ``exp(-i Omega t)`` whose frequency is
the detuning of the responsible tone from the responsible transition, so
``M(t) = sum_l M_l exp(-i Omega_l t)``.  Keeping only terms with
``|Omega| <= levels[L]`` (the ``L``-th smallest distinct ``|Omega|``) retains
the resonant pathways plus the ``L`` nearest off-resonant ones.

Decay couples ``|n)+`` and ``|n)-`` with frequency ``2 sqrt(n) g``; in the
rotating-wave approximation (the default) those elements are dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from mpcspec.jc import DressedBasis, build_basis, frame_energies, hamiltonian_frame, op_matrix
from mpcspec.params import SystemParams
from mpcspec.steady import normal_power

FREQ_REL_TOL = 1e-9
STEP_FACTOR = 0.05


def two_state_rho00(E: float, kappa: float = 1.0, gamma_I: float = 1.0) -> float:
    """Vacuum population when one tone resonantly drives ``|0) -> |1)+``."""
    if E < 0:
        raise ValueError("E must be >= 0")
    return 1.0 - E**2 / (0.5 * (kappa + gamma_I / 2) ** 2 + 2 * E**2)


@dataclass(frozen=True)
class HarmonicTerms:
    """``M(t) = sum_l matrices[l] exp(-i omegas[l] t)`` in the dressed interaction picture.

    ``omegas`` are signed and sorted by ``(|Omega|, Omega)``; ``levels`` holds the
    distinct ``|Omega|`` values in increasing order with ``levels[0] = 0``.
    """

    omegas: np.ndarray
    matrices: np.ndarray
    levels: np.ndarray
    energies: np.ndarray
    basis: DressedBasis
    N: int
    L: int | None = None

    def __len__(self) -> int:
        return len(self.omegas)

    def level_of(self, i: int) -> int:
        return int(np.searchsorted(self.levels, abs(self.omegas[i]) - self._tol))

    @property
    def _tol(self) -> float:
        return FREQ_REL_TOL * max(1.0, float(self.levels[-1]))

    def truncate(self, L: int | None) -> HarmonicTerms:
        """Keep terms whose ``|Omega|`` is among the ``L + 1`` smallest levels."""
        if L is None or L >= len(self.levels) - 1:
            return replace(self, L=None if L is None else min(L, len(self.levels) - 1))
        if L < 0:
            raise ValueError("L must be >= 0")
        keep = np.abs(self.omegas) <= self.levels[L] + self._tol
        return replace(self, omegas=self.omegas[keep], matrices=self.matrices[keep], L=L)

    def matrix_at(self, t: float) -> np.ndarray:
        return np.tensordot(np.exp(-1j * self.omegas * t), self.matrices, axes=1)

    @property
    def max_frequency(self) -> float:
        return float(np.abs(self.omegas).max()) if len(self.omegas) else 0.0

    @property
    def max_rate(self) -> float:
        """Bound on ``||M(t)||_inf`` over all t."""
        if not len(self.omegas):
            return 0.0
        return float(np.abs(self.matrices).sum(axis=0).sum(axis=1).max())


def _decay_matrix(p: SystemParams, basis: DressedBasis) -> np.ndarray:
    a = op_matrix("a", basis).matrix
    spl = op_matrix("sigma_plus", basis).matrix
    smi = op_matrix("sigma_minus", basis).matrix
    return -p.kappa * (a.conj().T @ a) - 0.5 * p.gamma_I * (spl @ smi)


def frame_evolution_matrix(g: float, p: SystemParams, t: float) -> np.ndarray:
    """``M(t)`` in the rotating frame (no interaction picture, no RWA)."""
    basis = build_basis(p.N)
    H = hamiltonian_frame(g, p, basis).matrix
    spl = op_matrix("sigma_plus", basis).matrix
    smi = op_matrix("sigma_minus", basis).matrix
    M = -1j * H + _decay_matrix(p, basis)
    for off, E in zip(p.tone_offsets(), p.amps):
        M = M + E * (np.exp(-1j * off * t) * spl - np.exp(1j * off * t) * smi)
    return M


def build_heff_terms(g: float, p: SystemParams, rwa: bool = True) -> HarmonicTerms:
    """Split the no-jump generator into oscillating terms on couplets ``<= N``."""
    basis = build_basis(p.N)
    d = basis.dim
    eps = frame_energies(g, p, basis)
    spl = op_matrix("sigma_plus", basis).matrix
    smi = op_matrix("sigma_minus", basis).matrix
    dec = _decay_matrix(p, basis)

    # (omega, row, col, value) for every elementary contribution
    parts: list[tuple[float, int, int, complex]] = []
    for j in range(d):
        for k in range(d):
            if dec[j, k] == 0:
                continue
            if j != k and rwa:
                continue
            parts.append((eps[k] - eps[j], j, k, dec[j, k]))
    for off, E in zip(p.tone_offsets(), p.amps):
        if E == 0.0:
            continue
        for j, k in zip(*np.nonzero(np.abs(spl) > 1e-15)):
            parts.append((off - (eps[j] - eps[k]), j, k, E * spl[j, k]))
        for j, k in zip(*np.nonzero(np.abs(smi) > 1e-15)):
            parts.append((-off - (eps[j] - eps[k]), j, k, -E * smi[j, k]))

    scale = max(1.0, max((abs(w) for w, *_ in parts), default=1.0))
    tol = FREQ_REL_TOL * scale
    parts.sort(key=lambda x: x[0])
    groups: list[list] = []
    for w, j, k, v in parts:
        if groups and abs(w - groups[-1][0]) <= tol:
            groups[-1][1].append((j, k, v))
        else:
            groups.append([w, [(j, k, v)]])
    omegas, mats = [], []
    for w, entries in groups:
        M = np.zeros((d, d), dtype=complex)
        for j, k, v in entries:
            M[j, k] += v
        if abs(w) <= tol:
            w = 0.0
        omegas.append(w)
        mats.append(M)
    if not any(w == 0.0 for w in omegas):
        omegas.append(0.0)
        mats.append(np.zeros((d, d), dtype=complex))
    omegas = np.array(omegas)
    order = np.lexsort((omegas, np.abs(omegas)))
    omegas = omegas[order]
    mats = np.array(mats)[order]

    levels = [0.0]
    for w in np.abs(omegas):
        if w > levels[-1] + tol:
            levels.append(float(w))
    return HarmonicTerms(omegas=omegas, matrices=mats, levels=np.array(levels),
                         energies=eps, basis=basis, N=p.N)


def interaction_matrix(g: float, p: SystemParams, t: float, rwa: bool = True) -> np.ndarray:
    """Interaction-picture generator at time ``t`` built directly from ``M(t)``.

    ``exp(i H t) (M(t) + i H) exp(-i H t)`` with ``H`` the diagonal frame
    Hamiltonian; under the RWA the intra-couplet decay coherences are removed.
    """
    basis = build_basis(p.N)
    eps = frame_energies(g, p, basis)
    H = hamiltonian_frame(g, p, basis).matrix
    M = frame_evolution_matrix(g, p, t) + 1j * H
    if rwa:
        dec = _decay_matrix(p, basis)
        M = M - (dec - np.diag(np.diag(dec)))
    phase = np.exp(1j * eps * t)
    return phase[:, None] * M * phase.conj()[None, :]


@dataclass(frozen=True)
class AmplitudeTrajectory:
    """Interaction-picture amplitudes ``c(t)`` sampled on a uniform grid."""

    times: np.ndarray
    coeffs: np.ndarray
    energies: np.ndarray
    basis: DressedBasis
    dt: float

    @property
    def norm(self) -> np.ndarray:
        return np.sum(np.abs(self.coeffs) ** 2, axis=1)

    def frame_coeffs(self) -> np.ndarray:
        """Amplitudes in the rotating frame, ``c_j exp(-i eps_j t)``."""
        return self.coeffs * np.exp(-1j * np.outer(self.times, self.energies))

    def expect(self, op: np.ndarray) -> np.ndarray:
        c = self.frame_coeffs()
        return np.real(np.einsum("ti,ij,tj->t", c.conj(), op, c))


def integrate_amplitudes(terms: HarmonicTerms, L: int | None, T: float, dt: float | None = None,
                         c0: np.ndarray | None = None, store_every: int = 1) -> AmplitudeTrajectory:
    """Fixed-step RK4 integration of ``dc/dt = M(t) c`` from ``c(0) = |0)``.

    The step must satisfy ``dt * max(max|Omega|, ||M||) <= 0.05`` over the kept
    terms; when ``dt`` is omitted the largest such step dividing ``T`` is used.
    """
    kept = terms.truncate(L)
    fast = max(kept.max_frequency, kept.max_rate, 1e-12)
    limit = STEP_FACTOR / fast
    if T <= 0:
        raise ValueError("T must be > 0")
    if dt is None:
        n = max(1, math.ceil(T / limit))
        dt = T / n
    else:
        if dt > limit * (1 + 1e-12):
            raise ValueError(f"dt={dt:g} exceeds the resolvable step {limit:g} for these terms")
        n = int(round(T / dt))
        if n < 1 or abs(n * dt - T) > 1e-9 * T:
            raise ValueError("T must be an integer multiple of dt")

    d = kept.basis.dim
    c = np.zeros(d, dtype=complex)
    if c0 is None:
        c[0] = 1.0
    else:
        c[:] = c0
    w = kept.omegas
    mats = kept.matrices

    def f(t, y):
        return np.exp(-1j * w * t) @ (mats @ y)

    out_t = [0.0]
    out_c = [c.copy()]
    for i in range(n):
        t = i * dt
        k1 = f(t, c)
        k2 = f(t + dt / 2, c + dt / 2 * k1)
        k3 = f(t + dt / 2, c + dt / 2 * k2)
        k4 = f(t + dt, c + dt * k3)
        c = c + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if (i + 1) % store_every == 0 or i == n - 1:
            out_t.append((i + 1) * dt)
            out_c.append(c.copy())
    return AmplitudeTrajectory(times=np.array(out_t), coeffs=np.array(out_c),
                               energies=terms.energies, basis=kept.basis, dt=dt)


def estimate_npcr(traj: AmplitudeTrajectory, N: int | None = None) -> float:
    """Peak of the unnormalized ``<psi(t)| a^dag^N a^N |psi(t)>`` along the trajectory.

    The no-jump state loses norm to undetected decays, so its count rate rises
    from zero, peaks and decays; the peak is the pathway estimate of the
    steady-state rate.  A trajectory that ends before the peak is rejected.
    """
    if N is None:
        N = traj.basis.n_max
    rate = traj.expect(normal_power(traj.basis, N))
    i = int(np.argmax(rate))
    if i == len(rate) - 1 and rate[i] > 0:
        raise ValueError("trajectory ends before the count rate peaks; increase T")
    return float(max(rate[i], 0.0))


def pathway_estimate(g: float, p: SystemParams, L: int = 1, T: float = 10.0,
                     dt: float | None = None) -> float:
    terms = build_heff_terms(g, p)
    return estimate_npcr(integrate_amplitudes(terms, L, T, dt), p.N)
