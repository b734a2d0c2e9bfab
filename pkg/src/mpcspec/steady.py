"""Steady state of the multichromatically driven master equation.

The periodically driven steady state is expanded in harmonics of the tone
offsets ``Delta_m = delta_m - g_f`` (m = 2..N) relative to the first tone,

    rho(t) = sum_k rho_k exp(-i k . Delta t),

and the harmonics with ``|k|_1 <= q`` are solved from the coupled block system

    [i k . Delta + Q] rho_k + sum_m E_m (S+ rho_{k - I_m} - S- rho_{k + I_m}) = 0,

where ``S+- rho = [sigma_+-, rho]``.  The first tone is static in the rotating
frame and lives inside ``Q``.  The homogeneous system is closed by replacing
the ``(0|.|0)`` equation of the ``k = 0`` block with ``Tr rho_0 = 1``.

Density matrices are vectorized by column stacking, ``vec(A rho B) =
(B^T kron A) vec(rho)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from mpcspec.jc import DressedBasis, build_basis, hamiltonian_frame, op_matrix
from mpcspec.params import SystemParams

RESIDUAL_TOL = 1e-10
POSITIVITY_TOL = 1e-4
NPCR_CLAMP = 1e-12


class SolverError(RuntimeError):
    """Raised when the block system cannot be solved to tolerance."""

    def __init__(self, message: str, residual: float = float("nan"), g: float | None = None,
                 delta_tilde: float | None = None):
        super().__init__(message)
        self.residual = residual
        self.g = g
        self.delta_tilde = delta_tilde


class PositivityError(ValueError):
    pass


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape((d, d), order="F")


def spre(A: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(A.shape[0]), A)


def spost(A: np.ndarray) -> np.ndarray:
    return np.kron(A.T, np.eye(A.shape[0]))


def commutator_super(A: np.ndarray) -> np.ndarray:
    return spre(A) - spost(A)


def lindblad_super(c: np.ndarray) -> np.ndarray:
    """``2 c rho c^dag - c^dag c rho - rho c^dag c``."""
    cdc = c.conj().T @ c
    return 2 * np.kron(c.conj(), c) - spre(cdc) - spost(cdc)


@dataclass(frozen=True)
class Superoperator:
    tag: str
    matrix: np.ndarray

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        d = rho.shape[0]
        return unvec(self.matrix @ vec(rho), d)


@lru_cache(maxsize=None)
def _static_supers(n_couplets: int) -> dict[str, np.ndarray]:
    basis = build_basis(n_couplets)
    a = op_matrix("a", basis).matrix
    spl = op_matrix("sigma_plus", basis).matrix
    smi = op_matrix("sigma_minus", basis).matrix
    out = {
        "S+": commutator_super(spl),
        "S-": commutator_super(smi),
        "D_a": lindblad_super(a),
        "D_sm": lindblad_super(smi),
        "C_N": commutator_super(op_matrix("N", basis).matrix),
        "C_A": commutator_super(op_matrix("A", basis).matrix),
    }
    for m in out.values():
        m.setflags(write=False)
    return out


def sigma_supers(basis: DressedBasis) -> tuple[Superoperator, Superoperator]:
    s = _static_supers(basis.n_max)
    return Superoperator("Sigma+", s["S+"]), Superoperator("Sigma-", s["S-"])


def assemble_Q(g: float, p: SystemParams, basis: DressedBasis | None = None) -> Superoperator:
    """Time-independent generator in the frame of the first tone.

    ``Q = -i[H_frame, .] + E_1([sigma_+, .] - [sigma_-, .]) + gamma_I/2 D[sigma_-] + kappa D[a]``.
    """
    if basis is None:
        basis = build_basis(p.n_couplets)
    s = _static_supers(basis.n_max)
    # -i[-g_f N + i g A, .] = i g_f [N, .] + g [A, .]
    Q = 1j * p.g_f * s["C_N"] + g * s["C_A"]
    Q = Q + p.amps[0] * (s["S+"] - s["S-"])
    Q = Q + 0.5 * p.gamma_I * s["D_sm"] + p.kappa * s["D_a"]
    return Superoperator("Q", Q)


def assemble_Q_direct(g: float, p: SystemParams, basis: DressedBasis | None = None) -> Superoperator:
    """Same generator built from the operators on every call; used as a cross-check."""
    if basis is None:
        basis = build_basis(p.n_couplets)
    H = hamiltonian_frame(g, p, basis).matrix
    spl = op_matrix("sigma_plus", basis).matrix
    smi = op_matrix("sigma_minus", basis).matrix
    a = op_matrix("a", basis).matrix
    Q = (-1j * commutator_super(H) + p.amps[0] * (commutator_super(spl) - commutator_super(smi))
         + 0.5 * p.gamma_I * lindblad_super(smi) + p.kappa * lindblad_super(a))
    return Superoperator("Q", Q)


@dataclass(frozen=True)
class BlochIndexSet:
    N: int
    q: int
    ks: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.ks)

    @property
    def zero(self) -> tuple[int, ...]:
        return (0,) * (self.N - 1)

    def position(self, k) -> int:
        return self.positions[tuple(k)]

    @property
    def positions(self) -> dict[tuple[int, ...], int]:
        return _positions(self.ks)

    def __contains__(self, k) -> bool:
        return tuple(k) in self.positions


@lru_cache(maxsize=None)
def _positions(ks):
    return {k: i for i, k in enumerate(ks)}


@lru_cache(maxsize=None)
def bloch_indices(N: int, q: int) -> BlochIndexSet:
    """All ``k`` in Z^(N-1) with ``|k|_1 <= q``, ordered by ``|k|_1`` then lexicographically."""
    if q < 0:
        raise ValueError("q must be >= 0")
    if N < 1:
        raise ValueError("N must be >= 1")
    ks = [k for k in itertools.product(range(-q, q + 1), repeat=N - 1) if sum(map(abs, k)) <= q]
    ks.sort(key=lambda k: (sum(map(abs, k)), k))
    return BlochIndexSet(N=N, q=q, ks=tuple(ks))


@dataclass(frozen=True)
class Tones:
    """Drive tones as seen by the harmonic expansion.

    ``static`` is the total amplitude of tones at the frame frequency (the first
    tone plus any tone coinciding with it).  ``offsets``/``amps`` list the
    remaining oscillating tones; tones with equal offsets are merged and
    zero-amplitude tones dropped, since both leave the dc component unchanged
    while making the expansion degenerate or larger than needed.
    ``groups`` records which original tone numbers (1-based) feed each entry.
    """

    static: float
    offsets: tuple[float, ...]
    amps: tuple[float, ...]
    groups: tuple[tuple[int, ...], ...]

    @property
    def n_dynamic(self) -> int:
        return len(self.offsets)


def effective_tones(p: SystemParams, rel_tol: float = 1e-9) -> Tones:
    tol = rel_tol * p.g_f
    offsets = p.tone_offsets()
    static = p.amps[0]
    static_group = [1]
    dyn: list[list] = []  # [offset, amp, [tones]]
    for m in range(1, p.N):
        off, amp = offsets[m], p.amps[m]
        if amp == 0.0:
            continue
        if abs(off) <= tol:
            static += amp
            static_group.append(m + 1)
            continue
        for entry in dyn:
            if abs(entry[0] - off) <= tol:
                entry[1] += amp
                entry[2].append(m + 1)
                break
        else:
            dyn.append([off, amp, [m + 1]])
    return Tones(
        static=static,
        offsets=tuple(e[0] for e in dyn),
        amps=tuple(e[1] for e in dyn),
        groups=(tuple(static_group),) + tuple(tuple(e[2]) for e in dyn),
    )


def _generator(g: float, p: SystemParams, static_amp: float, n_couplets: int) -> np.ndarray:
    s = _static_supers(n_couplets)
    Q = 1j * p.g_f * s["C_N"] + g * s["C_A"]
    Q = Q + static_amp * (s["S+"] - s["S-"])
    return Q + 0.5 * p.gamma_I * s["D_sm"] + p.kappa * s["D_a"]


@lru_cache(maxsize=None)
def _shift_matrices(n_dyn: int, q: int) -> tuple[list[sp.csr_matrix], list[sp.csr_matrix]]:
    """Block adjacency: ``lower[m][i, j] = 1`` iff ``k_j = k_i - I_m``; ``upper`` for ``+ I_m``."""
    idx = bloch_indices(n_dyn + 1, q)
    pos = idx.positions
    nb = len(idx)
    lower, upper = [], []
    for m in range(n_dyn):
        lo = sp.lil_matrix((nb, nb))
        up = sp.lil_matrix((nb, nb))
        for i, k in enumerate(idx.ks):
            km = k[:m] + (k[m] - 1,) + k[m + 1:]
            kp = k[:m] + (k[m] + 1,) + k[m + 1:]
            if km in pos:
                lo[i, pos[km]] = 1.0
            if kp in pos:
                up[i, pos[kp]] = 1.0
        lower.append(lo.tocsr())
        upper.append(up.tocsr())
    return lower, upper


@dataclass(frozen=True)
class BlochSystem:
    """Homogeneous block system over all kept harmonics (before the trace row)."""

    matrix: sp.csr_matrix
    indices: BlochIndexSet
    d: int
    g: float
    params: SystemParams
    tones: Tones

    @property
    def n_unknowns(self) -> int:
        return self.matrix.shape[0]

    def block(self, k_row, k_col) -> np.ndarray:
        d2 = self.d * self.d
        i = self.indices.position(k_row) * d2
        j = self.indices.position(k_col) * d2
        return self.matrix[i:i + d2, j:j + d2].toarray()

    @property
    def trace_row(self) -> int:
        return self.indices.position(self.indices.zero) * self.d * self.d


def _check_commensurate(idx: BlochIndexSet, tones: Tones, g_f: float, rel_tol: float = 1e-9) -> None:
    off = np.array(tones.offsets)
    for k in idx.ks:
        if any(k) and abs(np.dot(k, off)) <= rel_tol * g_f:
            raise SolverError(
                f"harmonic k={k} is stationary for tone offsets {tones.offsets}; "
                "the expansion is degenerate at this truncation"
            )


def assemble_system(g: float, p: SystemParams, q: int = 1) -> BlochSystem:
    """Sparse block system ``[i k.Delta + Q] rho_k + sum_m E_m (S+ rho_{k-I_m} - S- rho_{k+I_m})``."""
    basis = build_basis(p.n_couplets)
    d = basis.dim
    d2 = d * d
    tones = effective_tones(p)
    nd = tones.n_dynamic
    idx = bloch_indices(nd + 1, q)
    nb = len(idx)
    Q = _generator(g, p, tones.static, basis.n_max)
    s = _static_supers(basis.n_max)
    phases = np.array([1j * np.dot(k, tones.offsets) for k in idx.ks]) if nd else np.zeros(nb)

    A = sp.kron(sp.identity(nb, format="csr"), sp.csr_matrix(Q), format="csr")
    A = A + sp.kron(sp.diags(phases), sp.identity(d2), format="csr")
    if nd:
        lower, upper = _shift_matrices(nd, q)
        Sp = sp.csr_matrix(s["S+"])
        Sm = sp.csr_matrix(s["S-"])
        for m, E in enumerate(tones.amps):
            A = A + E * sp.kron(lower[m], Sp, format="csr") - E * sp.kron(upper[m], Sm, format="csr")
    return BlochSystem(matrix=A.tocsr(), indices=idx, d=d, g=float(g), params=p, tones=tones)


@dataclass
class BlochSolution:
    """Harmonic components ``rho_k(g)`` of the periodically driven steady state.

    Keys of ``components`` index the oscillating tones listed in ``tones``
    (normally tones 2..N); ``rho0`` is the dc component.
    """

    components: dict[tuple[int, ...], np.ndarray]
    g: float
    residual: float
    params: SystemParams
    q: int
    basis: DressedBasis
    tones: Tones
    min_eigenvalue: float = field(init=False)
    positivity_ok: bool = field(init=False)

    def __post_init__(self):
        rho0 = self.rho0
        self.min_eigenvalue = float(np.linalg.eigvalsh(0.5 * (rho0 + rho0.conj().T)).min())
        self.positivity_ok = self.min_eigenvalue >= -POSITIVITY_TOL

    @property
    def rho0(self) -> np.ndarray:
        return self.components[(0,) * self.tones.n_dynamic]

    @property
    def n_equations(self) -> int:
        return len(self.components) * self.basis.dim ** 2


def block_residual(components, g: float, p: SystemParams, tones: Tones, n_couplets: int,
                   Q: np.ndarray | None = None) -> float:
    """Backward error ``||A x||_inf / (s ||x||_inf)`` of the homogeneous block equations.

    ``s = ||Q||_inf + max|k.Delta| + sum_m E_m (||S+||_inf + ||S-||_inf)`` bounds
    ``||A||_inf`` from above, so the figure never understates the true residual by
    more than that bound's slack.
    """
    s = _static_supers(n_couplets)
    if Q is None:
        Q = _generator(g, p, tones.static, n_couplets)
    Sp, Sm = s["S+"], s["S-"]
    vecs = {k: vec(r) for k, r in components.items()}
    nd = tones.n_dynamic
    off = np.array(tones.offsets)
    rmax = 0.0
    maxphase = 0.0
    for k, v in vecs.items():
        phase = 1j * float(np.dot(k, off)) if nd else 0.0
        maxphase = max(maxphase, abs(phase))
        r = Q @ v + phase * v
        for m, E in enumerate(tones.amps):
            km = k[:m] + (k[m] - 1,) + k[m + 1:]
            kp = k[:m] + (k[m] + 1,) + k[m + 1:]
            if km in vecs:
                r = r + E * (Sp @ vecs[km])
            if kp in vecs:
                r = r - E * (Sm @ vecs[kp])
        rmax = max(rmax, float(np.abs(r).max()))
    norm = lambda M: float(np.abs(M).sum(axis=1).max())
    scale = norm(Q) + maxphase + sum(tones.amps) * (norm(Sp) + norm(Sm))
    xmax = max(float(np.abs(v).max()) for v in vecs.values())
    return rmax / (scale * xmax)


@lru_cache(maxsize=None)
def _transpose_perm(d: int) -> np.ndarray:
    """Index map taking ``vec(rho)`` to ``vec(rho^T)``."""
    return np.arange(d * d).reshape(d, d).T.reshape(-1)


def _trace_vector(d: int) -> np.ndarray:
    t = np.zeros(d * d, dtype=complex)
    t[np.arange(d) * (d + 1)] = 1.0
    return t


def solve_system(system: BlochSystem, tol: float = RESIDUAL_TOL) -> BlochSolution:
    """Sparse LU solve of the full block system with the trace row in place."""
    d = system.d
    d2 = d * d
    n = system.n_unknowns
    r0 = system.trace_row
    keep = np.ones(n)
    keep[r0] = 0.0
    trace = sp.csr_matrix(
        (np.ones(d, dtype=complex), (np.full(d, r0), r0 + np.arange(d) * (d + 1))), shape=(n, n)
    )
    A = (sp.diags(keep) @ system.matrix + trace).tocsc()
    b = np.zeros(n, dtype=complex)
    b[r0] = 1.0
    try:
        x = spla.splu(A).solve(b)
    except RuntimeError as exc:  # exactly singular factor
        raise SolverError(f"singular Bloch system at g={system.g}: {exc}", g=system.g) from exc
    comps = {k: unvec(x[i * d2:(i + 1) * d2], d).copy() for i, k in enumerate(system.indices.ks)}
    return _finish(comps, system.g, system.params, system.indices.q, system.tones, tol)


def _finish(comps, g, p, q, tones, tol, Q=None) -> BlochSolution:
    basis = build_basis(p.n_couplets)
    if not all(np.all(np.isfinite(r)) for r in comps.values()):
        raise SolverError(f"non-finite Bloch solution at g={g}", g=g)
    residual = block_residual(comps, g, p, tones, basis.n_max, Q)
    if not residual <= tol:
        raise SolverError(
            f"Bloch solve residual {residual:.3e} exceeds {tol:.0e} at g={g}", residual=residual, g=g
        )
    return BlochSolution(components=comps, g=float(g), residual=residual, params=p, q=q,
                         basis=basis, tones=tones)


def solve_reduced(g: float, p: SystemParams, tol: float = RESIDUAL_TOL) -> BlochSolution:
    """Exact ``q = 1`` solve by eliminating the first harmonics.

    With ``|k|_1 <= 1`` each harmonic ``+-I_m`` couples only to ``rho_0``::

        rho_{+I_m} = -E_m (Q + i Delta_m)^-1 S+ rho_0
        rho_{-I_m} = +E_m (Q - i Delta_m)^-1 S- rho_0

    leaving a single ``d^2`` system for ``rho_0``.
    """
    basis = build_basis(p.n_couplets)
    d = basis.dim
    d2 = d * d
    tones = effective_tones(p)
    s = _static_supers(basis.n_max)
    Sp, Sm = s["S+"], s["S-"]
    Q = _generator(g, p, tones.static, basis.n_max)
    eye = np.eye(d2)
    perm = _transpose_perm(d)
    R = Q.copy()
    up, down = [], []
    for off, E in zip(tones.offsets, tones.amps):
        Y = np.linalg.solve(Q + 1j * off * eye, Sp)
        Xp = -E * Y  # rho_{+I} = Xp rho_0
        # Q and S+- commute with rho -> rho^dag up to S- = -(S+ .)^dag, so
        # E (Q - i Delta)^-1 S- is the dagger-conjugate of -E Y.
        Xm = -E * Y[np.ix_(perm, perm)].conj()  # rho_{-I} = Xm rho_0
        R += E * (Sp @ Xm - Sm @ Xp)
        up.append(Xp)
        down.append(Xm)
    R[0, :] = _trace_vector(d)
    b = np.zeros(d2, dtype=complex)
    b[0] = 1.0
    try:
        v0 = np.linalg.solve(R, b)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular reduced system at g={g}: {exc}", g=g) from exc
    nd = tones.n_dynamic
    comps = {(0,) * nd: unvec(v0, d).copy()}
    for m in range(nd):
        e = tuple(1 if i == m else 0 for i in range(nd))
        comps[e] = unvec(up[m] @ v0, d).copy()
        comps[tuple(-x for x in e)] = unvec(down[m] @ v0, d).copy()
    idx = bloch_indices(nd + 1, 1)
    comps = {k: comps[k] for k in idx.ks}
    return _finish(comps, g, p, 1, tones, tol, Q)


def solve_steady(g: float, p: SystemParams, q: int = 1, tol: float = RESIDUAL_TOL,
                 method: str = "auto") -> BlochSolution:
    """Solve for the harmonics ``rho_k(g)``, ``|k|_1 <= q``, with ``Tr rho_0 = 1``.

    ``method`` is ``"sparse"`` (LU of the full block system), ``"reduced"``
    (exact elimination, ``q = 1`` only) or ``"auto"``.
    """
    if method not in ("auto", "sparse", "reduced"):
        raise ValueError(f"unknown method {method!r}")
    if method == "reduced" and q != 1:
        raise ValueError("the reduced solve is exact only for q = 1")
    tones = effective_tones(p)
    idx = bloch_indices(tones.n_dynamic + 1, q)
    try:
        _check_commensurate(idx, tones, p.g_f)
        if method == "reduced" or (method == "auto" and q == 1):
            return solve_reduced(g, p, tol=tol)
        return solve_system(assemble_system(g, p, q), tol=tol)
    except SolverError as exc:
        if exc.g is None:
            exc.g = g
        if p.N > 1 and exc.delta_tilde is None:
            exc.delta_tilde = p.deltas_tilde[-1]
        raise


@lru_cache(maxsize=None)
def _normal_power(n_couplets: int, N: int) -> np.ndarray:
    a = op_matrix("a", build_basis(n_couplets)).matrix
    aN = np.linalg.matrix_power(a, N)
    out = aN.conj().T @ aN
    out.setflags(write=False)
    return out


def normal_power(basis: DressedBasis, N: int) -> np.ndarray:
    """``a^dag^N a^N`` in the dressed basis."""
    return _normal_power(basis.n_max, N)


def expectation_normal_power(rho: np.ndarray, basis: DressedBasis, N: int,
                              strict: bool = True) -> float:
    """``Tr(rho a^dag^N a^N)`` clamped at zero.

    Values below ``-NPCR_CLAMP`` raise ``PositivityError`` when ``strict``;
    otherwise they are clamped too (scans flag such points separately).
    """
    if basis.n_max < N:
        raise ValueError(f"basis holds {basis.n_max} couplets, need >= {N}")
    val = float(np.real(np.trace(rho @ normal_power(basis, N))))
    if val < 0:
        if strict and val < -NPCR_CLAMP:
            raise PositivityError(f"<a^dag^{N} a^{N}> = {val:.3e} is negative beyond clamp")
        val = 0.0
    return val


def npcr(sol: BlochSolution, N: int | None = None, strict: bool = True) -> float:
    """N-photon count rate ``Tr(rho_0 a^dag^N a^N)`` of the dc component."""
    return expectation_normal_power(sol.rho0, sol.basis, sol.params.N if N is None else N, strict)


def density_element(sol: BlochSolution, label) -> complex:
    """Entry of ``rho_0`` addressed by a dressed-state label.

    ``label`` is ``"00"``; ``(n, eps, n2, eps2)`` for ``eps(n|rho_0|n2)eps2``;
    ``(0, n, eps)`` for ``(0|rho_0|n)eps``; or ``(n, eps, 0)`` for its conjugate.
    """
    b = sol.basis
    if label == "00" or label == (0, 0):
        i = j = 0
    else:
        label = tuple(label)
        if len(label) == 4:
            i, j = b.index(label[0], label[1]), b.index(label[2], label[3])
        elif len(label) == 3 and label[0] == 0:
            i, j = 0, b.index(label[1], label[2])
        elif len(label) == 3 and label[2] == 0:
            i, j = b.index(label[0], label[1]), 0
        else:
            raise ValueError(f"unrecognized density-matrix label {label!r}")
    return complex(sol.rho0[i, j])
