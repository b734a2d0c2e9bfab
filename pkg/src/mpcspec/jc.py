"""Truncated dressed-state basis and operator matrices of the JC model.

Operators are built in the bare product basis ``|n_photons, g/e>`` (one photon
beyond the kept couplets, so every image of a kept state is representable) and
then projected onto the kept dressed states.  Matrix elements that leave the
kept couplets are therefore dropped.

Basis ordering is ``[|0), |1)+, |1)-, |2)+, |2)-, ...]``.  The dressed vectors
are ``|n)+- = (+-|n, g> - i|n-1, e>) / sqrt2``, which are eigenvectors of
``i g (a^dag sigma_- - a sigma_+)`` with eigenvalue ``+-sqrt(n) g`` and give
real ladder elements such as ``(0|a|1)+- = +-1/sqrt2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from mpcspec.params import SystemParams

OPERATOR_KINDS = ("a", "a_dag", "sigma_plus", "sigma_minus", "sigma_3", "N", "A", "H_frame")


@dataclass(frozen=True)
class DressedBasis:
    n_max: int
    states: tuple[tuple[int, int], ...]
    transform: np.ndarray

    @property
    def dim(self) -> int:
        return 1 + 2 * self.n_max

    def index(self, n: int, sign: int = 0) -> int:
        """Position of ``|n)_sign`` (``sign`` is ignored for ``n = 0``)."""
        if n == 0:
            return 0
        if not 1 <= n <= self.n_max or sign not in (1, -1):
            raise IndexError(f"state |{n}){'+' if sign > 0 else '-'} not in basis (n_max={self.n_max})")
        return 2 * n - 1 if sign > 0 else 2 * n

    def label(self, i: int) -> str:
        n, s = self.states[i]
        return "|0)" if n == 0 else f"|{n}){'+' if s > 0 else '-'}"


def _bare_index(n: int, excited: int) -> int:
    return 2 * n + excited


@lru_cache(maxsize=None)
def _bare_ops(n_photons: int) -> dict[str, np.ndarray]:
    dim = 2 * (n_photons + 1)
    a = np.zeros((dim, dim), dtype=complex)
    sm = np.zeros((dim, dim), dtype=complex)
    for n in range(1, n_photons + 1):
        for s in (0, 1):
            a[_bare_index(n - 1, s), _bare_index(n, s)] = math.sqrt(n)
    for n in range(n_photons + 1):
        sm[_bare_index(n, 0), _bare_index(n, 1)] = 1.0
    ad = a.conj().T
    sp = sm.conj().T
    s3 = 0.5 * (sp @ sm - sm @ sp)
    num = s3 + ad @ a + 0.5 * np.eye(dim)
    A = ad @ sm - a @ sp
    for m in (a, ad, sm, sp, s3, num, A):
        m.setflags(write=False)
    return {"a": a, "a_dag": ad, "sigma_minus": sm, "sigma_plus": sp, "sigma_3": s3, "N": num, "A": A}


@lru_cache(maxsize=None)
def build_basis(n_couplets: int) -> DressedBasis:
    """Dressed basis keeping ``|0)`` and couplets ``1 .. n_couplets``."""
    if not isinstance(n_couplets, (int, np.integer)) or n_couplets < 1:
        raise ValueError(f"n_couplets must be a positive integer, got {n_couplets!r}")
    n_couplets = int(n_couplets)
    bare_dim = 2 * (n_couplets + 2)
    U = np.zeros((bare_dim, 1 + 2 * n_couplets), dtype=complex)
    states = [(0, 0)]
    U[_bare_index(0, 0), 0] = 1.0
    r = 1 / math.sqrt(2)
    for n in range(1, n_couplets + 1):
        for j, sign in enumerate((1, -1)):
            col = 2 * n - 1 + j
            U[_bare_index(n, 0), col] = sign * r
            U[_bare_index(n - 1, 1), col] = -1j * r
            states.append((n, sign))
    U.setflags(write=False)
    return DressedBasis(n_max=n_couplets, states=tuple(states), transform=U)


@dataclass(frozen=True)
class OperatorMatrix:
    kind: str
    matrix: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    @property
    def H(self) -> np.ndarray:
        return self.matrix.conj().T


@lru_cache(maxsize=None)
def _dressed_op(kind: str, n_couplets: int) -> np.ndarray:
    basis = build_basis(n_couplets)
    U = basis.transform
    bare = _bare_ops(n_couplets + 1)[kind]
    m = U.conj().T @ bare @ U
    m.setflags(write=False)
    return m


def op_matrix(kind: str, basis: DressedBasis) -> OperatorMatrix:
    """Operator ``kind`` projected onto the kept dressed states.

    ``kind`` is one of ``a, a_dag, sigma_plus, sigma_minus, sigma_3, N, A``.
    ``H_frame`` needs a coupling and parameters; use :func:`hamiltonian_frame`.
    """
    if kind == "H_frame":
        raise ValueError("H_frame depends on g and SystemParams; call hamiltonian_frame()")
    if kind not in OPERATOR_KINDS:
        raise ValueError(f"unknown operator kind {kind!r}")
    return OperatorMatrix(kind, _dressed_op(kind, basis.n_max))


def dressed_energy(n: int, sign: int, g: float, omega: float = 0.0) -> float:
    """Eigenvalue ``n*omega + sign*sqrt(n)*g`` of the resonant JC Hamiltonian."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 0.0
    return n * omega + (1 if sign > 0 else -1) * math.sqrt(n) * g


def frame_energy(n: int, sign: int, g: float, p: SystemParams) -> float:
    """Dressed energy in the frame rotating at the first tone, ``omega + g_f``."""
    return dressed_energy(n, sign, g, omega=-p.g_f)


def hamiltonian_frame(g: float, p: SystemParams, basis: DressedBasis | None = None) -> OperatorMatrix:
    """Drive-free Hamiltonian ``(omega - omega_1) N + i g A`` with ``omega - omega_1 = -g_f``."""
    if basis is None:
        basis = build_basis(p.n_couplets)
    H = -p.g_f * _dressed_op("N", basis.n_max) + 1j * g * _dressed_op("A", basis.n_max)
    return OperatorMatrix("H_frame", H)


def frame_energies(g: float, p: SystemParams, basis: DressedBasis) -> np.ndarray:
    return np.array([frame_energy(n, s, g, p) for n, s in basis.states])


def bare_jc_hamiltonian(g: float, n_photons: int, omega: float = 0.0) -> np.ndarray:
    """``omega N + i g A`` in the bare product basis with up to ``n_photons`` photons."""
    ops = _bare_ops(n_photons)
    return omega * ops["N"] + 1j * g * ops["A"]
