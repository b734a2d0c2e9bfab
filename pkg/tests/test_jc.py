import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpcspec.jc import (
    bare_jc_hamiltonian, build_basis, dressed_energy, frame_energies, hamiltonian_frame, op_matrix,
)
from mpcspec.params import fig2_params


def kron_ops(n_photons):
    """Independent bare operators as cavity (x) atom Kronecker products, atom order (g, e)."""
    a = np.diag(np.sqrt(np.arange(1, n_photons + 1)), 1).astype(complex)
    sm = np.array([[0, 1], [0, 0]], dtype=complex)
    ic, ia = np.eye(n_photons + 1), np.eye(2)
    return np.kron(a, ia), np.kron(ic, sm)


def dressed_vector(n, sign, n_photons):
    v = np.zeros(2 * (n_photons + 1), dtype=complex)
    if n == 0:
        v[0] = 1.0
        return v
    v[2 * n] = sign / math.sqrt(2)          # |n, g>
    v[2 * (n - 1) + 1] = -1j / math.sqrt(2)  # |n-1, e>
    return v


def test_basis_order_and_dimension():
    b = build_basis(3)
    assert b.dim == 7
    assert [b.label(i) for i in range(b.dim)] == ["|0)", "|1)+", "|1)-", "|2)+", "|2)-", "|3)+", "|3)-"]
    assert b.index(2, -1) == 4
    with pytest.raises(IndexError):
        b.index(4, 1)
    with pytest.raises(ValueError):
        build_basis(0)


def test_transform_is_isometry():
    U = build_basis(4).transform
    assert np.allclose(U.conj().T @ U, np.eye(U.shape[1]), atol=1e-14)


def test_ladder_matrix_elements():
    b = build_basis(3)
    a = op_matrix("a", b).matrix
    assert a[0, b.index(1, 1)] == pytest.approx(1 / math.sqrt(2))
    assert a[0, b.index(1, -1)] == pytest.approx(-1 / math.sqrt(2))
    assert a[b.index(1, 1), b.index(2, 1)] == pytest.approx((1 + math.sqrt(2)) / 2)
    assert np.allclose(a.imag, 0, atol=1e-15)


@pytest.mark.parametrize("kind", ["a", "sigma_minus", "sigma_plus", "a_dag"])
def test_operators_match_kronecker_construction(kind):
    nc = 3
    a, sm = kron_ops(nc + 1)
    full = {"a": a, "sigma_minus": sm, "sigma_plus": sm.conj().T, "a_dag": a.conj().T}[kind]
    b = build_basis(nc)
    vecs = [dressed_vector(n, s, nc + 1) for n, s in b.states]
    ref = np.array([[u.conj() @ full @ v for v in vecs] for u in vecs])
    assert np.allclose(op_matrix(kind, b).matrix, ref, atol=1e-14)


def test_dressed_energies_match_dense_diagonalization():
    g, omega, n_ph = 2.7, 5.0, 4
    a, sm = kron_ops(n_ph)
    sp = sm.conj().T
    H = omega * (a.conj().T @ a + sp @ sm) + 1j * g * (a.conj().T @ sm - a @ sp)
    ev = np.linalg.eigvalsh(H)
    want = [0.0] + [dressed_energy(n, s, g, omega) for n in range(1, n_ph + 1) for s in (1, -1)]
    want.append((n_ph + 1) * omega)  # |n_ph, e> has no partner inside the truncation
    assert np.allclose(ev, np.sort(want), atol=1e-12)


def test_bare_hamiltonian_agrees_with_kron_build():
    g, omega, n_ph = 1.3, -0.7, 3
    a, sm = kron_ops(n_ph)
    sp = sm.conj().T
    H = omega * (a.conj().T @ a + sp @ sm) + 1j * g * (a.conj().T @ sm - a @ sp)
    assert np.allclose(bare_jc_hamiltonian(g, n_ph, omega), H, atol=1e-14)


@given(st.floats(0.01, 100), st.integers(1, 4), st.sampled_from([1, -1]))
@settings(max_examples=40, deadline=None)
def test_dressed_vectors_are_eigenvectors(g, n, sign):
    n_ph = 5
    H = bare_jc_hamiltonian(g, n_ph)
    v = dressed_vector(n, sign, n_ph)
    assert np.allclose(H @ v, dressed_energy(n, sign, g) * v, atol=1e-9 * max(1, g))


def test_frame_hamiltonian_is_diagonal_with_frame_energies():
    p = fig2_params()
    b = build_basis(4)
    g = 0.8 * p.g_f
    H = hamiltonian_frame(g, p, b).matrix
    assert np.allclose(H, np.diag(frame_energies(g, p, b)), atol=1e-12)
    # |1)+ sits at zero in the frame when g = g_f
    assert frame_energies(p.g_f, p, b)[1] == pytest.approx(0.0, abs=1e-12)


def test_op_matrix_rejects_unknown_and_frame_kinds():
    b = build_basis(2)
    with pytest.raises(ValueError):
        op_matrix("H_frame", b)
    with pytest.raises(ValueError):
        op_matrix("b", b)


def test_number_and_coupling_operators():
    b = build_basis(3)
    N = op_matrix("N", b).matrix
    A = op_matrix("A", b).matrix
    assert np.allclose(N, np.diag([n for n, _ in b.states]), atol=1e-14)
    assert np.allclose(A, -A.conj().T, atol=1e-14)
    assert np.allclose(N @ A, A @ N, atol=1e-13)
    s3 = op_matrix("sigma_3", b).matrix
    assert np.trace(s3).real == pytest.approx(-0.5)  # |0) has sigma_3 = -1/2, couplets sum to 0
