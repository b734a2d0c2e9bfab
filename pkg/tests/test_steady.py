import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpcspec.jc import build_basis
from mpcspec.params import SystemParams, fig2_params
from mpcspec.steady import (
    PositivityError, SolverError, _static_supers, assemble_Q, assemble_Q_direct, assemble_system,
    bloch_indices, density_element, effective_tones, expectation_normal_power, lindblad_super,
    npcr, solve_steady, unvec, vec,
)

S2, S3 = math.sqrt(2), math.sqrt(3)

# <a^dag3 a^3> at the six reference operating points from the sparse LU route (q = 1);
# the reduced elimination must reproduce them.
SPARSE_Q1 = [
    (S2 - 1, (S2 - 1) ** 2, 3.98563703e-3),
    (1.0, 1.0, 1.91185284e-3),
    (1.0, S3 - S2, 5.21020702e-3),
    (1.0, -1.0, 4.47955729e-4),
    (1.0, -(S2 + 1), 9.72160449e-4),
    (1.0, -(S3 + S2), 4.18377935e-3),
]


def test_vectorization_convention():
    rng = np.random.default_rng(0)
    A, R, B = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    assert np.allclose(vec(A @ R @ B), np.kron(B.T, A) @ vec(R))
    assert np.array_equal(unvec(vec(R), 3), R)


def test_lindblad_superoperator_matches_matrix_form():
    rng = np.random.default_rng(1)
    c = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    cdc = c.conj().T @ c
    direct = 2 * c @ rho @ c.conj().T - cdc @ rho - rho @ cdc
    assert np.allclose(unvec(lindblad_super(c) @ vec(rho), 4), direct)


@pytest.mark.parametrize("g_tilde", [0.3, 1.0, 1.2])
def test_generator_preserves_trace_and_matches_direct_build(g_tilde):
    p = fig2_params()
    Q = assemble_Q(g_tilde * p.g_f, p).matrix
    d = build_basis(p.n_couplets).dim
    t = np.zeros(d * d)
    t[np.arange(d) * (d + 1)] = 1
    assert np.abs(t @ Q).max() < 1e-12 * np.abs(Q).max()
    assert np.allclose(Q, assemble_Q_direct(g_tilde * p.g_f, p).matrix, atol=1e-12)


def test_bloch_indices_graded_order():
    idx = bloch_indices(3, 1)
    assert idx.ks == ((0, 0), (-1, 0), (0, -1), (0, 1), (1, 0))
    assert len(bloch_indices(3, 2)) == 13
    assert (1, 1) in bloch_indices(3, 2)
    assert bloch_indices(3, 2).position((0, 0)) == 0


def test_block_equation_for_first_harmonic():
    p = fig2_params(delta3_tilde=-1.0)
    sys_ = assemble_system(p.g_f, p, q=1)
    tones = effective_tones(p)
    s = _static_supers(p.n_couplets)
    blk = sys_.block((1, 0), (1, 0))
    Q = assemble_Q(p.g_f, p).matrix
    assert np.allclose(blk, Q + 1j * tones.offsets[0] * np.eye(len(Q)))
    assert np.allclose(sys_.block((1, 0), (0, 0)), tones.amps[0] * s["S+"])
    assert np.allclose(sys_.block((-1, 0), (0, 0)), -tones.amps[0] * s["S-"])
    assert sys_.n_unknowns == 5 * 81


def test_coinciding_tone_is_merged_into_static_drive():
    p = fig2_params(delta3_tilde=1.0)
    t = effective_tones(p)
    assert t.static == pytest.approx(p.amps[0] + p.amps[2])
    assert t.n_dynamic == 1
    merged = SystemParams(g_f=p.g_f, N=2, amps=(p.amps[0] + p.amps[2], p.amps[1]),
                          deltas_tilde=(p.deltas_tilde[0],), n_couplets=4)
    a = solve_steady(p.g_f, p).rho0
    b = solve_steady(p.g_f, merged).rho0
    assert np.allclose(a, b, atol=1e-13)


def test_zero_amplitude_tones_are_dropped():
    p = fig2_params(delta3_tilde=-1.0).with_amps(E2=0.0)
    t = effective_tones(p)
    assert t.groups == ((1,), (3,))


def test_stationary_harmonic_is_rejected():
    # Delta_3 = -Delta_2 makes k = (1, 1) stationary at q = 2
    p = SystemParams(g_f=63.0, amps=(0.5, 0.5, 0.5), deltas_tilde=(0.5, 1.5))
    with pytest.raises(SolverError, match="stationary"):
        solve_steady(p.g_f, p, q=2)
    solve_steady(p.g_f, p, q=1)  # |k|_1 <= 1 never pairs the tones


def test_drives_off_gives_vacuum():
    p = fig2_params().with_amps(E1=0, E2=0, E3=0)
    sol = solve_steady(0.9 * p.g_f, p)
    expect = np.zeros_like(sol.rho0)
    expect[0, 0] = 1
    assert np.allclose(sol.rho0, expect, atol=1e-14)
    assert npcr(sol) == 0.0


def test_single_tone_depletion_matches_closed_form():
    # the closed form ignores off-resonant couplets, worth up to ~1% here
    p = fig2_params().with_amps(E2=0, E3=0)
    sol = solve_steady(p.g_f, p)
    assert sol.rho0[0, 0].real == pytest.approx(13 / 17, rel=1e-2)
    p2 = fig2_params().with_amps(E1=0, E3=0)
    sol2 = solve_steady((S2 - 1) * p2.g_f, p2)
    assert sol2.rho0[0, 0].real == pytest.approx(25 / 41, rel=1e-2)


@pytest.mark.parametrize("g_tilde, d3, value", SPARSE_Q1)
def test_reduced_and_sparse_routes_agree(g_tilde, d3, value):
    p = fig2_params(d3)
    red = solve_steady(g_tilde * p.g_f, p, method="reduced")
    spr = solve_steady(g_tilde * p.g_f, p, method="sparse")
    for k in red.components:
        assert np.allclose(red.components[k], spr.components[k], atol=1e-13)
    assert npcr(spr, strict=False) == pytest.approx(value, rel=1e-6)
    assert npcr(red, strict=False) == pytest.approx(value, rel=1e-6)


def test_higher_truncation_solves_and_satisfies_constraints():
    p = fig2_params(-1.0)
    sol = solve_steady(p.g_f, p, q=2)
    assert len(sol.components) == 13
    assert sol.n_equations == 13 * 81
    assert abs(np.trace(sol.rho0) - 1) < 1e-12
    for k, r in sol.components.items():
        if any(k):
            assert abs(np.trace(r)) < 1e-10
        assert np.allclose(sol.components[tuple(-x for x in k)], r.conj().T, atol=1e-12)
    with pytest.raises(ValueError):
        solve_steady(p.g_f, p, q=2, method="reduced")


def test_unattainable_tolerance_raises_with_context():
    p = fig2_params(-1.0)
    with pytest.raises(SolverError) as info:
        solve_steady(p.g_f, p, tol=0.0)
    assert info.value.g == p.g_f
    assert info.value.delta_tilde == -1.0
    assert info.value.residual > 0


def test_npcr_clamp_and_strict_mode():
    b = build_basis(4)
    rho = np.zeros((b.dim, b.dim), dtype=complex)
    rho[0, 0] = 1.0
    i = b.index(3, 1)
    rho[i, i] = -1e-13
    assert expectation_normal_power(rho, b, 3) == 0.0
    rho[i, i] = -1e-6
    with pytest.raises(PositivityError):
        expectation_normal_power(rho, b, 3)
    assert expectation_normal_power(rho, b, 3, strict=False) == 0.0
    with pytest.raises(ValueError):
        expectation_normal_power(rho, build_basis(2), 3)


def test_density_element_labels():
    p = fig2_params(-1.0)
    sol = solve_steady(p.g_f, p)
    b = sol.basis
    assert density_element(sol, "00") == sol.rho0[0, 0]
    assert density_element(sol, (3, 1, 3, 1)) == sol.rho0[b.index(3, 1), b.index(3, 1)]
    assert density_element(sol, (0, 1, -1)) == sol.rho0[0, b.index(1, -1)]
    assert density_element(sol, (1, -1, 0)) == pytest.approx(np.conj(density_element(sol, (0, 1, -1))), abs=1e-15)
    with pytest.raises(IndexError):
        density_element(sol, (5, 1, 5, 1))
    with pytest.raises(ValueError):
        density_element(sol, (1, 2))


@given(g_tilde=st.floats(0.3, 1.25), d3=st.floats(-4.0, 2.0))
@settings(max_examples=25, deadline=None)
def test_solution_invariants_hold_across_the_scan(g_tilde, d3):
    p = fig2_params(d3)
    sol = solve_steady(g_tilde * p.g_f, p)
    assert abs(np.trace(sol.rho0) - 1) < 1e-10
    assert np.allclose(sol.rho0, sol.rho0.conj().T, atol=1e-10)
    assert sol.residual <= 1e-10
    assert sol.min_eigenvalue >= -1e-3
    pops = np.diag(sol.rho0).real
    assert np.all(pops >= -1e-3) and np.all(pops <= 1 + 1e-12)
