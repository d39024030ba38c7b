"""Fundamental solutions, Morse-Sturm systems and the discrete Morse index."""

import numpy as np
import pytest
import scipy.linalg

from sympsturm.errors import FrameError, RefinementError, UnsupportedBoundaryError
from sympsturm.flows import (
    BoundaryCondition,
    CoefficientPath,
    GeneratorPath,
    MorseSturmSystem,
    boundary_lagrangian,
    c_of_Z,
    discrete_morse_index,
    integrate_fundamental,
    morse_sturm_to_hamiltonian,
)
from sympsturm.symplectic import double_space, is_lagrangian, standard_space


def rotation(t):
    return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])


def test_rotation_flow_matches_closed_form():
    # B = Id on the standard plane generates psi(t) = exp(t J0), a rotation.
    path = CoefficientPath.constant(np.eye(2), (0.0, 2.0))
    sol = integrate_fundamental(path, 64)
    for t in (0.0, 0.5, 1.3, 2.0):
        np.testing.assert_allclose(sol(t), rotation(t), atol=1e-8)
    np.testing.assert_allclose(sol.monodromy, rotation(2.0), atol=1e-8)
    assert sol.symplectic_defect < 1e-12
    assert sol.error_estimate < 1e-6


def test_hyperbolic_flow_matches_closed_form():
    # B = diag(1, -1) gives X = [[0, 1], [1, 0]], so psi(t) = cosh/sinh.
    path = CoefficientPath.constant(np.diag([1.0, -1.0]), (0.0, 3.0))
    sol = integrate_fundamental(path, 128)
    t = 3.0
    expect = np.array([[np.cosh(t), np.sinh(t)], [np.sinh(t), np.cosh(t)]])
    np.testing.assert_allclose(sol.monodromy, expect, rtol=1e-9)


def test_error_estimate_tracks_refinement():
    path = CoefficientPath.from_polynomial(
        [np.eye(2), 0.3 * np.array([[1.0, 0.5], [0.5, -1.0]])], (0.0, 2.0)
    )
    coarse = integrate_fundamental(path, 32)
    fine = integrate_fundamental(path, 256)
    assert fine.error_estimate < coarse.error_estimate
    true_gap = np.max(np.abs(coarse.monodromy - fine.monodromy))
    assert true_gap < 10 * coarse.error_estimate


def test_non_symplectic_generator_is_rejected():
    sp = standard_space(1)
    gen = GeneratorPath(lambda t: np.eye(2), (0.0, 4.0), sp)
    with pytest.raises(RefinementError):
        integrate_fundamental(gen, 16)


def test_integrate_input_validation():
    path = CoefficientPath.constant(np.eye(2), (0.0, 1.0))
    with pytest.raises(FrameError):
        integrate_fundamental(path, 1)
    with pytest.raises(FrameError):
        integrate_fundamental(np.eye(2), 16)
    sol = integrate_fundamental(path, 16)
    with pytest.raises(ValueError):
        sol(1.5)


def test_frames_at_nodes_matches_pointwise():
    path = CoefficientPath.constant(np.eye(2), (0.0, 1.0))
    sol = integrate_fundamental(path, 8)
    seed = np.array([[1.0], [2.0]])
    frames = sol.frames_at_nodes(seed)
    assert frames.shape == (9, 2, 1)
    np.testing.assert_allclose(frames[3], sol.samples[3] @ seed, atol=1e-14)


def test_coefficient_path_constructors():
    C0, C1 = np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]])
    poly = CoefficientPath.from_polynomial([C0, C1], (0.0, 2.0))
    np.testing.assert_allclose(poly(1.5), C0 + 1.5 * C1, atol=1e-14)
    ts = np.linspace(0.0, 2.0, 5)
    sampled = CoefficientPath.from_samples(ts, [C0 + t * C1 for t in ts])
    np.testing.assert_allclose(sampled(1.25), C0 + 1.25 * C1, atol=1e-12)


def test_morse_sturm_first_order_form():
    # With P = Id and Q = 0 the Hamiltonian coefficient is diag(Id, -R).
    R = np.array([[2.0, 1.0], [1.0, -1.0]])
    ms = MorseSturmSystem(P=np.eye(2), Q=np.zeros((2, 2)), R=R, T=1.0)
    B = morse_sturm_to_hamiltonian(ms)(0.7)
    np.testing.assert_allclose(B[:2, :2], np.eye(2), atol=1e-14)
    np.testing.assert_allclose(B[2:, 2:], -R, atol=1e-14)
    np.testing.assert_allclose(B[:2, 2:], 0.0, atol=1e-14)


def test_morse_sturm_validation():
    with pytest.raises(FrameError):
        MorseSturmSystem(P=np.array([[1.0, 2.0], [0.0, 1.0]]), Q=0 * np.eye(2),
                         R=np.eye(2), T=1.0)
    with pytest.raises(FrameError):
        MorseSturmSystem(P=-np.eye(2), Q=0 * np.eye(2), R=np.eye(2), T=1.0)
    with pytest.raises(FrameError):
        MorseSturmSystem(P=np.eye(2), Q=0 * np.eye(2), R=np.eye(2), T=-1.0)


def test_boundary_lagrangians_live_in_double_space():
    for n in (1, 2):
        dsp = double_space(standard_space(n))
        for bc in (BoundaryCondition.dirichlet(n), BoundaryCondition.neumann(n),
                   BoundaryCondition.periodic(n)):
            L = boundary_lagrangian(bc)
            assert L.shape == (4 * n, 2 * n)
            assert is_lagrangian(dsp, L).ok


def test_c_of_Z_values():
    assert c_of_Z(BoundaryCondition.dirichlet(3)) == 3
    assert c_of_Z(BoundaryCondition.neumann(3)) == 0
    assert c_of_Z(BoundaryCondition.periodic(2)) == 2
    sep = BoundaryCondition.separated(2, np.eye(2)[:, :1], np.zeros((2, 0)))
    assert c_of_Z(sep) == 1
    gen = BoundaryCondition.general(1, np.eye(2))
    with pytest.raises(UnsupportedBoundaryError):
        c_of_Z(gen)


# ---------------------------------------------------------------------------
# Morse index oracles
# ---------------------------------------------------------------------------


def test_morse_index_exact_scalar_cases():
    # -u'' - u: Dirichlet eigenvalues (k pi / T)^2 - 1, k >= 1.
    ms = MorseSturmSystem(P=np.eye(1), Q=np.zeros((1, 1)), R=-np.eye(1), T=3.5 * np.pi)
    assert discrete_morse_index(ms, BoundaryCondition.dirichlet(1)) == 3
    # Neumann adds the k = 0 constant mode.
    assert discrete_morse_index(ms, BoundaryCondition.neumann(1)) == 4
    # Periodic modes e^{2 pi i k t / T}: k = 0 and the k = +-1 pair.
    assert discrete_morse_index(ms, BoundaryCondition.periodic(1)) == 3


def test_morse_index_positive_system_is_zero():
    ms = MorseSturmSystem(P=2 * np.eye(2), Q=np.zeros((2, 2)), R=np.eye(2), T=4.0)
    assert discrete_morse_index(ms, BoundaryCondition.dirichlet(2)) == 0


def fd_dirichlet_negatives(p, r_fun, T, M):
    """Independent oracle: second-order central differences for -(p u')' + r u."""
    h = T / M
    ts = np.linspace(0.0, T, M + 1)[1:-1]
    diag = 2.0 * p / h**2 + np.array([r_fun(t) for t in ts])
    off = np.full(M - 2, -p / h**2)
    w = scipy.linalg.eigvalsh_tridiagonal(diag, off)
    assert np.min(np.abs(w)) > 1e-4, "oracle instance too close to degenerate"
    return int(np.sum(w < 0.0))


def test_morse_index_against_finite_differences():
    p = 1.55
    r = lambda t: -2.0 + 0.5 * np.sin(t)
    T = 6.0
    counts = {fd_dirichlet_negatives(p, r, T, M) for M in (1500, 3000)}
    assert len(counts) == 1, "finite-difference oracle did not stabilize"
    ms = MorseSturmSystem(P=p * np.eye(1), Q=np.zeros((1, 1)),
                          R=lambda t: np.array([[r(t)]]), T=T)
    assert discrete_morse_index(ms, BoundaryCondition.dirichlet(1)) == counts.pop()


def test_morse_index_with_cross_term():
    # For constant scalar Q the cross term in the index form is q (u^2)',
    # a pure boundary term that vanishes under Dirichlet conditions, so the
    # index must agree with the Q = 0 oracle.
    p, q = 1.3, 0.8
    r = lambda t: -1.7 + 0.3 * np.cos(2.0 * t)
    T = 5.0
    ms = MorseSturmSystem(P=p * np.eye(1), Q=q * np.eye(1),
                          R=lambda t: np.array([[r(t)]]), T=T)
    expect = fd_dirichlet_negatives(p, r, T, 2400)
    assert discrete_morse_index(ms, BoundaryCondition.dirichlet(1)) == expect
