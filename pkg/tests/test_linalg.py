import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from bilimor.exceptions import DivergentSeries, EigenFailure, InputError, SingularShift
from bilimor.linalg import (
    BilinearSylvester,
    LyapunovSolver,
    eig_sorted,
    solve_generalized_sylvester,
    solve_sylvester,
    spectral_abscissa,
    sylvester_residual,
)
from helpers import random_stable


def test_sylvester_zero_shift_scalar():
    X = solve_sylvester([[-1.0]], [0.0], [[1.0]])
    assert X[0, 0] == pytest.approx(1.0)


def test_sylvester_diagonal_by_hand():
    X = solve_sylvester(np.diag([-1.0, -2.0]), [1.0], [[1.0], [1.0]])
    np.testing.assert_allclose(X[:, 0], [0.5, 1.0 / 3.0])


def test_sylvester_scalar_positive_shift():
    assert solve_sylvester([[-2.0]], [2.0], [[1.0]])[0, 0] == pytest.approx(0.25)


def test_sylvester_accepts_diagonal_matrix():
    A = np.diag([-1.0, -2.0])
    X1 = solve_sylvester(A, [1.0, 3.0], np.ones((2, 2)))
    X2 = solve_sylvester(A, np.diag([1.0, 3.0]), np.ones((2, 2)))
    np.testing.assert_array_equal(X1, X2)


def test_sylvester_rejects_nondiagonal_lambda():
    with pytest.raises(InputError):
        solve_sylvester(np.eye(2), [[1.0, 1.0], [0.0, 1.0]], np.ones((2, 2)))


def test_sylvester_singular_shift():
    with pytest.raises(SingularShift):
        solve_sylvester(np.diag([-1.0, -2.0]), [-1.0], np.ones((2, 1)))


def test_sylvester_conjugate_columns_stay_conjugate():
    rng = np.random.default_rng(3)
    A = random_stable(rng, 5)
    shifts = np.array([1.0 + 2.0j, 1.0 - 2.0j])
    col = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    X = solve_sylvester(A, shifts, np.column_stack([col, col.conj()]))
    np.testing.assert_allclose(X[:, 1], X[:, 0].conj(), atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_sylvester_residual_property(n, r, seed):
    rng = np.random.default_rng(seed)
    A = random_stable(rng, n)
    shifts = rng.uniform(0.1, 5.0, r) + 1j * rng.uniform(-3, 3, r)
    rhs = rng.standard_normal((n, r))
    X = solve_sylvester(A, shifts, rhs)
    scale = np.linalg.norm(A) * np.linalg.norm(X) + np.linalg.norm(rhs)
    assert sylvester_residual(A, shifts, rhs, X) <= 1e-10 * scale


def test_generalized_scalar_closed_form():
    X = solve_generalized_sylvester([[-2.0]], [2.0], [[[0.5]]], [[[0.25]]], [[1.0]], mode="direct")
    assert X[0, 0].real == pytest.approx(1.0 / (2 + 2 - 0.125), rel=1e-14)
    assert X[0, 0].real == pytest.approx(0.258064516, rel=1e-9)


def test_generalized_scalar_iterative_matches_closed_form():
    X = solve_generalized_sylvester([[-2.0]], [2.0], [[[0.5]]], [[[0.25]]], [[1.0]], mode="iterative")
    assert X[0, 0].real == pytest.approx(1.0 / 3.875, rel=1e-12)


def test_generalized_with_zero_coupling_is_plain_sylvester():
    rng = np.random.default_rng(0)
    A = random_stable(rng, 4)
    rhs = rng.standard_normal((4, 2))
    X0 = solve_sylvester(A, [1.0, 2.0], rhs)
    for mode in ("auto", "direct", "iterative"):
        X = solve_generalized_sylvester(A, [1.0, 2.0], [np.zeros((4, 4))], [np.zeros((2, 2))], rhs, mode=mode)
        np.testing.assert_array_equal(X, X0)


def _scaled_instance(rng, n, r, target):
    A = random_stable(rng, n)
    shifts = rng.uniform(0.5, 3.0, r)
    N = rng.standard_normal((n, n))
    Nhat = rng.standard_normal((r, r))
    rho = BilinearSylvester(A, shifts, [N], [Nhat]).contraction()
    N *= target / rho
    return A, shifts, N, Nhat


def test_generalized_backends_agree_at_contraction_03():
    rng = np.random.default_rng(11)
    A, shifts, N, Nhat = _scaled_instance(rng, 4, 2, 0.3)
    rhs = rng.standard_normal((4, 2))
    op = BilinearSylvester(A, shifts, [N], [Nhat])
    assert op.contraction() == pytest.approx(0.3, rel=0.05)
    Xd = op.solve(rhs, mode="direct")
    Xi = op.solve(rhs, mode="iterative")
    np.testing.assert_allclose(Xi, Xd, rtol=0, atol=1e-10 * np.linalg.norm(Xd))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(1, 3), st.floats(0.05, 0.85), st.integers(0, 2**32 - 1))
def test_generalized_backends_agree_property(n, r, target, seed):
    rng = np.random.default_rng(seed)
    A, shifts, N, Nhat = _scaled_instance(rng, n, r, target)
    rhs = rng.standard_normal((n, r))
    op = BilinearSylvester(A, shifts, [N], [Nhat])
    if op.contraction() >= 0.9:
        return
    Xd = op.solve(rhs, mode="direct")
    Xi = op.solve(rhs, mode="iterative")
    assert np.linalg.norm(Xi - Xd) <= 1e-8 * np.linalg.norm(Xd)
    assert sylvester_residual(A, shifts, rhs, Xd, [N], [Nhat]) <= 1e-10 * (1 + np.linalg.norm(A)) * np.linalg.norm(Xd)


def test_transposed_equation_residual():
    rng = np.random.default_rng(5)
    A, shifts, N, Nhat = _scaled_instance(rng, 5, 2, 0.4)
    rhs = rng.standard_normal((5, 2))
    op = BilinearSylvester(A, shifts, [N], [Nhat])
    for mode in ("direct", "iterative"):
        X = op.solve(rhs, mode=mode, transpose=True)
        R = X * shifts - A.T @ X - N.T @ X @ Nhat - rhs
        assert np.linalg.norm(R) < 1e-10


def test_iterative_refuses_divergent_series():
    rng = np.random.default_rng(2)
    A, shifts, N, Nhat = _scaled_instance(rng, 4, 2, 2.0)
    with pytest.raises(DivergentSeries):
        solve_generalized_sylvester(A, shifts, [N], [Nhat], np.ones((4, 2)), mode="iterative")
    # direct still works
    X = solve_generalized_sylvester(A, shifts, [N], [Nhat], np.ones((4, 2)), mode="direct")
    assert sylvester_residual(A, shifts, np.ones((4, 2)), X, [N], [Nhat]) < 1e-9


def test_contraction_matches_kronecker_spectral_radius():
    rng = np.random.default_rng(8)
    A, shifts, N, Nhat = _scaled_instance(rng, 5, 2, 0.5)
    n, r = 5, 2
    L = np.kron(np.diag(shifts), np.eye(n)) - np.kron(np.eye(r), A)
    rho = np.max(np.abs(np.linalg.eigvals(np.linalg.solve(L, np.kron(Nhat, N)))))
    # power iteration is an estimate; it only needs the right magnitude
    assert BilinearSylvester(A, shifts, [N], [Nhat]).contraction() == pytest.approx(rho, rel=0.25)


def test_spectral_abscissa_examples():
    assert spectral_abscissa(np.diag([-1.0, -3.0])) == -1.0
    assert spectral_abscissa([[0.0, 1.0], [-1.0, 0.0]]) == pytest.approx(0.0, abs=1e-15)
    # (s+1)(s+2)(s+0.5) = s^3 + 3.5 s^2 + 3.5 s + 1
    companion = np.array([[-3.5, -3.5, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert spectral_abscissa(companion) == pytest.approx(-0.5, abs=1e-12)


def test_eig_sorted_reconstructs_and_orders():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((6, 6))
    dec = eig_sorted(A)
    np.testing.assert_allclose(dec.reconstruct(), A, atol=1e-12)
    keys = list(zip(dec.values.real, dec.values.imag))
    assert keys == sorted(keys)
    assert np.allclose(np.sort_complex(dec.values), np.sort_complex(dec.values.conj()))


def test_eig_sorted_defective():
    with pytest.raises(EigenFailure):
        eig_sorted([[1.0, 1.0], [0.0, 1.0]])


def test_lyapunov_against_scipy():
    rng = np.random.default_rng(4)
    A = random_stable(rng, 7)
    Q = rng.standard_normal((7, 3))
    Q = Q @ Q.T
    X = LyapunovSolver(A).solve(Q)
    np.testing.assert_allclose(X, sla.solve_continuous_lyapunov(A, -Q), atol=1e-12)
