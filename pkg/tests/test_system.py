import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from bilimor import (
    BilinearSystem,
    ProjectionPair,
    eval_kernel,
    eval_transfer_function,
    pole_residue_reconstruct,
    reduce_by_projection,
    residues,
    scale_system,
    spectral_form,
)
from bilimor.exceptions import InputError, RankDeficient, RepeatedEigenvalues
from helpers import random_siso, random_stable, scalar_system


class TestBilinearSystem:
    def test_dimensions_and_shapes(self):
        sys = BilinearSystem(np.zeros((3, 3)), [np.eye(3), np.eye(3)], np.ones((3, 2)), np.ones((4, 3)))
        assert sys.dims == (3, 2, 4)
        assert not sys.is_siso

    def test_vector_b_and_c_are_promoted(self):
        sys = BilinearSystem(-np.eye(2), np.eye(2), [1.0, 2.0], [3.0, 4.0])
        assert sys.B.shape == (2, 1) and sys.C.shape == (1, 2)
        assert sys.m == 1
        np.testing.assert_array_equal(sys.b, [1.0, 2.0])

    def test_inconsistent_shapes(self):
        with pytest.raises(InputError):
            BilinearSystem(-np.eye(2), [np.eye(2)], np.ones((3, 1)), np.ones((1, 2)))
        with pytest.raises(InputError):
            BilinearSystem(-np.eye(2), [np.eye(2), np.eye(2)], np.ones((2, 1)), np.ones((1, 2)))

    def test_rejects_nonfinite(self):
        with pytest.raises(InputError):
            BilinearSystem([[np.nan]], [[[0.0]]], [[1.0]], [[1.0]])

    def test_arrays_are_read_only(self):
        sys = scalar_system()
        with pytest.raises(ValueError):
            sys.A[0, 0] = 1.0

    def test_input_not_aliased(self):
        A = -np.eye(2)
        sys = BilinearSystem(A, [np.eye(2)], np.ones(2), np.ones(2))
        A[0, 0] = 5.0
        assert sys.A[0, 0] == -1.0

    def test_equality_and_copy_with(self):
        sys = scalar_system()
        assert sys == scalar_system()
        assert sys.copy_with(C=[[0.9]]) == scalar_system(0.9)
        assert sys != scalar_system(0.9)


class TestProjection:
    def test_identity_projection(self):
        sys = random_siso(np.random.default_rng(0), 4)
        red = reduce_by_projection(sys, ProjectionPair(np.eye(4), np.eye(4)))
        np.testing.assert_allclose(red.A, sys.A, atol=1e-15)
        np.testing.assert_allclose(red.N[0], sys.N[0], atol=1e-15)
        np.testing.assert_allclose(red.B, sys.B, atol=1e-15)
        np.testing.assert_allclose(red.C, sys.C, atol=1e-15)

    def test_coordinate_selection(self):
        sys = BilinearSystem(np.diag([-1.0, -2.0]), [[[0.3, 0.1], [0.2, 0.4]]], [5.0, 6.0], [7.0, 8.0])
        e1 = np.array([[1.0], [0.0]])
        red = reduce_by_projection(sys, ProjectionPair(e1, e1))
        assert (red.A[0, 0], red.N[0][0, 0], red.B[0, 0], red.C[0, 0]) == (-1.0, 0.3, 5.0, 7.0)

    def test_random_against_explicit_formula(self):
        rng = np.random.default_rng(1)
        sys = random_siso(rng, 6)
        V, W = rng.standard_normal((6, 2)), rng.standard_normal((6, 2))
        red = reduce_by_projection(sys, ProjectionPair(V, W))
        M = np.linalg.inv(W.T @ V)
        np.testing.assert_allclose(red.A, M @ W.T @ sys.A @ V, rtol=1e-10)
        np.testing.assert_allclose(red.N[0], M @ W.T @ sys.N[0] @ V, rtol=1e-10)
        np.testing.assert_allclose(red.B, M @ W.T @ sys.B, rtol=1e-10)
        np.testing.assert_allclose(red.C, sys.C @ V, rtol=1e-10)

    def test_singular_projection(self):
        sys = random_siso(np.random.default_rng(2), 4)
        V = np.zeros((4, 2))
        V[0, 0] = V[1, 1] = 1.0
        W = np.zeros((4, 2))
        W[2, 0] = W[3, 1] = 1.0
        with pytest.raises(RankDeficient):
            reduce_by_projection(sys, ProjectionPair(V, W))

    def test_invariant_subspace_reproduces_transfer_functions(self):
        # block upper-triangular: span(e_1, e_2, e_3) is invariant under A and N
        rng = np.random.default_rng(3)
        core = random_siso(rng, 3)
        A = np.zeros((5, 5))
        A[:3, :3] = core.A
        A[3:, 3:] = random_stable(rng, 2)
        A[:3, 3:] = rng.standard_normal((3, 2))
        N = np.zeros((5, 5))
        N[:3, :3] = core.N[0]
        N[:, 3:] = rng.standard_normal((5, 2))
        b = np.concatenate([core.b, [0.0, 0.0]])
        c = np.concatenate([core.c, rng.standard_normal(2)])
        sys = BilinearSystem(A, [N], b, c)
        V = np.eye(5)[:, :3]
        W = rng.standard_normal((5, 3))
        red = reduce_by_projection(sys, ProjectionPair(V, W))
        for s in ([0.3 + 1j], [1.0, 2.0 - 0.5j]):
            np.testing.assert_allclose(eval_transfer_function(red, s), eval_transfer_function(sys, s), rtol=1e-10)


class TestTransferFunctions:
    def test_scalar_values(self):
        sys = scalar_system()
        assert eval_transfer_function(sys, [0.0])[0, 0] == pytest.approx(0.5)
        assert eval_transfer_function(sys, [0.0, 0.0])[0, 0] == pytest.approx(0.125)

    def test_linear_system_has_no_higher_kernels(self):
        sys = BilinearSystem(random_stable(np.random.default_rng(0), 3), np.zeros((3, 3)), np.ones(3), np.ones(3))
        np.testing.assert_array_equal(eval_transfer_function(sys, [1.0, 2.0]), 0.0)

    def test_mimo_shape(self):
        sys = BilinearSystem(-np.eye(3), [np.eye(3), 2 * np.eye(3)], np.ones((3, 2)), np.ones((4, 3)))
        assert eval_transfer_function(sys, [1.0, 1.0, 1.0]).shape == (4, 8)
        assert eval_kernel(sys, [0.1, 0.2]).shape == (4, 4)

    def test_scalar_kernel_values(self):
        sys = scalar_system()
        assert eval_kernel(sys, [0.0])[0, 0] == pytest.approx(1.0)
        assert eval_kernel(sys, [1.0])[0, 0] == pytest.approx(np.exp(-2.0))
        assert eval_kernel(sys, [1.0, 1.0])[0, 0] == pytest.approx(0.5 * np.exp(-4.0))
        assert eval_kernel(sys, [1.0, 1.0])[0, 0] == pytest.approx(0.009158, abs=1e-6)

    def test_kernel_rejects_negative_time(self):
        with pytest.raises(InputError):
            eval_kernel(scalar_system(), [-1.0])

    def test_laplace_transform_of_kernel_scalar(self):
        sys = scalar_system()
        s1, s2 = 0.7, 1.3
        h1 = lambda t: eval_kernel(sys, [t])[0, 0] * np.exp(-s1 * t)
        value, _ = integrate.quad(h1, 0, 40)
        assert value == pytest.approx(eval_transfer_function(sys, [s1])[0, 0].real, abs=1e-4)
        h2 = lambda t2, t1: eval_kernel(sys, [t1, t2])[0, 0] * np.exp(-s1 * t1 - s2 * t2)
        value, _ = integrate.dblquad(h2, 0, 20, 0, 20, epsabs=1e-9)
        assert value == pytest.approx(eval_transfer_function(sys, [s1, s2])[0, 0].real, abs=1e-4)

    def test_laplace_transform_argument_order(self):
        # a non-symmetric two-state kernel fixes which time pairs with which frequency
        sys = BilinearSystem(np.diag([-1.0, -3.0]), [[[0.0, 0.0], [1.0, 0.0]]], [1.0, 0.0], [0.0, 1.0])
        s1, s2 = 0.5, 2.0
        h2 = lambda t2, t1: eval_kernel(sys, [t1, t2])[0, 0] * np.exp(-s1 * t1 - s2 * t2)
        value, _ = integrate.dblquad(h2, 0, 25, 0, 25, epsabs=1e-10)
        assert value == pytest.approx(1.0 / ((s1 + 1) * (s2 + 3)), abs=1e-4)
        assert eval_transfer_function(sys, [s1, s2])[0, 0].real == pytest.approx(1.0 / ((s1 + 1) * (s2 + 3)))


class TestResidues:
    def test_scalar_second_order(self):
        phi = residues(scalar_system(), 2)
        assert phi.entries.shape == (1, 1)
        assert phi.entries[0, 0] == pytest.approx(0.5)

    def test_first_order_matches_limit_definition(self):
        rng = np.random.default_rng(4)
        sys = random_siso(rng, 3)
        tensor = residues(sys, 1)
        for lam, phi in zip(tensor.poles, tensor.entries):
            eps = 1e-7 * (1 + abs(lam))
            limit = eps * eval_transfer_function(sys, [lam + eps])[0, 0]
            assert phi == pytest.approx(limit, rel=1e-5)

    def test_second_order_matches_nested_limit(self):
        rng = np.random.default_rng(5)
        sys = random_siso(rng, 3)
        tensor = residues(sys, 2)
        lam = tensor.poles
        for i in range(3):
            for j in range(3):
                e1, e2 = 1e-6 * (1 + abs(lam[i])), 1e-6 * (1 + abs(lam[j]))
                limit = e1 * e2 * eval_transfer_function(sys, [lam[i] + e1, lam[j] + e2])[0, 0]
                assert tensor.entries[i, j] == pytest.approx(limit, rel=1e-4, abs=1e-8)

    def test_linear_system_has_zero_second_order_residues(self):
        sys = BilinearSystem(np.diag([-1.0, -2.0]), np.zeros((2, 2)), [1.0, 1.0], [1.0, 1.0])
        np.testing.assert_array_equal(residues(sys, 2).entries, 0.0)

    def test_rank_structure(self):
        rng = np.random.default_rng(6)
        sys = random_siso(rng, 4)
        form = spectral_form(sys)
        phi = residues(sys, 3).entries
        b, c, N = form.Bhat[:, 0], form.Chat[0], form.Nhat[0]
        for idx in np.ndindex(4, 4, 4):
            l1, l2, l3 = idx
            expected = c[l3] * N[l3, l2] * N[l2, l1] * b[l1]
            assert phi[idx] == pytest.approx(expected, rel=1e-12, abs=1e-14)

    def test_repeated_eigenvalues(self):
        sys = BilinearSystem(-np.eye(2), np.zeros((2, 2)), [1.0, 1.0], [1.0, 1.0])
        with pytest.raises(RepeatedEigenvalues):
            residues(sys, 1)


class TestPoleResidue:
    def test_scalar_matches_direct(self):
        assert pole_residue_reconstruct(scalar_system(), [0.0, 0.0]) == pytest.approx(0.125)

    def test_two_pole_partial_fractions(self):
        sys = BilinearSystem(np.diag([-1.0, -2.0]), np.zeros((2, 2)), [1.0, 1.0], [1.0, 1.0])
        s = 0.3 + 0.4j
        assert pole_residue_reconstruct(sys, [s]) == pytest.approx(1 / (s + 1) + 1 / (s + 2), rel=1e-13)

    def test_random_third_order(self):
        rng = np.random.default_rng(7)
        sys = random_siso(rng, 4)
        s = rng.uniform(-0.5, 1, 3) + 1j * rng.uniform(-2, 2, 3)
        direct = eval_transfer_function(sys, s)[0, 0]
        assert abs(pole_residue_reconstruct(sys, s) - direct) <= 1e-9 * abs(direct)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 2**32 - 1))
    def test_reconstruction_property(self, n, k, seed):
        rng = np.random.default_rng(seed)
        sys = random_siso(rng, n)
        s = rng.uniform(0.0, 2.0, k) + 1j * rng.uniform(-3, 3, k)
        direct = eval_transfer_function(sys, s)[0, 0]
        assert abs(pole_residue_reconstruct(sys, s) - direct) <= 1e-8 * max(abs(direct), 1e-300) + 1e-14


class TestScaling:
    def test_gamma_one_is_identity(self):
        sys = random_siso(np.random.default_rng(0), 3)
        assert scale_system(sys, 1.0) == sys

    def test_scalar_example(self):
        scaled = scale_system(scalar_system(), 0.4)
        assert scaled == BilinearSystem([[-2.0]], [[[0.2]]], [[0.4]], [[1.0]])

    def test_kernels_shrink_by_gamma_power(self):
        sys = random_siso(np.random.default_rng(1), 3)
        scaled = scale_system(sys, 0.3)
        for k in (1, 2, 3):
            s = [0.5] * k
            np.testing.assert_allclose(eval_transfer_function(scaled, s), 0.3**k * eval_transfer_function(sys, s))

    def test_rejects_nonpositive(self):
        with pytest.raises(InputError):
            scale_system(scalar_system(), 0.0)
