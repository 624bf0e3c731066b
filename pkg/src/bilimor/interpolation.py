"""Multipoint Volterra-series interpolation and optimality checks.

Given points ``sigma_j`` and a weight matrix ``U``, the trial basis ``V``
solves ``V diag(sigma) - A V - N V U^T = b 1^T``. Its columns are weighted
sums of resolvent chains, so ``c v_j`` equals

    nu_j = sum_k sum_{l_1..l_{k-1}} eta * H_k(sigma_{l_1}, ..., sigma_{l_{k-1}}, sigma_j),

with ``eta = U[j, l_{k-1}] U[l_{k-1}, l_{k-2}] ... U[l_2, l_1]``. The test
basis ``W`` plays the same role for ``(mu, S)``. A Petrov-Galerkin model
built from ``V`` and ``W`` matches all ``nu_j`` and their duals ``gamma_j``.

Indices are zero-based throughout.
"""

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .exceptions import InputError
from .linalg import BilinearSylvester, ShiftedSolver
from .system import (
    ProjectionPair,
    _require_siso,
    eval_transfer_function,
    residue_entries,
    spectral_form,
)

KRONECKER_LIMIT = 2000


@dataclass(frozen=True)
class InterpolationData:
    """Interpolation points and weights for both bases."""

    sigma: np.ndarray
    mu: np.ndarray
    U: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        sigma = np.atleast_1d(np.asarray(self.sigma))
        mu = np.atleast_1d(np.asarray(self.mu))
        U = np.atleast_2d(np.asarray(self.U))
        S = np.atleast_2d(np.asarray(self.S))
        r = len(sigma)
        if len(mu) != r or U.shape != (r, r) or S.shape != (r, r):
            raise InputError("sigma, mu, U and S must share the order r")
        for name, value in (("sigma", sigma), ("mu", mu), ("U", U), ("S", S)):
            object.__setattr__(self, name, value)

    @property
    def r(self):
        return len(self.sigma)


def weight(U, chain):
    """Weight of the index chain ``(l_1, ..., l_{k-1}, j)``.

    ``U[j, l_{k-1}] * U[l_{k-1}, l_{k-2}] * ... * U[l_2, l_1]``; a chain of
    length one has weight 1.
    """
    U = np.asarray(U)
    value = 1.0
    for prev, nxt in zip(chain[:-1], chain[1:]):
        value = value * U[nxt, prev]
    return value


def _basis(A, N, points, weights, rhs_vector, n_terms, mode):
    r = len(points)
    op = BilinearSylvester(A, points, [N], [weights])
    rhs = np.repeat(np.asarray(rhs_vector)[:, None], r, axis=1)
    if n_terms is None:
        return op.solve(rhs, mode=mode)
    return sum(op.series(rhs, n_terms))


def build_bases(sys, data, n_terms=None, mode="direct"):
    """Trial and test bases of Volterra-series interpolation.

    ``V`` solves ``V diag(sigma) - A V - N V U^T = b 1^T`` and ``W`` solves
    ``W diag(mu) - A^T W - N^T W S^T = c^T 1^T``. With ``n_terms`` given,
    both are the sums of the first ``n_terms`` Neumann-series terms
    instead of exact solutions.
    """
    _require_siso(sys)
    V = _basis(sys.A, sys.N[0], data.sigma, data.U, sys.b, n_terms, mode)
    W = _basis(sys.A.T, sys.N[0].T, data.mu, data.S, sys.c, n_terms, mode)
    return ProjectionPair(V, W)


def volterra_functional(sys, points, weights, j, n_terms=None, dual=False, mode="direct"):
    """Weighted Volterra sum ``nu_j`` (or ``gamma_j`` with ``dual=True``).

    ``nu_j = c v_j`` with ``v_j`` the j-th column of the trial basis for
    ``(points, weights)``. The dual is ``gamma_j = w_j^T b`` for the test
    basis, which sums ``H_k(mu_j, mu_{l_{k-1}}, ..., mu_{l_1})``.
    """
    _require_siso(sys)
    if dual:
        X = _basis(sys.A.T, sys.N[0].T, points, weights, sys.c, n_terms, mode)
        return complex(sys.b @ X[:, j])
    X = _basis(sys.A, sys.N[0], points, weights, sys.b, n_terms, mode)
    return complex(sys.c @ X[:, j])


def volterra_functional_enumerated(sys, points, weights, j, n_terms, dual=False):
    """Slow path of :func:`volterra_functional` enumerating every chain."""
    _require_siso(sys)
    r = len(points)
    total = 0.0
    for k in range(1, n_terms + 1):
        for head in product(range(r), repeat=k - 1):
            chain = head + (j,)
            eta = weight(weights, chain)
            if eta == 0:
                continue
            args = [points[i] for i in chain]
            if dual:
                args = args[::-1]
            total += eta * eval_transfer_function(sys, args)[0, 0]
    return complex(total)


@dataclass
class InterpolationReport:
    # interp_ prefix keeps these apart from the input scaling gamma
    interp_nu_residuals: np.ndarray
    interp_gamma_residuals: np.ndarray
    tol: float

    @property
    def max_residual(self):
        return float(max(np.max(self.interp_nu_residuals), np.max(self.interp_gamma_residuals)))

    @property
    def passed(self):
        return self.max_residual < self.tol


def verify_volterra_interpolation(full, reduced, data, n_terms=None, tol=1e-8):
    """Compare the weighted Volterra sums of two systems for every j."""
    interp_nu = []
    interp_gamma = []
    pair_full = build_bases(full, data, n_terms)
    pair_red = build_bases(reduced, data, n_terms)
    for j in range(data.r):
        interp_nu.append(abs(full.c @ pair_full.V[:, j] - reduced.c @ pair_red.V[:, j]))
        interp_gamma.append(abs(full.b @ pair_full.W[:, j] - reduced.b @ pair_red.W[:, j]))
    return InterpolationReport(np.array(interp_nu), np.array(interp_gamma), tol)


@dataclass
class ConditionReport:
    """Maximum absolute mismatch per family of optimality conditions."""

    residuals: dict
    tol: float
    details: dict = field(default_factory=dict)

    @property
    def max_residual(self):
        return float(max(self.residuals.values())) if self.residuals else 0.0

    @property
    def passed(self):
        return self.max_residual < self.tol


def _vec(M):
    return np.asarray(M).reshape(-1, order="F")


def _kron_sides(sys, form, lam):
    """Right/left vectors of the Kronecker expressions for one realization."""
    n, r = sys.n, len(lam)
    L = np.kron(np.diag(-lam), np.eye(n)) - np.kron(np.eye(r), sys.A)
    for Nk, Nhat in zip(sys.N, form.Nhat):
        L = L - np.kron(Nhat, Nk)
    right = np.linalg.solve(L, np.kron(form.Bhat, sys.B) @ _vec(np.eye(sys.m)))
    left_row = _vec(np.eye(sys.p)) @ np.kron(form.Chat, sys.C)
    left = np.linalg.solve(L.T, left_row)
    return right, left


def _kron_families(sys, form):
    """All four condition families evaluated on one realization."""
    lam = form.Lambda
    n, m, p, r = sys.n, sys.m, sys.p, len(lam)
    right, left = _kron_sides(sys, form, lam)
    eye_r = np.eye(r)
    vec_p = _vec(np.eye(sys.p))
    vec_m = _vec(np.eye(sys.m))
    c_family = np.empty((p, r), dtype=complex)
    for i in range(p):
        for j in range(r):
            e = np.zeros((p, 1))
            e[i] = 1.0
            c_family[i, j] = vec_p @ np.kron(e @ eye_r[j][None, :], sys.C) @ right
    b_family = np.empty((m, r), dtype=complex)
    for i in range(m):
        for j in range(r):
            e = np.zeros((1, m))
            e[0, i] = 1.0
            b_family[i, j] = left @ np.kron(eye_r[:, [j]] @ e, sys.B) @ vec_m
    lam_family = np.empty(r, dtype=complex)
    for i in range(r):
        lam_family[i] = left @ np.kron(np.outer(eye_r[i], eye_r[i]), np.eye(n)) @ right
    n_family = np.empty((m, r, r), dtype=complex)
    for k, Nk in enumerate(sys.N):
        for i in range(r):
            for j in range(r):
                n_family[k, i, j] = left @ np.kron(np.outer(eye_r[i], eye_r[j]), Nk) @ right
    return {"C": c_family, "B": b_family, "Lambda": lam_family, "N": n_family}


def check_wilson_kronecker_conditions(full, reduced, tol=1e-6):
    """First-order H2 optimality conditions in Kronecker form.

    Both sides use the spectral data ``(Lambda, Bhat, Chat, Nhat)`` of the
    reduced model and the operator
    ``L = -diag(Lambda) (x) I - I (x) A - sum_k Nhat_k (x) N_k``. The
    four families (output map, input map, eigenvalues, bilinear terms)
    compare the full-order realization against the reduced one.
    """
    if full.n * reduced.n > KRONECKER_LIMIT:
        raise InputError(
            f"n*r = {full.n * reduced.n} exceeds the Kronecker limit {KRONECKER_LIMIT}"
        )
    form = spectral_form(reduced)
    lhs = _kron_families(full, form)
    rhs = _kron_families(reduced, form)
    residuals = {name: float(np.max(np.abs(lhs[name] - rhs[name]))) for name in lhs}
    return ConditionReport(residuals, tol, {"full": lhs, "reduced": rhs})


def _series_bases(sys, form, n_terms):
    """Truncated Sylvester series ``V_1..V_N`` and ``W_1..W_N`` (SISO)."""
    lam = form.Lambda
    solver = ShiftedSolver(sys.A, -lam)
    N = sys.N[0]
    Nhat = form.Nhat[0]
    V = [solver.solve(np.outer(sys.b, form.Bhat[:, 0]))]
    W = [solver.solve(np.outer(sys.c, form.Chat[0]), transpose=True)]
    for _ in range(n_terms - 1):
        V.append(solver.solve(N @ V[-1] @ Nhat.T))
        W.append(solver.solve(N.T @ W[-1] @ Nhat, transpose=True))
    return V, W


def _interpolation_values(sys, form, n_terms):
    V, W = _series_bases(sys, form, n_terms)
    value = form.Chat[0] @ (sys.c @ sum(V))
    derivative = 0.0
    for a in range(1, n_terms + 1):
        for b in range(1, n_terms + 2 - a):
            derivative += np.sum(W[b - 1] * V[a - 1])
    return complex(value), complex(derivative)


def check_h2_interpolation_conditions(full, reduced, n_terms=10, tol=1e-6, cross_check=None):
    """Residuals of the two SISO interpolation-based optimality conditions.

    ``sum`` compares ``sum phi~ H_k(-lambda~...)`` of the two systems and
    ``derivative`` compares ``sum phi~ sum_i dH_k/ds_i(-lambda~...)``,
    both truncated at ``n_terms`` kernels. Residues ``phi~`` and poles
    ``lambda~`` come from ``reduced``. The sums are evaluated through the
    truncated Sylvester series (``chat (c V)^T`` and
    ``sum_j W(:, j)^T V(:, j)``); the derivative sum carries the sign of
    ``-sum phi~ sum dH``, identically on both sides.

    With ``cross_check`` (default: when ``r**3 <= 1000``), the derivative sums
    up to order ``min(3, n_terms)`` are also computed by central finite
    differences and the largest discrepancy is stored in ``details``.
    """
    _require_siso(full)
    _require_siso(reduced)
    form = spectral_form(reduced, simple_tol=1e-10)
    full_value, full_deriv = _interpolation_values(full, form, n_terms)
    red_value, red_deriv = _interpolation_values(reduced, form, n_terms)
    residuals = {"sum": abs(full_value - red_value), "derivative": abs(full_deriv - red_deriv)}
    details = {
        "sum": (full_value, red_value),
        "derivative": (full_deriv, red_deriv),
    }
    if cross_check is None:
        cross_check = reduced.n ** 3 <= 1000
    if cross_check:
        order = min(3, n_terms)
        worst = 0.0
        for sys in (full, reduced):
            _, exact = _interpolation_values(sys, form, order)
            fd = -weighted_derivative_sum_fd(sys, form, order)
            worst = max(worst, abs(exact - fd) / max(1.0, abs(exact)))
        details["fd_discrepancy"] = worst
    return ConditionReport(residuals, tol, details)


def weighted_transfer_sum(sys, form, n_terms):
    """``sum_k sum_l phi~_l H_k(-lambda~_{l_1}, ..., -lambda~_{l_k})`` by enumeration."""
    lam = form.Lambda
    r = len(lam)
    total = 0.0
    for k in range(1, n_terms + 1):
        phi = residue_entries(form, k)
        for chain in product(range(r), repeat=k):
            total += phi[chain] * eval_transfer_function(sys, [-lam[i] for i in chain])[0, 0]
    return complex(total)


def weighted_derivative_sum_fd(sys, form, n_terms, step=1e-6):
    """``sum phi~ sum_i dH_k/ds_i(-lambda~...)`` by central differences."""
    lam = form.Lambda
    r = len(lam)
    total = 0.0
    for k in range(1, n_terms + 1):
        phi = residue_entries(form, k)
        for chain in product(range(r), repeat=k):
            point = np.array([-lam[i] for i in chain])
            grad = 0.0
            for i in range(k):
                shift = np.zeros(k, dtype=complex)
                shift[i] = step
                plus = eval_transfer_function(sys, point + shift)[0, 0]
                minus = eval_transfer_function(sys, point - shift)[0, 0]
                grad += (plus - minus) / (2 * step)
            total += phi[chain] * grad
    return complex(total)


def truncated_condition_values(sys, form, n_terms):
    """``C S_N``, ``diag(U_N^T S_N)``, ``B^T U_N`` and ``U_N^T N_k S_N``.

    ``S_N = V_1 + ... + V_N`` with ``V_1 (-Lambda) - A V_1 = B Bhat^T`` and
    ``V_j (-Lambda) - A V_j = sum_k N_k V_{j-1} Nhat_k^T``; ``U_N`` is the
    analogous sum for ``A^T``, ``N_k^T``, ``C^T Chat`` and ``Nhat_k``.
    """
    lam = form.Lambda
    solver = ShiftedSolver(sys.A, -lam)
    V = solver.solve(sys.B @ form.Bhat.T)
    W = solver.solve(sys.C.T @ form.Chat, transpose=True)
    S, U = V.copy(), W.copy()
    for _ in range(n_terms - 1):
        V = solver.solve(sum(Nk @ V @ Nh.T for Nk, Nh in zip(sys.N, form.Nhat)))
        W = solver.solve(sum(Nk.T @ W @ Nh for Nk, Nh in zip(sys.N, form.Nhat)), transpose=True)
        S += V
        U += W
    return {
        "C": sys.C @ S,
        "UtS": np.sum(U * S, axis=0),
        "B": sys.B.T @ U,
        "N": np.array([U.T @ Nk @ S for Nk in sys.N]),
    }


def check_truncated_conditions(full, reduced, n_terms, tol=1e-6):
    """Residuals of the optimality conditions for the N-term truncation.

    Compares the four families of :func:`truncated_condition_values` for
    ``full`` and ``reduced`` with the spectral data of ``reduced``.
    """
    if n_terms < 1:
        raise InputError("truncation index must be >= 1")
    form = spectral_form(reduced)
    lhs = truncated_condition_values(full, form, n_terms)
    rhs = truncated_condition_values(reduced, form, n_terms)
    residuals = {name: float(np.max(np.abs(lhs[name] - rhs[name]))) for name in lhs}
    return ConditionReport(residuals, tol, {"full": lhs, "reduced": rhs})
