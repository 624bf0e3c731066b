"""Dense linear-algebra kernels.

Everything here works on small to moderate dense matrices. Sylvester
equations always have a diagonal coefficient on the right, so they are
solved column by column as shifted linear systems. Lyapunov equations use
a cached real Schur form (Bartels-Stewart via LAPACK ``trsyl``).
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .exceptions import (
    DivergentSeries,
    EigenFailure,
    InputError,
    SingularShift,
    SingularSystem,
)

SERIES_TOL = 1e-12
RESIDUAL_TOL = 1e-10
MAX_TERMS = 200
DENSE_LIMIT = 4000
POWER_STEPS = 20
AUTO_CONTRACTION = 0.9

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class EigenDecomposition:
    """``A = vectors @ diag(values) @ inverse_vectors``, values sorted."""

    values: np.ndarray
    vectors: np.ndarray
    inverse_vectors: np.ndarray

    def reconstruct(self):
        return (self.vectors * self.values) @ self.inverse_vectors


def eigen_order(values):
    """Indices sorting ``values`` by real part, then imaginary part."""
    values = np.asarray(values)
    return np.lexsort((values.imag, values.real))


def sort_eigenvalues(values):
    values = np.asarray(values, dtype=complex)
    return values[eigen_order(values)]


def eig_sorted(A):
    """Eigendecomposition with lexicographically sorted eigenvalues.

    Raises
    ------
    EigenFailure
        If LAPACK fails or the eigenvector matrix is numerically singular
        (defective input).
    """
    A = np.asarray(A)
    try:
        values, vectors = sla.eig(A)
    except (sla.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    order = eigen_order(values)
    values = values[order]
    vectors = vectors[:, order]
    lu, piv = _lu(vectors)
    if _rcond(lu, vectors) < 1e3 * _EPS:
        raise EigenFailure("eigenvector matrix is singular (defective matrix)")
    inverse = sla.lu_solve((lu, piv), np.eye(len(values)), check_finite=False)
    return EigenDecomposition(values, vectors, inverse)


def spectral_abscissa(A):
    """Largest real part of the eigenvalues of ``A``."""
    A = np.asarray(A)
    if A.size == 0:
        return -np.inf
    try:
        values = sla.eigvals(A)
    except (sla.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    return float(np.max(values.real))


def _lu(M):
    # Singularity is judged by the condition estimate, not scipy's warning.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        return sla.lu_factor(M, check_finite=False)


def _rcond(lu, matrix):
    gecon, = lapack.get_lapack_funcs(("gecon",), (lu,))
    anorm = np.linalg.norm(matrix, 1)
    if anorm == 0.0:
        return 0.0
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0:
        return 0.0
    return float(rcond)


def as_shifts(Lambda):
    """Accept either a vector of diagonal entries or a diagonal matrix."""
    Lambda = np.asarray(Lambda)
    if Lambda.ndim == 0:
        return Lambda.reshape(1).astype(complex)
    if Lambda.ndim == 2:
        if Lambda.shape[0] != Lambda.shape[1]:
            raise InputError("Lambda must be square")
        off = Lambda - np.diag(np.diag(Lambda))
        if np.any(off != 0):
            raise InputError("Lambda must be diagonal")
        Lambda = np.diag(Lambda)
    return Lambda.astype(complex)


def _collapse(shift):
    # Keep real arithmetic when the shift is real.
    return shift.real if shift.imag == 0 else shift


class ShiftedSolver:
    """LU factorizations of ``s_j I - A`` for a fixed set of shifts.

    ``solve(R)`` returns ``X`` with ``X diag(s) - A X = R``. With
    ``transpose=True`` it solves ``X diag(s) - A^T X = R`` from the same
    factors.
    """

    def __init__(self, A, shifts):
        A = np.asarray(A)
        self.A = A
        self.shifts = as_shifts(shifts)
        n = A.shape[0]
        eye = np.eye(n)
        self._factors = []
        for j, s in enumerate(self.shifts):
            M = _collapse(s) * eye - A
            lu, piv = _lu(M)
            if _rcond(lu, M) < n * _EPS:
                raise SingularShift(
                    f"shift {s} (column {j}) is numerically an eigenvalue of A"
                )
            self._factors.append((lu, piv))

    def solve_block(self, j, rhs, transpose=False):
        """Solve ``(s_j I - A) X = rhs`` for a block of right-hand sides."""
        return sla.lu_solve(self._factors[j], np.asarray(rhs),
                            trans=1 if transpose else 0, check_finite=False)

    def solve(self, rhs, transpose=False):
        rhs = np.asarray(rhs)
        if rhs.ndim == 1:
            rhs = rhs[:, None]
        if rhs.shape != (self.A.shape[0], len(self.shifts)):
            raise InputError(
                f"rhs shape {rhs.shape} does not match "
                f"({self.A.shape[0]}, {len(self.shifts)})"
            )
        trans = 1 if transpose else 0
        dtype = np.result_type(rhs.dtype, self.A.dtype, *(f[0].dtype for f in self._factors))
        out = np.empty(rhs.shape, dtype=dtype)
        for j, factor in enumerate(self._factors):
            out[:, j] = sla.lu_solve(factor, rhs[:, j], trans=trans, check_finite=False)
        return out


def solve_sylvester(A, Lambda, rhs):
    """Solve ``X Lambda - A X = rhs`` for diagonal ``Lambda``.

    Column ``j`` satisfies ``(lambda_j I - A) x_j = rhs_j``.

    Raises
    ------
    SingularShift
        If some ``lambda_j`` is numerically an eigenvalue of ``A``.
    """
    return ShiftedSolver(A, Lambda).solve(rhs)


def sylvester_residual(A, Lambda, rhs, X, N_list=(), Nhat_list=()):
    """Frobenius norm of ``X Lambda - A X - sum N_k X Nhat_k^T - rhs``."""
    shifts = as_shifts(Lambda)
    R = X * shifts[None, :] - A @ X - rhs
    for N, Nhat in zip(N_list, Nhat_list):
        R = R - N @ X @ np.asarray(Nhat).T
    return float(np.linalg.norm(R))


class BilinearSylvester:
    """The operator ``X -> X diag(s) - A X - sum_k N_k X Nhat_k^T``.

    Factorizations (shifted LUs, the dense Kronecker LU) are built lazily
    and reused across solves, including solves with the transposed
    equation ``X diag(s) - A^T X - sum_k N_k^T X Nhat_k = R``.
    """

    def __init__(self, A, shifts, N_list, Nhat_list):
        self.A = np.asarray(A)
        self.shifts = as_shifts(shifts)
        self.N_list = [np.asarray(N) for N in N_list]
        self.Nhat_list = [np.asarray(N) for N in Nhat_list]
        if len(self.N_list) != len(self.Nhat_list):
            raise InputError("N_list and Nhat_list differ in length")
        n, r = self.A.shape[0], len(self.shifts)
        for N, Nhat in zip(self.N_list, self.Nhat_list):
            if N.shape != (n, n) or Nhat.shape != (r, r):
                raise InputError("coupling matrices have inconsistent shapes")
        self.n, self.r = n, r
        self.linear = all(
            not np.any(N) or not np.any(Nh) for N, Nh in zip(self.N_list, self.Nhat_list)
        )
        self._shifted = None
        self._dense = None
        self._contraction = None

    @property
    def shifted(self):
        if self._shifted is None:
            self._shifted = ShiftedSolver(self.A, self.shifts)
        return self._shifted

    def coupling(self, X, transpose=False):
        """``sum_k N_k X Nhat_k^T`` (or its transposed-equation analogue)."""
        out = np.zeros((self.n, self.r), dtype=np.result_type(X, *self.N_list, *self.Nhat_list))
        for N, Nhat in zip(self.N_list, self.Nhat_list):
            if transpose:
                out += N.T @ X @ Nhat
            else:
                out += N @ X @ Nhat.T
        return out

    def apply(self, X, transpose=False):
        A = self.A.T if transpose else self.A
        return X * self.shifts[None, :] - A @ X - self.coupling(X, transpose)

    def series(self, rhs, n_terms, transpose=False):
        """First ``n_terms`` terms ``X_1, X_2, ...`` of the Neumann series."""
        terms = [self.shifted.solve(rhs, transpose)]
        for _ in range(n_terms - 1):
            terms.append(self.shifted.solve(self.coupling(terms[-1], transpose), transpose))
        return terms

    def contraction(self, steps=POWER_STEPS):
        """Power-iteration estimate of the spectral radius of the series map."""
        if self._contraction is not None:
            return self._contraction
        if self.linear:
            self._contraction = 0.0
            return 0.0
        rng = np.random.default_rng(0)
        X = rng.standard_normal((self.n, self.r)) + 1j * rng.standard_normal((self.n, self.r))
        X /= np.linalg.norm(X)
        logs = []
        for _ in range(steps):
            Y = self.shifted.solve(self.coupling(X))
            size = np.linalg.norm(Y)
            if size == 0.0 or not np.isfinite(size):
                logs.append(-np.inf if size == 0.0 else np.inf)
                break
            logs.append(np.log(size))
            X = Y / size
        tail = logs[len(logs) // 2:]
        self._contraction = float(np.exp(np.mean(tail))) if tail else 0.0
        return self._contraction

    def _dense_factor(self):
        if self._dense is None:
            n, r = self.n, self.r
            if n * r > DENSE_LIMIT:
                raise InputError(
                    f"dense mode needs n*r <= {DENSE_LIMIT}, got {n * r}"
                )
            K = np.kron(np.diag(self.shifts), np.eye(n)) - np.kron(np.eye(r), self.A)
            for N, Nhat in zip(self.N_list, self.Nhat_list):
                K = K - np.kron(Nhat, N)
            lu, piv = _lu(K)
            if _rcond(lu, K) < n * r * _EPS:
                raise SingularSystem("vectorized bilinear Sylvester operator is singular")
            self._dense = (lu, piv)
        return self._dense

    def solve_direct(self, rhs, transpose=False):
        factor = self._dense_factor()
        x = sla.lu_solve(factor, np.asarray(rhs).reshape(-1, order="F"),
                         trans=1 if transpose else 0, check_finite=False)
        return x.reshape((self.n, self.r), order="F")

    def solve_iterative(self, rhs, transpose=False, series_tol=SERIES_TOL, max_terms=MAX_TERMS):
        rho = self.contraction()
        if rho >= 1.0:
            raise DivergentSeries(f"series contraction estimate {rho:.3g} >= 1")
        term = self.shifted.solve(rhs, transpose)
        total = term.copy()
        for _ in range(max_terms - 1):
            term = self.shifted.solve(self.coupling(term, transpose), transpose)
            total += term
            if np.linalg.norm(term) <= series_tol * np.linalg.norm(total):
                return total
        raise DivergentSeries(f"series did not converge within {max_terms} terms")

    def solve(self, rhs, mode="auto", transpose=False, series_tol=SERIES_TOL, max_terms=MAX_TERMS):
        rhs = np.asarray(rhs)
        if rhs.ndim == 1:
            rhs = rhs[:, None]
        if self.linear:
            return self.shifted.solve(rhs, transpose)
        if mode == "auto":
            if self.contraction() < AUTO_CONTRACTION:
                try:
                    return self.solve_iterative(rhs, transpose, series_tol, max_terms)
                except DivergentSeries:
                    # the power-iteration estimate was optimistic
                    if self.n * self.r > DENSE_LIMIT:
                        raise
                    return self.solve_direct(rhs, transpose)
            if self.n * self.r <= DENSE_LIMIT:
                mode = "direct"
            else:
                raise DivergentSeries(
                    f"contraction estimate {self.contraction():.3g} too large for the "
                    f"series and n*r={self.n * self.r} exceeds the dense limit"
                )
        if mode == "direct":
            return self.solve_direct(rhs, transpose)
        if mode == "iterative":
            return self.solve_iterative(rhs, transpose, series_tol, max_terms)
        raise InputError(f"unknown Sylvester mode {mode!r}")


def solve_generalized_sylvester(A, Lambda, N_list, Nhat_list, rhs, mode="auto",
                                series_tol=SERIES_TOL, max_terms=MAX_TERMS):
    """Solve ``X Lambda - A X - sum_k N_k X Nhat_k^T = rhs``.

    Parameters
    ----------
    A : (n, n) array
    Lambda : (r,) array or (r, r) diagonal array
    N_list, Nhat_list : sequences of (n, n) and (r, r) arrays
    rhs : (n, r) array
    mode : {'auto', 'direct', 'iterative'}
        ``direct`` solves the (nr x nr) Kronecker system. ``iterative`` sums
        the Neumann series of shifted solves and requires the estimated
        contraction factor to be below one. ``auto`` picks iterative when
        that estimate is below 0.9.

    Raises
    ------
    DivergentSeries
        Iterative mode with a non-contractive series.
    SingularSystem
        Direct mode with a singular Kronecker operator.
    """
    op = BilinearSylvester(A, Lambda, N_list, Nhat_list)
    return op.solve(rhs, mode=mode, series_tol=series_tol, max_terms=max_terms)


class LyapunovSolver:
    """Solve ``A X + X A^T + Q = 0`` repeatedly for a fixed real ``A``."""

    def __init__(self, A):
        A = np.asarray(A, dtype=float)
        self.T, self.Z = sla.schur(A, output="real")
        self._trsyl, = lapack.get_lapack_funcs(("trsyl",), (self.T,))

    def solve(self, Q):
        F = -(self.Z.T @ Q @ self.Z)
        Y, scale, info = self._trsyl(self.T, self.T, F, tranb="T")
        if info < 0:
            raise SingularSystem(f"trsyl failed with info={info}")
        if info == 1:
            raise SingularSystem("Lyapunov operator is singular (A and -A share eigenvalues)")
        X = self.Z @ (Y / scale) @ self.Z.T
        return 0.5 * (X + X.T)
