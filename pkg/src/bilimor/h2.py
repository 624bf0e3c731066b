"""H2 norms and errors of bilinear systems.

Two independent routes compute the full norm. The Gramian route sums
``trace(C P_k C^T)``, where

    A P_0 + P_0 A^T + B B^T = 0,
    A P_k + P_k A^T + sum_j N_j P_{k-1} N_j^T = 0.

The pole-residue route (SISO) sums ``phi * H_k(-lambda, ...)`` over all
residues of all orders. It uses a Hadamard recursion in the eigenbasis,
so order k costs O(n^2) instead of O(n^k).
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import Divergent, EigenFailure, InputError, UnstableSystem
from .linalg import LyapunovSolver, spectral_abscissa
from .system import BilinearSystem, _require_siso, scale_system, spectral_form

MAX_TERMS = 200
TAIL_TOL = 1e-13
GROWTH_LIMIT = 10


@dataclass(frozen=True)
class H2Result:
    """Outcome of an H2 series evaluation.

    ``value`` is the norm (square root of the accumulated sum). ``terms_used``
    counts Volterra kernels included. ``tail_estimate`` estimates the part
    of the squared norm left out, from the ratio of the last two increments.
    """

    value: float
    terms_used: int
    tail_estimate: float
    converged: bool
    route: str = "gramian"


def _require_stable(A):
    alpha = spectral_abscissa(A)
    if alpha >= 0:
        raise UnstableSystem(f"spectral abscissa {alpha:.3g} is not negative")


def _sum_series(increments, max_terms, tail_tol, route):
    """Accumulate nonnegative increments with the shared stopping rules."""
    total = 0.0
    previous = None
    growth = 0
    tail = np.inf
    for k, (inc, size, size_total) in enumerate(increments, start=1):
        total += inc
        if previous is not None and inc > previous:
            growth += 1
        else:
            growth = 0
        if previous is None or previous == 0.0:
            ratio = 0.0 if inc == 0.0 else np.inf
        else:
            ratio = inc / previous
        tail = inc * ratio / (1.0 - ratio) if ratio < 1.0 else np.inf
        partial = H2Result(float(np.sqrt(max(total, 0.0))), k, float(tail), False, route)
        if growth >= GROWTH_LIMIT:
            raise Divergent(
                f"series increments grew for {GROWTH_LIMIT} consecutive terms; "
                "the system is not an H2 system",
                partial,
            )
        small = size <= tail_tol * size_total and tail <= tail_tol * max(total, np.finfo(float).tiny)
        if small:
            return H2Result(partial.value, k, float(tail), True, route)
        if k >= max_terms:
            return partial
        previous = inc
    return H2Result(float(np.sqrt(max(total, 0.0))), 0, 0.0, True, route)


def _gramian_terms(sys):
    """Yield ``(trace increment, ||P_k||, ||sum P||)`` for k = 0, 1, ..."""
    lyap = LyapunovSolver(sys.A)
    P = lyap.solve(sys.B @ sys.B.T)
    total = P.copy()
    while True:
        yield float(np.trace(sys.C @ P @ sys.C.T)), np.linalg.norm(P), np.linalg.norm(total)
        Q = sum(Nk @ P @ Nk.T for Nk in sys.N)
        P = lyap.solve(Q)
        total += P
        if not np.all(np.isfinite(P)):
            raise Divergent("Gramian recursion overflowed")


def h2_norm_gramian(sys, max_terms=MAX_TERMS, tail_tol=TAIL_TOL):
    """H2 norm from the Lyapunov recursion of the Gramian series.

    Stops once the newest term and the estimated tail are below
    ``tail_tol`` relative to the accumulated sum. Returns
    ``converged=False`` if ``max_terms`` is reached first.

    Raises
    ------
    UnstableSystem
        If ``A`` is not Hurwitz.
    Divergent
        If the trace increments grow for 10 consecutive terms.
    """
    _require_real(sys)
    _require_stable(sys.A)
    return _sum_series(_gramian_terms(sys), max_terms, tail_tol, "gramian")


def truncated_h2_norm(sys, terms):
    """H2 norm of the system truncated to its first ``terms`` Volterra kernels."""
    _require_real(sys)
    if terms < 1:
        raise InputError("truncation index must be >= 1")
    _require_stable(sys.A)
    total = 0.0
    gen = _gramian_terms(sys)
    for _ in range(terms):
        total += next(gen)[0]
    return H2Result(float(np.sqrt(max(total, 0.0))), terms, 0.0, True, "truncated")


def _pole_residue_terms(form):
    lam = form.Lambda
    bhat = form.Bhat[:, 0]
    chat = form.Chat[0]
    Nhat = form.Nhat[0]
    cauchy = 1.0 / (lam[:, None] + lam[None, :])
    X = -np.outer(bhat, bhat) * cauchy
    total = X.copy()
    while True:
        value = chat @ X @ chat
        yield value, np.linalg.norm(X), np.linalg.norm(total)
        X = -(Nhat @ X @ Nhat.T) * cauchy
        total += X


def h2_norm_pole_residue(sys, max_order=MAX_TERMS, tail_tol=TAIL_TOL, simple_tol=1e-10):
    """H2 norm of a SISO system from its poles and residues.

    Sums ``phi[l_1..l_k] H_k(-lambda_{l_1}, ..., -lambda_{l_k})`` over all
    orders. Order k equals ``chat X_k chat^T`` with
    ``X_1 = -(bhat bhat^T) o K`` and ``X_k = -(Nhat X_{k-1} Nhat^T) o K``,
    where ``K[i, j] = 1 / (lambda_i + lambda_j)`` and ``o`` is the entrywise product.

    Raises
    ------
    RepeatedEigenvalues
        If ``A`` has (numerically) repeated eigenvalues.
    EigenFailure
        If the accumulated sum has a non-negligible imaginary part.
    Divergent
        If the increments grow for 10 consecutive orders.
    """
    _require_siso(sys)
    _require_stable(sys.A)
    form = spectral_form(sys, simple_tol=simple_tol)
    imag = [0.0]

    def increments():
        for value, size, size_total in _pole_residue_terms(form):
            imag[0] += value.imag
            yield float(value.real), size, size_total

    result = _sum_series(increments(), max_order, tail_tol, "pole-residue")
    squared = result.value ** 2
    if abs(imag[0]) > 1e-8 * max(squared, 1e-300) and abs(imag[0]) > 1e-14:
        raise EigenFailure(f"residue sum has imaginary part {imag[0]:.3g}")
    return result


def error_system(full, reduced):
    """Augmented system whose output is ``y - y_reduced``."""
    if full.m != reduced.m or full.p != reduced.p:
        raise InputError("full and reduced systems differ in input/output dimensions")
    n, r = full.n, reduced.n

    def blockdiag(X, Y):
        Z = np.zeros((n + r, n + r), dtype=np.result_type(X, Y))
        Z[:n, :n] = X
        Z[n:, n:] = Y
        return Z

    return BilinearSystem(
        blockdiag(full.A, reduced.A),
        [blockdiag(Nf, Nr) for Nf, Nr in zip(full.N, reduced.N)],
        np.vstack([full.B, reduced.B]),
        np.hstack([full.C, -reduced.C]),
    )


def h2_error(full, reduced, terms=None, max_terms=MAX_TERMS, tail_tol=TAIL_TOL):
    """H2 distance between two systems.

    With ``terms=None`` this is the full H2 norm of the error system.
    With ``terms=N`` it is the error of the N-term polynomial truncations.
    """
    err = error_system(full, reduced)
    if terms is None:
        return h2_norm_gramian(err, max_terms=max_terms, tail_tol=tail_tol)
    return truncated_h2_norm(err, terms)


def relative_h2_error(full, reduced, terms=None):
    """``h2_error / h2_norm(full)`` on the same route (full or truncated)."""
    if terms is None:
        return h2_error(full, reduced).value / h2_norm_gramian(full).value
    return h2_error(full, reduced, terms).value / truncated_h2_norm(full, terms).value


def convergent_scaling(sys, tol=1e-3, max_terms=MAX_TERMS):
    """Largest ``gamma`` in (0, 1] (to within ``tol``) with a convergent Gramian series.

    Bisection on whether ``h2_norm_gramian(scale_system(sys, gamma))``
    converges within ``max_terms`` terms.
    """

    def converges(gamma):
        try:
            return h2_norm_gramian(scale_system(sys, gamma), max_terms=max_terms).converged
        except Divergent:
            return False

    if converges(1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if converges(mid):
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        raise Divergent("no positive scaling makes the Gramian series converge")
    return lo


def _require_real(sys):
    if not sys.is_real:
        raise InputError("Gramian-based norms require a real realization")
