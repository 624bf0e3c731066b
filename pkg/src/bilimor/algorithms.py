"""Iterative rational Krylov algorithms for bilinear systems.

``birka`` runs the bilinear IRKA fixed-point iteration. Each step
diagonalizes the current reduced model, solves the two bilinear Sylvester
equations

    V (-Lambda) - A V - sum_k N_k V Nhat_k^T = B Bhat^T,
    W (-Lambda) - A^T W - sum_k N_k^T W Nhat_k = C^T Chat,

orthonormalizes ``V`` and ``W`` and projects. ``tbirka`` replaces the
bilinear solves with ``N`` chained ordinary Sylvester solves, which
targets the N-term truncation of the Volterra series.
"""

import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .exceptions import (
    EigenFailure,
    InputError,
    MaxIterExceeded,
    RankDeficient,
    SingularProjection,
)
from .interpolation import (
    KRONECKER_LIMIT,
    check_truncated_conditions,
    check_wilson_kronecker_conditions,
)
from .linalg import BilinearSylvester, ShiftedSolver, eig_sorted, sort_eigenvalues
from .system import BilinearSystem, ProjectionPair, reduce_by_projection, spectral_form

INIT_CHOICES = ("log_spaced_shifts", "random_stable")
CYCLE_WINDOW = 5


@dataclass(frozen=True)
class ReductionConfig:
    """Settings shared by :func:`birka` and :func:`tbirka`.

    ``init`` is ``'log_spaced_shifts'``, ``'random_stable'`` or a
    :class:`BilinearSystem` of order ``order`` used as the starting model.
    ``orthonormalize=None`` means: on for B-IRKA, off for TB-IRKA.
    """

    order: int
    method: str = "birka"
    terms: int = 2
    tol: float = 1e-6
    max_iter: int = 100
    init: object = "log_spaced_shifts"
    seed: int = 0
    sylvester_mode: str = "auto"
    orthonormalize: object = None
    restart: bool = True
    check_conditions: bool = True

    def validate(self, n):
        # r == n is allowed: it is the exact-realization case
        if not 1 <= self.order <= n:
            raise InputError(f"order must satisfy 1 <= r <= n = {n}, got {self.order}")
        if self.method not in ("birka", "tbirka"):
            raise InputError(f"unknown method {self.method!r}")
        if self.terms < 1:
            raise InputError("truncation index must be >= 1")
        if not self.tol > 0:
            raise InputError("tol must be positive")
        if self.max_iter < 1:
            raise InputError("max_iter must be >= 1")
        if self.sylvester_mode not in ("auto", "direct", "iterative"):
            raise InputError(f"unknown Sylvester mode {self.sylvester_mode!r}")
        if isinstance(self.init, str) and self.init not in INIT_CHOICES:
            raise InputError(f"unknown initialization {self.init!r}")


@dataclass
class ConvergenceReport:
    """Per-iteration history of a reduction run."""

    eigenvalues: list = field(default_factory=list)
    eig_change: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)
    contraction: list = field(default_factory=list)
    converged: bool = False
    restarts: int = 0
    stable: bool = False
    residuals: dict = field(default_factory=dict)
    message: str = ""

    @property
    def iterations(self):
        return len(self.eig_change)

    def rows(self):
        """``(iter, eig_change, wall_ms, contraction)`` per iteration."""
        return [
            (i + 1, self.eig_change[i], self.wall_ms[i], self.contraction[i])
            for i in range(self.iterations)
        ]

    def mean_wall_ms(self):
        return float(np.mean(self.wall_ms)) if self.wall_ms else float("nan")


def eigenvalue_change(new, old):
    """Largest relative change between two sorted eigenvalue vectors."""
    return float(np.max(np.abs(new - old) / np.maximum(np.abs(old), np.finfo(float).tiny)))


def _spectral_range(A):
    values = np.abs(np.linalg.eigvals(A).real)
    values = values[values > 0]
    if values.size == 0:
        return 1.0, 1.0
    return float(values.min()), float(values.max())


def initialize(sys, config):
    """Deterministic starting model for the fixed-point iterations.

    ``log_spaced_shifts`` places the reduced poles at ``-sigma`` with
    ``sigma`` log-spaced over the range of ``|Re lambda(A)|``, uses unit
    input and output maps and zero bilinear terms. ``random_stable`` draws
    poles log-uniformly from the same range and Gaussian ``B~``, ``C~``,
    ``N~_k``, the latter scaled to the Frobenius norm of ``Q^T N_k Q`` for
    a random orthonormal ``Q``.
    """
    if isinstance(config.init, BilinearSystem):
        if config.init.n != config.order or config.init.dims[1:] != sys.dims[1:]:
            raise InputError("initial model does not match the requested order/dimensions")
        return config.init
    r, m, p = config.order, sys.m, sys.p
    lo, hi = _spectral_range(sys.A)
    if config.init == "log_spaced_shifts":
        if r == 1:
            sigma = np.array([np.sqrt(lo * hi)])
        else:
            sigma = np.logspace(np.log10(lo), np.log10(hi), r)
        return BilinearSystem(np.diag(-sigma), [np.zeros((r, r))] * m, np.ones((r, m)), np.ones((p, r)))
    rng = np.random.default_rng(config.seed)
    sigma = np.exp(rng.uniform(np.log(lo), np.log(hi), r))
    Q, _ = np.linalg.qr(rng.standard_normal((sys.n, r)))
    N = []
    for Nk in sys.N:
        G = rng.standard_normal((r, r))
        target = np.linalg.norm(Q.T @ Nk @ Q)
        N.append(G * (target / np.linalg.norm(G)))
    return BilinearSystem(np.diag(-np.sort(sigma)), N, rng.standard_normal((r, m)), rng.standard_normal((p, r)))


def realify(X, Lambda):
    """Real basis spanning the same space as columns of ``X``.

    Columns belonging to a conjugate pair of eigenvalues are replaced by
    the real and imaginary parts of the member with positive imaginary
    part; columns of real eigenvalues keep their real part.
    """
    Lambda = np.asarray(Lambda)
    scale = max(1.0, float(np.max(np.abs(Lambda))))
    cols = []
    for j, lam in enumerate(Lambda):
        if abs(lam.imag) <= 1e-12 * scale:
            cols.append(X[:, j].real)
        elif lam.imag > 0:
            cols.append(X[:, j].real)
            cols.append(X[:, j].imag)
    out = np.column_stack(cols)
    if out.shape[1] != X.shape[1]:
        raise EigenFailure("reduced eigenvalues are not closed under conjugation")
    return out


def orthonormalize(X):
    """Orthonormal basis of ``range(X)`` by QR with column pivoting."""
    Q, _, _ = sla.qr(X, mode="economic", pivoting=True)
    return Q


def _birka_bases(sys, form, config):
    op = BilinearSylvester(sys.A, -form.Lambda, sys.N, form.Nhat)
    V = op.solve(sys.B @ form.Bhat.T, mode=config.sylvester_mode)
    W = op.solve(sys.C.T @ form.Chat, mode=config.sylvester_mode, transpose=True)
    return V, W, op.contraction()


def _tbirka_bases(sys, form, config):
    solver = ShiftedSolver(sys.A, -form.Lambda)
    V = solver.solve(sys.B @ form.Bhat.T)
    W = solver.solve(sys.C.T @ form.Chat, transpose=True)
    S, U = V.copy(), W.copy()
    ratio = 0.0
    for _ in range(config.terms - 1):
        previous = np.linalg.norm(V)
        V = solver.solve(sum(Nk @ V @ Nh.T for Nk, Nh in zip(sys.N, form.Nhat)))
        W = solver.solve(sum(Nk.T @ W @ Nh for Nk, Nh in zip(sys.N, form.Nhat)), transpose=True)
        S += V
        U += W
        ratio = float(np.linalg.norm(V) / previous) if previous > 0 else 0.0
    return S, U, ratio


def _cycling(history, current, tol):
    if len(history) < 3:
        return False
    for lag in range(2, min(CYCLE_WINDOW, len(history)) + 1):
        if eigenvalue_change(current, history[-lag]) < tol:
            return True
    return False


def _iterate(sys, config, bases, orth):
    report = ConvergenceReport()
    reduced = initialize(sys, config)
    proj = None
    best = None
    attempt_config = config
    previous = sort_eigenvalues(np.linalg.eigvals(reduced.A))
    history = [previous]
    iteration = 0
    while iteration < config.max_iter:
        iteration += 1
        start = time.perf_counter()
        try:
            form = spectral_form(reduced)
            V, W, contraction = bases(sys, form, attempt_config)
            V = realify(V, form.Lambda)
            W = realify(W, form.Lambda)
            if orth:
                V, W = orthonormalize(V), orthonormalize(W)
            candidate_proj = ProjectionPair(V, W)
            candidate = reduce_by_projection(sys, candidate_proj)
            current = eig_sorted(candidate.A).values
        except (RankDeficient, EigenFailure) as exc:
            if config.restart and report.restarts == 0:
                report.restarts += 1
                attempt_config = replace(config, init="random_stable", seed=config.seed + 1)
                reduced = initialize(sys, attempt_config)
                previous = sort_eigenvalues(np.linalg.eigvals(reduced.A))
                history = [previous]
                continue
            if best is None:
                raise SingularProjection(f"projection failed at iteration {iteration}: {exc}") from exc
            report.message = f"stopped after projection failure: {exc}"
            break
        change = eigenvalue_change(current, previous)
        report.wall_ms.append((time.perf_counter() - start) * 1e3)
        report.eigenvalues.append(current)
        report.eig_change.append(change)
        report.contraction.append(float(contraction))
        reduced, proj = candidate, candidate_proj
        if best is None or change <= best[0]:
            best = (change, reduced, proj)
        if change < config.tol:
            report.converged = True
            break
        if _cycling(history, current, config.tol) and config.restart and report.restarts == 0:
            report.restarts += 1
            attempt_config = replace(config, init="random_stable", seed=config.seed + 1)
            reduced = initialize(sys, attempt_config)
            current = sort_eigenvalues(np.linalg.eigvals(reduced.A))
            history = []
        history.append(current)
        previous = current
    if not report.converged:
        _, reduced, proj = best
        if not report.message:
            report.message = f"no convergence within {config.max_iter} iterations"
        warnings.warn(report.message, MaxIterExceeded, stacklevel=3)
    report.stable = bool(np.max(np.linalg.eigvals(reduced.A).real) < 0)
    return reduced, proj, report


def birka(sys, config=None, **overrides):
    """Bilinear iterative rational Krylov algorithm.

    Parameters
    ----------
    sys : BilinearSystem
    config : ReductionConfig, optional
        Keyword ``overrides`` are applied on top (``birka(sys, order=4)``).

    Returns
    -------
    reduced : BilinearSystem
        Real reduced model, equal to ``reduce_by_projection(sys, proj)``.
    proj : ProjectionPair
    report : ConvergenceReport
        Includes Kronecker-form optimality residuals when ``n * r`` is small
        enough. Non-convergence emits :class:`MaxIterExceeded` and returns
        the iterate with the smallest eigenvalue change.
    """
    config = _resolve(config, overrides, "birka")
    config.validate(sys.n)
    orth = True if config.orthonormalize is None else config.orthonormalize
    reduced, proj, report = _iterate(sys, config, _birka_bases, orth)
    if config.check_conditions and sys.n * config.order <= KRONECKER_LIMIT:
        try:
            report.residuals = check_wilson_kronecker_conditions(sys, reduced).residuals
        except (EigenFailure, np.linalg.LinAlgError):
            report.residuals = {}
    return reduced, proj, report


def tbirka(sys, config=None, **overrides):
    """Truncated B-IRKA targeting the first ``config.terms`` Volterra kernels.

    Each iteration solves ``2 * terms`` ordinary Sylvester equations that
    share one set of shifted LU factors, sums them into ``S_N`` and
    ``U_N`` and projects with ``(U_N^T S_N)^{-1} U_N^T (.) S_N``. The bases
    are not orthonormalized unless requested. The report's contraction
    column holds the observed ratio ``||V_N|| / ||V_{N-1}||``.
    """
    config = _resolve(config, overrides, "tbirka")
    config.validate(sys.n)
    orth = False if config.orthonormalize is None else config.orthonormalize
    reduced, proj, report = _iterate(sys, config, _tbirka_bases, orth)
    if config.check_conditions:
        try:
            report.residuals = check_truncated_conditions(sys, reduced, config.terms).residuals
        except (EigenFailure, np.linalg.LinAlgError):
            report.residuals = {}
    return reduced, proj, report


def reduce(sys, config=None, **overrides):
    """Dispatch on ``config.method``."""
    if config is None:
        config = ReductionConfig(**overrides)
    elif overrides:
        config = replace(config, **overrides)
    return (birka if config.method == "birka" else tbirka)(sys, config)


def _resolve(config, overrides, method):
    if config is None:
        if "order" not in overrides:
            raise InputError("the reduced order is required")
        overrides.setdefault("method", method)
        return ReductionConfig(**overrides)
    config = replace(config, **overrides) if overrides else config
    if config.method != method and method in ("birka", "tbirka"):
        config = replace(config, method=method)
    return config
