"""Bilinear state-space systems and projection-based reduction.

A bilinear system is

    x'(t) = A x(t) + sum_k N_k x(t) u_k(t) + B u(t),    y(t) = C x(t),

with ``n`` states, ``m`` inputs and ``p`` outputs.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.linalg as sla

from .exceptions import (
    EigenFailure,
    InputError,
    NumericalOverflow,
    RankDeficient,
    RepeatedEigenvalues,
)
from .linalg import ShiftedSolver, eig_sorted

_EPS = np.finfo(float).eps


def _frozen(array):
    array = np.array(array, copy=True)
    if not np.issubdtype(array.dtype, np.complexfloating):
        array = array.astype(float)
    array.setflags(write=False)
    return array


class BilinearSystem:
    """Realization ``(A, N_1..N_m, B, C)`` of a bilinear system.

    Parameters
    ----------
    A : (n, n) array_like
    N : sequence of m (n, n) arrays, or a single (n, n) array when m = 1
    B : (n, m) array_like; a 1-D array is read as a single column
    C : (p, n) array_like; a 1-D array is read as a single row

    Arrays are copied and made read-only, so instances can be shared.
    """

    __slots__ = ("A", "N", "B", "C")

    def __init__(self, A, N, B, C):
        A = _frozen(np.atleast_2d(A))
        B = np.asarray(B)
        B = B.reshape(-1, 1) if B.ndim <= 1 else B
        C = np.asarray(C)
        C = C.reshape(1, -1) if C.ndim <= 1 else C
        B, C = _frozen(B), _frozen(C)
        N = np.asarray(N) if not isinstance(N, (list, tuple)) else N
        if isinstance(N, np.ndarray) and N.ndim == 3:
            N = list(N)
        elif isinstance(N, np.ndarray):
            N = [np.atleast_2d(N)]
        N = tuple(_frozen(np.atleast_2d(Nk)) for Nk in N)

        n = A.shape[0]
        if A.shape != (n, n):
            raise InputError(f"A must be square, got {A.shape}")
        if B.shape[0] != n or C.shape[1] != n:
            raise InputError(f"B {B.shape} / C {C.shape} inconsistent with n={n}")
        if len(N) != B.shape[1]:
            raise InputError(f"{len(N)} bilinear matrices for {B.shape[1]} inputs")
        for Nk in N:
            if Nk.shape != (n, n):
                raise InputError(f"N_k must be {(n, n)}, got {Nk.shape}")
        for M in (A, B, C, *N):
            if not np.all(np.isfinite(M)):
                raise InputError("system matrices must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    def __setattr__(self, name, value):
        raise AttributeError("BilinearSystem is immutable")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    @property
    def dims(self):
        return self.n, self.m, self.p

    @property
    def is_siso(self):
        return self.m == 1 and self.p == 1

    @property
    def b(self):
        """Input vector of a single-input system."""
        _require_siso(self)
        return self.B[:, 0]

    @property
    def c(self):
        """Output row of a single-output system."""
        _require_siso(self)
        return self.C[0]

    @property
    def is_real(self):
        return all(np.isrealobj(M) for M in (self.A, self.B, self.C, *self.N))

    def copy_with(self, **changes):
        fields = {"A": self.A, "N": self.N, "B": self.B, "C": self.C}
        fields.update(changes)
        return BilinearSystem(**fields)

    def __eq__(self, other):
        if not isinstance(other, BilinearSystem):
            return NotImplemented
        return (
            self.dims == other.dims
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.B, other.B)
            and np.array_equal(self.C, other.C)
            and all(np.array_equal(x, y) for x, y in zip(self.N, other.N))
        )

    __hash__ = None

    def __repr__(self):
        n, m, p = self.dims
        return f"BilinearSystem(n={n}, m={m}, p={p})"


def _require_siso(sys):
    if not sys.is_siso:
        raise InputError(f"a single-input single-output system is required, got m={sys.m}, p={sys.p}")


@dataclass(frozen=True)
class ProjectionPair:
    """Trial basis ``V`` and test basis ``W`` of a Petrov-Galerkin reduction."""

    V: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        V, W = np.asarray(self.V), np.asarray(self.W)
        if V.ndim != 2 or V.shape != W.shape:
            raise InputError(f"V {V.shape} and W {W.shape} must have equal 2-D shapes")
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(W))):
            raise InputError("projection bases must be finite")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "W", W)

    @property
    def order(self):
        return self.V.shape[1]

    @property
    def condition(self):
        """Condition number of ``W^T V``."""
        return float(np.linalg.cond(self.W.T @ self.V))


def reduce_by_projection(sys, proj):
    """Petrov-Galerkin reduction with an oblique projector.

    Returns ``((W^T V)^{-1} W^T A V, (W^T V)^{-1} W^T N_k V, (W^T V)^{-1} W^T B, C V)``.

    Raises
    ------
    RankDeficient
        If ``W^T V`` is numerically singular.
    """
    V, W = proj.V, proj.W
    if V.shape[0] != sys.n:
        raise InputError(f"bases have {V.shape[0]} rows for a system with n={sys.n}")
    M = W.T @ V
    if np.linalg.cond(M) > 1.0 / _EPS:
        raise RankDeficient("W^T V is numerically singular")
    lu = sla.lu_factor(M, check_finite=False)

    def project(X):
        return sla.lu_solve(lu, W.T @ X, check_finite=False)

    return BilinearSystem(
        project(sys.A @ V),
        [project(Nk @ V) for Nk in sys.N],
        project(sys.B),
        sys.C @ V,
    )


def scale_system(sys, gamma):
    """Return ``(A, gamma N_1, ..., gamma N_m, gamma B, C)``.

    Driving the scaled system with ``u / gamma`` reproduces the original
    output, while the Volterra kernel of order k shrinks by ``gamma**k``.
    """
    if not gamma > 0:
        raise InputError("gamma must be positive")
    return BilinearSystem(sys.A, [gamma * Nk for Nk in sys.N], gamma * sys.B, sys.C)


@dataclass(frozen=True)
class SpectralForm:
    """Diagonalized realization ``A = R diag(Lambda) R^{-1}``.

    ``Bhat = R^{-1} B`` (r x m), ``Chat = C R`` (p x r) and
    ``Nhat[k] = R^{-1} N_k R``. Eigenvalues are sorted by (real, imag).
    """

    Lambda: np.ndarray
    Bhat: np.ndarray
    Chat: np.ndarray
    Nhat: tuple
    R: np.ndarray
    Rinv: np.ndarray


def spectral_form(sys, simple_tol=None):
    """Transform ``sys`` to its eigenbasis.

    If ``simple_tol`` is given, eigenvalues closer than
    ``simple_tol * max(1, max|lambda|)`` raise ``RepeatedEigenvalues``.
    """
    dec = eig_sorted(sys.A)
    lam = dec.values
    if simple_tol is not None and len(lam) > 1:
        scale = max(1.0, float(np.max(np.abs(lam))))
        for i, j in combinations(range(len(lam)), 2):
            if abs(lam[i] - lam[j]) < simple_tol * scale:
                raise RepeatedEigenvalues(
                    f"eigenvalues {lam[i]} and {lam[j]} are not simple"
                )
    R, Rinv = dec.vectors, dec.inverse_vectors
    return SpectralForm(
        Lambda=lam,
        Bhat=Rinv @ sys.B,
        Chat=sys.C @ R,
        Nhat=tuple(Rinv @ Nk @ R for Nk in sys.N),
        R=R,
        Rinv=Rinv,
    )


def _check_frequencies(s):
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    if s.ndim != 1 or len(s) < 1:
        raise InputError("need at least one frequency")
    return s


def eval_transfer_function(sys, s):
    """Evaluate the k-th order transfer function at ``s = (s_1, ..., s_k)``.

    Returns the ``p x m**k`` matrix
    ``C (s_k I - A)^{-1} Nbar (I_m (x) (s_{k-1} I - A)^{-1}) ... (I (x) (s_1 I - A)^{-1} B)``
    with ``Nbar = [N_1, ..., N_m]``. For SISO systems this is
    ``c (s_k I - A)^{-1} N ... N (s_1 I - A)^{-1} b``.

    Raises
    ------
    SingularShift
        If some ``s_i`` is an eigenvalue of ``A``.
    """
    s = _check_frequencies(s)
    G = None
    for si in s:
        if G is None:
            rhs = sys.B.astype(complex)
        else:
            rhs = np.hstack([Nk @ G for Nk in sys.N])
        G = ShiftedSolver(sys.A, [si]).solve_block(0, rhs)
    return sys.C @ G


def eval_kernel(sys, t):
    """Evaluate the k-th regular Volterra kernel at ``t = (t_1, ..., t_k)``.

    Returns the ``p x m**k`` matrix
    ``C e^{A t_k} Nbar (I_m (x) e^{A t_{k-1}}) ... (I (x) e^{A t_1} B)``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.ndim != 1 or len(t) < 1:
        raise InputError("need at least one time argument")
    if np.any(t < 0):
        raise InputError("kernel times must be nonnegative")
    G = None
    for ti in t:
        E = sla.expm(sys.A * ti)
        if G is None:
            G = E @ sys.B
        else:
            G = E @ np.hstack([Nk @ G for Nk in sys.N])
        if not np.all(np.isfinite(G)):
            raise NumericalOverflow("kernel evaluation overflowed")
    return sys.C @ G


@dataclass(frozen=True)
class ResidueTensor:
    """Residues ``phi[l_1, ..., l_k]`` of the k-th transfer function of a SISO system."""

    order: int
    entries: np.ndarray
    poles: np.ndarray


def residue_entries(form, order):
    """Residue tensor of a SISO spectral form.

    ``phi[l_1, ..., l_k] = chat[l_k] Nhat[l_k, l_{k-1}] ... Nhat[l_2, l_1] bhat[l_1]``.
    """
    bhat = form.Bhat[:, 0]
    chat = form.Chat[0]
    Nhat = form.Nhat[0]
    T = bhat
    for _ in range(order - 1):
        # new trailing axis l_next: T[..., l] * Nhat[l_next, l]
        T = T[..., None] * np.moveaxis(Nhat, 0, 1).reshape((1,) * (T.ndim - 1) + Nhat.shape)
    return T * chat.reshape((1,) * (T.ndim - 1) + (-1,))


def residues(sys, order, tol=1e-10):
    """Residues of the ``order``-th transfer function (SISO, simple poles).

    Raises
    ------
    RepeatedEigenvalues
        If two eigenvalues of ``A`` are closer than ``tol`` (relative).
    """
    _require_siso(sys)
    if order < 1:
        raise InputError("order must be >= 1")
    form = spectral_form(sys, simple_tol=tol)
    return ResidueTensor(order, residue_entries(form, order), form.Lambda)


def pole_residue_reconstruct(sys, s, tol=1e-10):
    """Evaluate ``H_k(s)`` from poles and residues.

    Computes ``sum phi[l_1..l_k] / prod_i (s_i - lambda_{l_i})``; agrees
    with ``eval_transfer_function`` whenever ``A`` has simple eigenvalues.
    """
    s = _check_frequencies(s)
    tensor = residues(sys, len(s), tol)
    value = tensor.entries
    for si in s:
        if np.any(si == tensor.poles):
            raise EigenFailure("frequency coincides with a pole")
        value = np.tensordot(1.0 / (si - tensor.poles), value, axes=([0], [0]))
    return complex(value)
