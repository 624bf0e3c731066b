"""Random-instance generators shared by the test modules."""

import numpy as np

from bilimor import BilinearSystem


def random_stable(rng, n, margin=0.5):
    A = rng.standard_normal((n, n))
    shift = np.max(np.linalg.eigvals(A).real) + margin + rng.uniform(0.0, 1.0)
    return A - shift * np.eye(n)


def gramian_contraction(A, N_list):
    """Spectral radius of P -> L^{-1}(sum N P N^T), L(P) = -(A P + P A^T), by Kronecker algebra."""
    n = A.shape[0]
    I = np.eye(n)
    L = -(np.kron(I, A) + np.kron(A, I))
    K = sum(np.kron(Nk, Nk) for Nk in N_list)
    return float(np.max(np.abs(np.linalg.eigvals(np.linalg.solve(L, K)))))


def random_siso(rng, n, contraction=0.5, m=1):
    """Random stable bilinear system whose Gramian series contracts at the given rate."""
    A = random_stable(rng, n)
    N = [rng.standard_normal((n, n)) for _ in range(m)]
    rho = gramian_contraction(A, N)
    scale = np.sqrt(contraction / rho)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((1, n))
    return BilinearSystem(A, [scale * Nk for Nk in N], B, C)


def scalar_system(c=1.0):
    return BilinearSystem([[-2.0]], [[[0.5]]], [[1.0]], [[c]])


def kronecker_truncated_error(full, reduced, terms):
    """Truncated H2 error from Kronecker products of the error realization.

    E^2 = vec(I)^T (Ce (x) Ce) sum_{k<terms} (L^{-1} K)^k L^{-1} (Be (x) Be) vec(I)
    with L = -(Ae (x) I + I (x) Ae) and K = sum Ne (x) Ne.
    """
    n, r = full.n, reduced.n
    Ae = np.block([[full.A, np.zeros((n, r))], [np.zeros((r, n)), reduced.A]])
    Ne = [np.block([[Nf, np.zeros((n, r))], [np.zeros((r, n)), Nr]]) for Nf, Nr in zip(full.N, reduced.N)]
    Be = np.vstack([full.B, reduced.B])
    Ce = np.hstack([full.C, -reduced.C])
    I = np.eye(n + r)
    L = -(np.kron(Ae, I) + np.kron(I, Ae))
    K = sum(np.kron(Nk, Nk) for Nk in Ne)
    vec_b = np.kron(Be, Be) @ np.eye(full.m).reshape(-1)
    term = np.linalg.solve(L, vec_b)
    total = np.zeros_like(term)
    for _ in range(terms):
        total += term
        term = np.linalg.solve(L, K @ term)
    value = np.eye(full.p).reshape(-1) @ np.kron(Ce, Ce) @ total
    return float(np.sqrt(max(value, 0.0)))


ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    """Remember and print one acceptance line."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed
