"""Benchmark bilinear models and a fixed-step simulator.

Each generator documents its stencil. All generators are deterministic.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import GridMismatch, InputError, NumericalOverflow
from .system import BilinearSystem, scale_system


def heat2d(k, shared_robin=True, robin=0.8, dirichlet=0.8, gamma=0.4):
    """Boundary-controlled heat equation on the unit square.

    ``k x k`` interior nodes with spacing ``h = 1/(k+1)`` and the 5-point
    Laplacian. The left, bottom and top edges carry the Robin condition
    ``d x / d n_in = robin * u (x - 1)`` (``n_in`` the inward normal), eliminated with a
    first-order ghost node; the right edge carries ``x = dirichlet * u_D``.
    A node next to a Robin edge thus gets ``-(robin/h) u x + (robin/h) u``,
    and a node next to the Dirichlet edge gets ``(dirichlet/h**2) u_D``.

    With ``shared_robin`` (default) one input drives all three Robin edges
    and the second drives the Dirichlet edge (m = 2). Otherwise every edge
    has its own input (m = 4, Dirichlet last). The output is the mean
    temperature.

    The unscaled model (``gamma=1``) is not an H2 system: its Gramian
    recursion contracts by a factor of about 3 per term. The default
    returns ``scale_system(model, 0.4)``, whose factor is about 0.5. Drive it
    with ``u / gamma`` to recover the physical response.
    """
    if k < 3:
        raise InputError("heat2d needs k >= 3")
    n = k * k
    h = 1.0 / (k + 1)
    m = 2 if shared_robin else 4
    A = np.zeros((n, n))
    N = [np.zeros((n, n)) for _ in range(m)]
    B = np.zeros((n, m))

    def index(i, j):
        return j * k + i

    # edge name -> input column; left=Gamma1, bottom=Gamma2, top=Gamma3, right=Gamma4
    robin_input = {"left": 0, "bottom": 0 if shared_robin else 1, "top": 0 if shared_robin else 2}
    dirichlet_input = m - 1
    for j in range(k):
        for i in range(k):
            row = index(i, j)
            for di, dj, edge in ((-1, 0, "left"), (1, 0, "right"), (0, -1, "bottom"), (0, 1, "top")):
                ii, jj = i + di, j + dj
                if 0 <= ii < k and 0 <= jj < k:
                    A[row, index(ii, jj)] += 1.0 / h**2
                    A[row, row] -= 1.0 / h**2
                elif edge == "right":
                    A[row, row] -= 1.0 / h**2
                    B[row, dirichlet_input] += dirichlet / h**2
                else:
                    col = robin_input[edge]
                    N[col][row, row] -= robin / h
                    B[row, col] += robin / h
    C = np.full((1, n), 1.0 / n)
    return scale_system(BilinearSystem(A, N, B, C), gamma)


def _bernoulli(z):
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    big = np.abs(z) > 1e-8
    out[big] = z[big] / np.expm1(z[big])
    out[~big] = 1.0 - z[~big] / 2.0
    return out


def fokker_planck(nodes=500, sigma=2.0 / 3.0, interval=(0.95, 1.05), shift=1.0):
    """Fokker-Planck equation of a dragged particle in a double well.

    The density obeys ``rho_t = sigma rho_xx + (rho V_x)_x`` on [-2, 2] with
    ``V(x, u) = (x^2 - 1)^2 - x u - x`` and no-flux boundaries. Nodes are
    equispaced; node ``i`` owns the control volume between its midpoints
    (half cells at the ends). Interface fluxes of the ``u``-free drift use
    Scharfetter-Gummel weights, the ``u``-drift uses the central average,
    so both conserve the discrete mass ``w^T rho`` with ``w`` the cell widths.

    The state is the deviation ``x = rho - rho_inf`` from the stationary
    density ``rho_inf`` (``w^T rho_inf = 1``), so ``b = N rho_inf``. Mass
    conservation gives ``A`` a zero eigenvalue with left eigenvector ``w``;
    it is moved to ``-shift`` by ``A - shift * rho_inf w^T``. That does not
    change any trajectory from ``x(0) = 0``, which stays in ``w^T x = 0``.
    The output is the probability of ``interval``: ``c_i`` is the overlap
    length of cell ``i`` with the interval.
    """
    if nodes < 10:
        raise InputError("fokker_planck needs nodes >= 10")
    x = np.linspace(-2.0, 2.0, nodes)
    h = x[1] - x[0]
    widths = np.full(nodes, h)
    widths[0] = widths[-1] = h / 2
    mid = 0.5 * (x[:-1] + x[1:])
    drift = 4 * mid**3 - 4 * mid - 1.0
    z = drift * h / sigma
    # flux J_{i+1/2} = (sigma/h) (B(z) rho_i - B(-z) rho_{i+1}); rho_t = -(J_out - J_in)/width
    flux = np.zeros((nodes - 1, nodes))
    idx = np.arange(nodes - 1)
    flux[idx, idx] = sigma / h * _bernoulli(z)
    flux[idx, idx + 1] = -sigma / h * _bernoulli(-z)
    # u enters V_x as -u, adding u (rho_i + rho_{i+1}) / 2 to the flux
    uflux = np.zeros((nodes - 1, nodes))
    uflux[idx, idx] = 0.5
    uflux[idx, idx + 1] = 0.5
    divergence = np.zeros((nodes, nodes - 1))
    divergence[idx, idx] = -1.0
    divergence[idx + 1, idx] = 1.0
    divergence /= widths[:, None]
    A = divergence @ flux
    N = divergence @ uflux

    _, _, vt = np.linalg.svd(A)
    rho_inf = vt[-1]
    rho_inf = rho_inf / (widths @ rho_inf)
    A_shifted = A - shift * np.outer(rho_inf, widths)
    b = N @ rho_inf
    lo, hi = interval
    left = np.concatenate([[x[0]], mid])
    right = np.concatenate([mid, [x[-1]]])
    c = np.clip(np.minimum(right, hi) - np.maximum(left, lo), 0.0, None)
    return BilinearSystem(A_shifted, [N], b, c)


def fokker_planck_weights(nodes):
    """Cell widths ``w`` of :func:`fokker_planck`; ``w^T x`` is the mass."""
    h = 4.0 / (nodes - 1)
    widths = np.full(nodes, h)
    widths[0] = widths[-1] = h / 2
    return widths


def _burgers_parts(n0, nu):
    h = 1.0 / (n0 + 1)
    A1 = nu / h**2 * (np.diag(np.full(n0, -2.0)) + np.diag(np.ones(n0 - 1), 1) + np.diag(np.ones(n0 - 1), -1))
    A2 = np.zeros((n0, n0 * n0))
    for i in range(n0):
        # -v_i (v_{i+1} - v_{i-1}) / (2h)
        if i + 1 < n0:
            A2[i, i * n0 + i + 1] -= 1.0 / (2 * h)
        if i - 1 >= 0:
            A2[i, i * n0 + i - 1] += 1.0 / (2 * h)
    N1 = np.zeros((n0, n0))
    N1[0, 0] = 1.0 / (2 * h)
    b = np.zeros(n0)
    b[0] = nu / h**2
    return A1, A2, N1, b


def burgers_rhs(n0, nu=0.01):
    """Right-hand side ``f(x, u)`` of the semi-discrete Burgers equation."""
    A1, A2, N1, b = _burgers_parts(n0, nu)

    def rhs(x, u):
        return A1 @ x + A2 @ np.kron(x, x) + u * (N1 @ x) + b * u

    return rhs


def burgers_carleman(n0=10, nu=0.01):
    """Carleman bilinearization of the viscous Burgers equation.

    ``v_t + v v_x = nu v_xx`` on (0, 1) with ``v(0, t) = u(t)`` and
    ``v(1, t) = 0`` is discretized at ``n0`` interior nodes with central
    differences in the non-conservative form
    ``dv_i/dt = nu (v_{i+1} - 2 v_i + v_{i-1}) / h^2 - v_i (v_{i+1} - v_{i-1}) / (2h)``.
    This gives ``x' = A1 x + A2 (x (x) x) + N1 x u + b u``. The state
    ``z = [x; x (x) x]`` (dimension ``n0 + n0**2``) yields

        A = [[A1, A2], [0, A1 (x) I + I (x) A1]],
        N = [[N1, 0], [b (x) I + I (x) b, N1 (x) I + I (x) N1]],

    ``B = [b; 0]`` after dropping third-order terms. The output is the mean
    of ``v`` over the nodes.
    """
    if n0 < 3:
        raise InputError("burgers_carleman needs n0 >= 3")
    A1, A2, N1, b = _burgers_parts(n0, nu)
    eye = np.eye(n0)
    n = n0 + n0 * n0
    A = np.zeros((n, n))
    A[:n0, :n0] = A1
    A[:n0, n0:] = A2
    A[n0:, n0:] = np.kron(A1, eye) + np.kron(eye, A1)
    N = np.zeros((n, n))
    N[:n0, :n0] = N1
    bcol = b[:, None]
    N[n0:, :n0] = np.kron(bcol, eye) + np.kron(eye, bcol)
    N[n0:, n0:] = np.kron(N1, eye) + np.kron(eye, N1)
    B = np.zeros(n)
    B[:n0] = b
    C = np.zeros(n)
    C[:n0] = 1.0 / n0
    return BilinearSystem(A, [N], B, C)


def convection_diffusion_lpv(grid=15, p0=1.0):
    """Parameter-varying convection-diffusion problem as a bilinear system.

    ``x_t = p0 Lap x + p1 x_xi1 + p2 x_xi2 + b u`` on the unit square with
    zero Dirichlet data, ``grid x grid`` interior nodes, the 5-point
    Laplacian ``A0`` and central first differences ``A1``, ``A2``. The
    source ``b`` is uniform and the output is the last node. Treating
    ``(p1, p2, u)`` as inputs gives ``A = p0 A0``, ``N = (A1, A2, 0)`` and
    ``B = [0, 0, b]``.
    """
    if grid < 3:
        raise InputError("convection_diffusion_lpv needs grid >= 3")
    if not 0.1 <= p0 <= 1.0:
        raise InputError("p0 must lie in [0.1, 1]")
    g = grid
    h = 1.0 / (g + 1)
    eye = np.eye(g)
    second = (np.diag(np.full(g, -2.0)) + np.diag(np.ones(g - 1), 1) + np.diag(np.ones(g - 1), -1)) / h**2
    first = (np.diag(np.ones(g - 1), 1) - np.diag(np.ones(g - 1), -1)) / (2 * h)
    A0 = np.kron(eye, second) + np.kron(second, eye)
    A1 = np.kron(eye, first)
    A2 = np.kron(first, eye)
    n = g * g
    B = np.zeros((n, 3))
    B[:, 2] = 1.0
    C = np.zeros((1, n))
    C[0, -1] = 1.0
    return BilinearSystem(p0 * A0, [A1, A2, np.zeros((n, n))], B, C)


def recover_lpv(reduced, p0):
    """Map a reduced bilinear model back to ``(A0, A1, A2, b, c)`` LPV form."""
    if reduced.m != 3:
        raise InputError("expected a three-input model")
    return reduced.A / p0, reduced.N[0], reduced.N[1], reduced.B[:, 2], reduced.C[0]


@dataclass(frozen=True)
class SimulationResult:
    times: np.ndarray
    outputs: np.ndarray
    input_label: str = ""


def _input_vector(u, t, m):
    value = np.atleast_1d(np.asarray(u(t), dtype=float))
    if value.shape == (1,) and m > 1:
        raise InputError(f"input returned a scalar for a system with {m} inputs")
    if value.shape != (m,):
        raise InputError(f"input returned shape {value.shape}, expected ({m},)")
    return value


def _operator(M):
    M = np.asarray(M)
    if M.size > 2500 and np.count_nonzero(M) < 0.1 * M.size:
        return sp.csr_array(M)
    return M


def simulate(sys, u, t_max=10.0, dt=1e-3, label=""):
    """Integrate from ``x(0) = 0`` with the classical Runge-Kutta method.

    ``u(t)`` returns the input (a scalar for single-input systems, else a
    length-m array) and is evaluated at the stage times.

    Raises
    ------
    NumericalOverflow
        If the state leaves the finite range.
    """
    if not (dt > 0 and t_max > 0):
        raise InputError("dt and t_max must be positive")
    steps = int(round(t_max / dt))
    times = dt * np.arange(steps + 1)
    A = _operator(sys.A)
    N = [_operator(Nk) for Nk in sys.N]
    B = sys.B
    m = sys.m

    def f(t, x):
        v = _input_vector(u, t, m)
        dx = A @ x + B @ v
        for k in range(m):
            if v[k] != 0.0:
                dx = dx + v[k] * (N[k] @ x)
        return dx

    x = np.zeros(sys.n)
    outputs = np.empty((sys.p, steps + 1))
    outputs[:, 0] = sys.C @ x
    for i in range(steps):
        t = times[i]
        k1 = f(t, x)
        k2 = f(t + dt / 2, x + dt / 2 * k1)
        k3 = f(t + dt / 2, x + dt / 2 * k2)
        k4 = f(t + dt, x + dt * k3)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NumericalOverflow(f"trajectory diverged at t={times[i + 1]:.6g}")
        outputs[:, i + 1] = sys.C @ x
    return SimulationResult(times, outputs, label)


def output_error(full, reduced, norm="Linf", relative=False):
    """``||y - y_reduced||`` as max-abs (``Linf``) or trapezoidal ``L2``.

    With ``relative=True`` the error is divided by the same norm of ``y``.
    """
    if full.times.shape != reduced.times.shape or not np.array_equal(full.times, reduced.times):
        raise GridMismatch("results live on different time grids")
    if full.outputs.shape != reduced.outputs.shape:
        raise GridMismatch("results have different output dimensions")

    def size(Y):
        if norm == "Linf":
            return float(np.max(np.abs(Y))) if Y.size else 0.0
        if norm == "L2":
            return float(np.sqrt(np.trapezoid(np.sum(np.abs(Y) ** 2, axis=0), full.times)))
        raise InputError(f"unknown norm {norm!r}")

    err = size(full.outputs - reduced.outputs)
    return err / size(full.outputs) if relative else err
