"""Estimator-style wrappers around :func:`birka` and :func:`tbirka`.

``fit`` takes the full-order system (there is no training data), and the
fitted projection then maps full states to reduced coordinates::

    est = BIRKA(order=4).fit(heat2d(10))
    est.reduced_          # reduced BilinearSystem
    est.transform(X)      # (n_samples, n) states -> (n_samples, r)
"""

import scipy.linalg as sla
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .algorithms import ReductionConfig, birka, tbirka
from .benchmarks import simulate
from .validation import check_order, check_positive, check_system


class _ReductionEstimator(TransformerMixin, BaseEstimator):
    _method = None

    def _config(self, n):
        check_order(self.order, n)
        check_positive(self.tol, "tol")
        return ReductionConfig(
            order=self.order,
            method=self._method,
            terms=getattr(self, "n_terms", 2),
            tol=self.tol,
            max_iter=self.max_iter,
            init=self.init,
            seed=self.random_state,
            sylvester_mode=getattr(self, "sylvester_mode", "auto"),
            orthonormalize=self.orthonormalize,
        )

    def fit(self, system, y=None):
        system = check_system(system)
        algorithm = birka if self._method == "birka" else tbirka
        self.reduced_, self.projection_, self.report_ = algorithm(system, self._config(system.n))
        self.n_iter_ = self.report_.iterations
        self.converged_ = self.report_.converged
        self.n_features_in_ = system.n
        return self

    def transform(self, X):
        """Oblique projection ``(W^T V)^{-1} W^T x`` of each row of ``X``."""
        check_is_fitted(self, "reduced_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} state components, got {X.shape[1]}")
        V, W = self.projection_.V, self.projection_.W
        return sla.solve(W.T @ V, W.T @ X.T).T

    def inverse_transform(self, Z):
        """Lift reduced coordinates back with ``V``."""
        check_is_fitted(self, "reduced_")
        Z = check_array(Z)
        return Z @ self.projection_.V.T

    def predict(self, u, t_max=10.0, dt=1e-3):
        """Simulated output of the reduced model, shape ``(p, steps + 1)``."""
        check_is_fitted(self, "reduced_")
        return simulate(self.reduced_, u, t_max, dt).outputs


class BIRKA(_ReductionEstimator):
    """Bilinear IRKA as an estimator. See :func:`bilimor.birka`."""

    _method = "birka"

    def __init__(self, order=2, tol=1e-6, max_iter=100, init="log_spaced_shifts",
                 random_state=0, sylvester_mode="auto", orthonormalize=True):
        self.order = order
        self.tol = tol
        self.max_iter = max_iter
        self.init = init
        self.random_state = random_state
        self.sylvester_mode = sylvester_mode
        self.orthonormalize = orthonormalize


class TBIRKA(_ReductionEstimator):
    """Truncated bilinear IRKA as an estimator. See :func:`bilimor.tbirka`."""

    _method = "tbirka"

    def __init__(self, order=2, n_terms=2, tol=1e-6, max_iter=100, init="log_spaced_shifts",
                 random_state=0, orthonormalize=False):
        self.order = order
        self.n_terms = n_terms
        self.tol = tol
        self.max_iter = max_iter
        self.init = init
        self.random_state = random_state
        self.orthonormalize = orthonormalize
