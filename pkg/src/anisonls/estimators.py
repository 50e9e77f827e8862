"""scikit-learn style wrappers around the solvers and the rearrangement.

The solvers take a :class:`~anisonls.grid.Grid` (or ``None`` for the
default) in place of a design matrix; hyperparameters follow the usual
``get_params``/``set_params`` protocol and fitted results carry a trailing
underscore.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import grid as gs
from .functionals import ModelParams
from .options import SolverOptions
from .rearrangement import _steiner_axis
from .scalar import scaled_solution, solve_scalar_base
from .system import solve_system


def _options(est):
    return SolverOptions(
        max_iters=est.max_iters,
        residual_tol=est.residual_tol,
        el_tol=est.el_tol,
        project_every=est.project_every,
        seed=est.seed,
    )


class ScalarGroundStateSolver(BaseEstimator):
    """Ground state of the single equation at strength ``mu`` and mass ``mass``.

    ``fit`` solves the base problem and realizes the scaled solution.

    Attributes
    ----------
    base_ : ScalarGroundState
    solution_ : ScaledSolution
    lambda_ : float
    level_ : float
    converged_ : bool
    """

    def __init__(self, s=0.75, p=5.0, mu=1.0, mass=1.0, max_iters=3000, residual_tol=1e-6,
                 el_tol=1e-5, project_every=10, seed=0, isotropic=False):
        self.s = s
        self.p = p
        self.mu = mu
        self.mass = mass
        self.max_iters = max_iters
        self.residual_tol = residual_tol
        self.el_tol = el_tol
        self.project_every = project_every
        self.seed = seed
        self.isotropic = isotropic

    def fit(self, X=None, y=None):
        """Solve on grid ``X`` (a Grid, or ``None`` for the default base grid)."""
        if X is not None and not isinstance(X, gs.Grid):
            raise TypeError("X must be a Grid or None")
        self.base_ = solve_scalar_base(self.s, self.p, X, _options(self), isotropic=self.isotropic)
        if self.isotropic:
            self.solution_ = None
            self.lambda_ = 1.0
            self.level_ = self.base_.level
        else:
            self.solution_ = scaled_solution(self.base_, self.mu, self.mass)
            self.lambda_ = self.solution_.lam
            self.level_ = self.solution_.level
        self.converged_ = self.base_.converged
        return self

    def score(self, X=None, y=None):
        """Negative Euler-Lagrange residual of the base profile (higher is better)."""
        check_is_fitted(self, "base_")
        return -self.base_.el_residual


class CoupledGroundStateSolver(BaseEstimator):
    """Coupled normalized ground state; ``fit`` runs :func:`anisonls.system.solve_system`.

    Attributes
    ----------
    report_ : SolveReport
    state_ : StatePair
    level_ : float
    lambdas_ : tuple
    converged_ : bool
    """

    def __init__(self, s=0.75, p=5.0, q=5.0, r1=1.5, r2=3.0, mu1=1.0, mu2=1.0, beta=1.0, a=1.0, b=1.0,
                 max_iters=3000, residual_tol=1e-6, el_tol=1e-5, project_every=10, seed=0, n_seeds=3,
                 verify=True):
        self.s = s
        self.p = p
        self.q = q
        self.r1 = r1
        self.r2 = r2
        self.mu1 = mu1
        self.mu2 = mu2
        self.beta = beta
        self.a = a
        self.b = b
        self.max_iters = max_iters
        self.residual_tol = residual_tol
        self.el_tol = el_tol
        self.project_every = project_every
        self.seed = seed
        self.n_seeds = n_seeds
        self.verify = verify

    def model_params(self):
        return ModelParams(
            s=self.s, p=self.p, q=self.q, r1=self.r1, r2=self.r2,
            mu1=self.mu1, mu2=self.mu2, beta=self.beta, a=self.a, b=self.b,
        )

    def fit(self, X=None, y=None):
        if X is not None and not isinstance(X, gs.Grid):
            raise TypeError("X must be a Grid or None")
        opts = _options(self)
        opts.n_seeds = self.n_seeds
        self.report_ = solve_system(self.model_params(), X, opts, verify=self.verify)
        self.state_ = self.report_.state
        self.level_ = self.report_.level_estimate
        self.lambdas_ = (self.report_.lambda1, self.report_.lambda2)
        self.converged_ = self.report_.converged
        return self


class SteinerSymmetrizer(TransformerMixin, BaseEstimator):
    """Steiner symmetrization as a stateless transformer.

    Parameters
    ----------
    axes : {"xy", "x", "y"}
        ``"xy"`` applies x first, then y.

    ``transform`` accepts a Field, a 2-D array ``(ny, nx)`` or a stack of
    such arrays, and returns the same kind of object.
    """

    def __init__(self, axes="xy"):
        self.axes = axes

    def fit(self, X=None, y=None):
        if self.axes not in ("xy", "x", "y"):
            raise ValueError(f"axes must be 'xy', 'x' or 'y', got {self.axes!r}")
        self.n_axes_ = len(self.axes)
        return self

    def transform(self, X):
        check_is_fitted(self, "n_axes_")
        if isinstance(X, gs.Field):
            return X.with_values(self._apply(X.values))
        values = np.asarray(X, dtype=float)
        if values.ndim < 2:
            raise ValueError("expected an array with at least two dimensions (..., ny, nx)")
        return self._apply(values)

    def _apply(self, values):
        for name in self.axes:
            values = _steiner_axis(values, axis=-1 if name == "x" else -2)
        return values
