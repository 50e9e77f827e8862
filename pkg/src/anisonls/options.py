"""Solver options shared by the scalar and coupled solvers."""

from dataclasses import asdict, dataclass

from ._descent import DescentOptions


@dataclass
class SolverOptions:
    """Descent settings.

    Parameters
    ----------
    max_iters : int
        Iteration cap per descent run.
    step_size : float
        Initial step; grown by 1.5 after accepted steps.
    backtrack : float
        Step reduction factor on Armijo failure.
    energy_tol : float
        Relative change of the merit function accepted as stagnation.
    residual_tol : float
        Relative Pohozaev tolerance, ``|P| <= residual_tol * s * A``.
    el_tol : float
        Relative Euler-Lagrange tolerance.
    project_every : int
        Descent steps between Pohozaev projections (every step once the
        residual is small).
    seed : int or None
        Seed of the smooth random perturbation of the initial guess;
        ``None`` starts from the unperturbed Gaussian.
    n_seeds : int
        Number of seeds for the coupled solver's multi-start.
    steiner_every : int
        Apply double Steiner symmetrization every this many steps during the
        coupled descent (0 disables).
    """

    max_iters: int = 3000
    step_size: float = 1.0
    backtrack: float = 0.5
    energy_tol: float = 1e-12
    residual_tol: float = 1e-6
    el_tol: float = 1e-5
    project_every: int = 10
    seed: int | None = 0
    n_seeds: int = 3
    steiner_every: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.project_every < 1:
            raise ValueError("project_every must be >= 1")
        for name in ("step_size", "energy_tol", "residual_tol", "el_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")
        if self.steiner_every < 0:
            raise ValueError("steiner_every must be >= 0")

    def descent(self):
        return DescentOptions(
            max_iters=self.max_iters,
            step_size=self.step_size,
            backtrack=self.backtrack,
            energy_tol=self.energy_tol,
            residual_tol=self.residual_tol,
            el_tol=self.el_tol,
            project_every=self.project_every,
        )

    def as_dict(self):
        return asdict(self)
