"""Preconditioned descent of the fiber-max functional on products of mass spheres.

For a tuple of components with fixed masses the merit function is

    Psi(w) = max_t J(w_t) = phi_w(t0(w)),

a closed-form function of a handful of integrals. Its gradient is the
gradient of ``J`` with every term weighted by the power of ``t0`` it carries
in ``phi`` (envelope theorem). Psi is bounded below on the mass spheres,
unlike ``J``, so plain backtracking gives a monotone method; every
``project_every`` steps the state is dilated to ``t0`` so it sits on the
Pohozaev manifold.
"""

from dataclasses import dataclass, field

import numpy as np

from . import grid as gs
from .functionals import FiberIntegrals, pohozaev_time


@dataclass
class Evaluation:
    """Spectral data and integrals of one state."""

    hats: list
    kinetics: list
    self_integrals: list
    coupling: float
    fiber: FiberIntegrals
    t0: float
    psi: float


class FiberProblem:
    """Energy ``sum K_i/2 - sum mu_i/p_i int|w_i|^p_i - beta int|w_0|^r1 |w_1|^r2``.

    Parameters
    ----------
    grid : Grid
    s : float
        Fractional order.
    self_terms : sequence of (mu, p)
        One pair per component.
    coupling : (beta, r1, r2) or None
        Only for two components.
    isotropic : bool
        Use ``xi**2 + eta**2`` instead of the mixed symbol (reference runs).
    """

    def __init__(self, grid, s, self_terms, coupling=None, isotropic=False):
        self.grid = grid
        self.s = s
        self.self_terms = [(float(mu), float(p)) for mu, p in self_terms]
        self.coupling = coupling if coupling is not None and coupling[0] != 0 else None
        if self.coupling is not None and len(self.self_terms) != 2:
            raise ValueError("coupling needs exactly two components")
        self.symbol = gs._half_symbol(grid, s, isotropic)
        self.weights = gs._half_weights(grid)
        # the isotropic operator scales like order 1 in both directions
        self.fiber_order = 1.0 if isotropic else s
        order = self.fiber_order
        self.exponents = [(1 + order) * (p - 2) / 2 for _, p in self.self_terms]
        if self.coupling is not None:
            _, r1, r2 = self.coupling
            self.coupling_exponent = (1 + order) * (r1 + r2 - 2) / 2
        else:
            self.coupling_exponent = 0.0

    @property
    def n_components(self):
        return len(self.self_terms)

    def kinetic_from_hat(self, hat):
        return gs._kinetic_from_coefficients(hat, self.grid, self.symbol)

    def evaluate(self, comps):
        dA = self.grid.cell_area
        hats = [gs._forward(w) for w in comps]
        kinetics = [self.kinetic_from_hat(h) for h in hats]
        self_integrals = [dA * float(np.sum(np.abs(w) ** p)) for w, (_, p) in zip(comps, self.self_terms)]
        coupling = 0.0
        if self.coupling is not None:
            _, r1, r2 = self.coupling
            coupling = dA * float(np.sum(np.abs(comps[0]) ** r1 * np.abs(comps[1]) ** r2))
        fiber = self.fiber(kinetics, self_integrals, coupling)
        t0 = pohozaev_time(fiber)
        psi = 0.5 * fiber.A * t0 ** (2 * self.fiber_order) - sum(b * t0**e for b, e in fiber.terms())
        return Evaluation(hats, kinetics, self_integrals, coupling, fiber, t0, psi)

    def fiber(self, kinetics, self_integrals, coupling):
        b = [mu / p * n for (mu, p), n in zip(self.self_terms, self_integrals)]
        e = list(self.exponents)
        while len(b) < 2:
            b.append(0.0)
            e.append(e[0])
        beta = self.coupling[0] if self.coupling is not None else 0.0
        er = self.coupling_exponent if self.coupling is not None else e[0]
        return FiberIntegrals(
            A=float(sum(kinetics)), Bp=b[0], Bq=b[1], Br=beta * coupling,
            ep=e[0], eq=e[1], er=er, s=self.fiber_order,
        )

    def nonlinear_terms(self, comps):
        """Per component, the list of ``(fiber exponent, real-space term)`` pieces of the gradient."""
        terms = []
        for i, (w, (mu, p)) in enumerate(zip(comps, self.self_terms)):
            terms.append([(self.exponents[i], mu * np.abs(w) ** (p - 1) * np.sign(w))])
        if self.coupling is not None:
            beta, r1, r2 = self.coupling
            u, v = comps
            au, av = np.abs(u), np.abs(v)
            e = self.coupling_exponent
            terms[0].append((e, beta * r1 * au ** (r1 - 1) * np.sign(u) * av**r2))
            terms[1].append((e, beta * r2 * av ** (r2 - 1) * np.sign(v) * au**r1))
        return terms

    def term_hats(self, comps):
        return [[(e, gs._forward(term)) for e, term in per] for per in self.nonlinear_terms(comps)]

    def gradient_hats(self, comps, ev, t, term_hats=None):
        """Fourier transforms of the ``t``-weighted gradient (``t = 1`` gives ``J'``)."""
        if term_hats is None:
            term_hats = self.term_hats(comps)
        scale = t ** (2 * self.fiber_order)
        return [
            scale * self.symbol * h - sum(t**e * th for e, th in per)
            for h, per in zip(ev.hats, term_hats)
        ]

    def pohozaev_gradient_hats(self, ev, term_hats):
        """Fourier transforms of the gradient of ``P = sA - sum e B``."""
        return [
            2 * self.fiber_order * self.symbol * h - sum(e * th for e, th in per)
            for h, per in zip(ev.hats, term_hats)
        ]

    def hat_inner(self, first, second):
        grid = self.grid
        return grid.cell_area / grid.size * float(np.sum((first.real * second.real + first.imag * second.imag) * self.weights))

    def stationarity(self, comps, ev, t=1.0, term_hats=None):
        """Multipliers and the relative residual ``||G + lambda w|| / ||w||``."""
        ghats = self.gradient_hats(comps, ev, t, term_hats)
        lambdas, res2, norm2 = [], 0.0, 0.0
        for g, h in zip(ghats, ev.hats):
            m = self.hat_inner(h, h)
            lam = -self.hat_inner(g, h) / m
            r = g + lam * h
            lambdas.append(lam)
            res2 += self.hat_inner(r, r)
            norm2 += m
        return lambdas, float(np.sqrt(res2 / norm2)), ghats


@dataclass
class DescentOptions:
    max_iters: int = 4000
    step_size: float = 1.0
    backtrack: float = 0.5
    energy_tol: float = 1e-12
    residual_tol: float = 1e-6
    el_tol: float = 1e-5
    project_every: int = 10
    armijo: float = 1e-4
    collapse_fraction: float = 1e-8
    max_step: float = 50.0


@dataclass
class DescentResult:
    comps: list
    evaluation: Evaluation
    iterations: int
    converged: bool
    pohozaev_rel: float
    el_residual: float
    lambdas: list
    history: list = field(default_factory=list)
    status: str = ""


class CollapseError(RuntimeError):
    """A component's mass fell below the collapse threshold during descent."""

    def __init__(self, message, comps):
        super().__init__(message)
        self.comps = comps


def _renormalize(comps, masses, grid, collapse_fraction):
    out = []
    for i, (w, m) in enumerate(zip(comps, masses)):
        w = np.abs(w)
        current = grid.cell_area * float(np.sum(w * w))
        if not current > collapse_fraction * m:
            raise CollapseError(f"component {i} collapsed (mass {current:.3e} of target {m:.3e})", comps)
        out.append(w * np.sqrt(m / current))
    return out


def _dilate(comps, grid, order, t):
    if t == 1.0:
        return [w.copy() for w in comps]
    return [
        gs.resample_two_factor(gs.Field(grid, w), t**order, t, t ** ((1 + order) / 2), check_decay=False).values
        for w in comps
    ]


def fiber_descent(problem, comps, masses, opts, callback=None, symmetrize=None, symmetrize_every=0):
    """Minimize ``J`` on the Pohozaev manifold intersected with the mass spheres.

    The merit function is the fiber maximum ``Psi``; steps follow the
    preconditioned gradient projected onto the tangent space of the mass and
    Pohozaev constraints, are accepted by Armijo backtracking on ``Psi``, and
    are followed by ``abs`` and exact mass renormalization. Every
    ``project_every`` steps (every step once the residual is small) the state
    is dilated to its Pohozaev time.

    Converged means, after a projection: relative Pohozaev residual
    ``|P|/(sA) <= residual_tol``, Euler-Lagrange residual ``<= el_tol``, and
    either a relative merit change ``<= energy_tol`` or a vanishing slope.

    ``symmetrize``, if given, maps the component list to a rearranged list
    and is applied every ``symmetrize_every`` iterations while the residual
    is still large.
    """
    grid, s = problem.grid, problem.fiber_order
    comps = _renormalize(comps, masses, grid, opts.collapse_fraction)
    comps, ev = _project(problem, comps, masses, opts)
    step = opts.step_size
    history = []
    since_projection = 0
    near = False
    status = "max_iters"
    iteration = 0
    for iteration in range(1, opts.max_iters + 1):
        term_hats = problem.term_hats(comps)
        lambdas, res, ghats = problem.stationarity(comps, ev, ev.t0, term_hats)
        directions_hat = _tangent_direction(problem, ev, ghats, term_hats, lambdas)
        slope = sum(problem.hat_inner(g, d) for g, d in zip(ghats, directions_hat))
        flat = slope >= -1e-15 * max(abs(ev.psi), 1e-300)
        change = 0.0
        if not flat:
            directions = [gs._inverse(d, grid) for d in directions_hat]
            accepted = False
            while step > 1e-10:
                trial = _renormalize(
                    [w + step * d for w, d in zip(comps, directions)], masses, grid, opts.collapse_fraction
                )
                trial_ev = problem.evaluate(trial)
                if trial_ev.psi <= ev.psi + opts.armijo * step * slope:
                    accepted = True
                    break
                step *= opts.backtrack
            if accepted:
                change = abs(ev.psi - trial_ev.psi) / max(abs(ev.psi), 1e-300)
                comps, ev = trial, trial_ev
                step = min(step * 1.5, opts.max_step)
            else:
                flat = True
                step = opts.step_size
        history.append((iteration, ev.psi, ev.t0, res))
        if callback is not None:
            callback(iteration, comps, ev, res)
        since_projection += 1
        near = near or res < 10 * opts.el_tol
        if symmetrize is not None and symmetrize_every and not near and iteration % symmetrize_every == 0:
            comps = _renormalize(symmetrize(comps), masses, grid, opts.collapse_fraction)
            ev = problem.evaluate(comps)
            since_projection = opts.project_every
        if not (flat or near or since_projection >= opts.project_every):
            continue
        since_projection = 0
        comps, ev = _project(problem, comps, masses, opts)
        _, el, _ = problem.stationarity(comps, ev, 1.0)
        pohozaev_rel = abs(_pohozaev(ev)) / (s * ev.fiber.A)
        if pohozaev_rel <= opts.residual_tol and el <= opts.el_tol and (flat or change <= opts.energy_tol):
            status = "converged"
            break
        if flat:
            status = "stationary"
            break
    lambdas, el, _ = problem.stationarity(comps, ev, 1.0)
    pohozaev_rel = abs(_pohozaev(ev)) / (s * ev.fiber.A)
    return DescentResult(
        comps=comps, evaluation=ev, iterations=iteration, converged=status == "converged",
        pohozaev_rel=pohozaev_rel, el_residual=el, lambdas=lambdas, history=history, status=status,
    )


def _project(problem, comps, masses, opts, rtol=1e-10, max_rounds=4):
    # resampling is not exactly the discrete fiber map, so repeat the
    # dilation until the Pohozaev time is 1 to within rtol
    ev = problem.evaluate(comps)
    for _ in range(max_rounds):
        if abs(ev.t0 - 1.0) <= rtol:
            break
        comps = _dilate(comps, problem.grid, problem.fiber_order, ev.t0)
        comps = _renormalize(comps, masses, problem.grid, opts.collapse_fraction)
        ev = problem.evaluate(comps)
    return comps, ev


def _tangent_direction(problem, ev, ghats, term_hats, lambdas):
    """Preconditioned gradient projected onto the tangent space of the constraints.

    Constraints: each component's mass, and the Pohozaev functional (which
    removes drift along the fiber direction). The projection is orthogonal
    in the preconditioned metric; the multipliers come from a small Gram
    solve.
    """
    n = len(ghats)
    precond = [1.0 / (problem.symbol + max(1.0, lam)) for lam in lambdas]
    normals = []
    for i, h in enumerate(ev.hats):
        vec = [np.zeros_like(h) for _ in range(n)]
        vec[i] = h
        normals.append(vec)
    normals.append(problem.pohozaev_gradient_hats(ev, term_hats))

    def dot(first, second, weighted):
        total = 0.0
        for i in range(n):
            other = second[i] * precond[i] if weighted else second[i]
            total += problem.hat_inner(first[i], other)
        return total

    k = len(normals)
    gram = np.empty((k, k))
    rhs = np.empty(k)
    for a in range(k):
        rhs[a] = -dot(normals[a], ghats, True)
        for b in range(a, k):
            gram[a, b] = gram[b, a] = dot(normals[a], normals[b], True)
    coef = np.linalg.lstsq(gram, rhs, rcond=1e-14)[0]
    direction = []
    for i in range(n):
        combined = ghats[i] + sum(coef[a] * normals[a][i] for a in range(k))
        direction.append(-combined * precond[i])
    return direction


def _pohozaev(ev):
    fi = ev.fiber
    return fi.s * fi.A - sum(e * b for b, e in fi.terms())
