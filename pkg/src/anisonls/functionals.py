"""Energy, Pohozaev functional, gradient and the scalar fiber reduction.

Along the mass-preserving dilation ``u_t = t**((1+s)/2) u(t**s x, t y)`` the
energy of a pair reduces to

    phi(t) = A/2 t**(2s) - Bp t**ep - Bq t**eq - Br t**er

with ``A`` the total kinetic energy and ``B*`` the nonlinear integrals, so
every fiber quantity is a closed-form function of four numbers.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import grid as gs
from ._validation import check_order, check_positive, check_real, check_window_exponent, window_bounds

PROJECTION_RTOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Constants of the coupled problem.

    Parameters
    ----------
    s : float
        Fractional order in y, ``1/2 < s < 1``.
    p, q : float
        Self-interaction exponents.
    r1, r2 : float
        Coupling exponents, both above 1.
    mu1, mu2, beta : float
        Interaction strengths, positive.
    a, b : float
        Prescribed masses, positive.

    ``p``, ``q`` and ``r1 + r2`` must lie strictly inside
    ``(2(1+3s)/(1+s), 2(1+s)/(1-s))``.
    """

    s: float
    p: float
    q: float
    r1: float
    r2: float
    mu1: float = 1.0
    mu2: float = 1.0
    beta: float = 1.0
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        s = check_order(self.s)
        object.__setattr__(self, "s", s)
        for name in ("mu1", "mu2", "beta", "a", "b"):
            object.__setattr__(self, name, check_positive(getattr(self, name), name))
        for name in ("r1", "r2"):
            value = check_real(getattr(self, name), name)
            if value <= 1:
                raise ValueError(f"{name} must exceed 1, got {value}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "p", check_window_exponent(self.p, s, "p"))
        object.__setattr__(self, "q", check_window_exponent(self.q, s, "q"))
        check_window_exponent(self.r1 + self.r2, s, "r1+r2")

    @property
    def window(self):
        return window_bounds(self.s)

    @property
    def ep(self):
        return (1.0 + self.s) * (self.p - 2.0) / 2.0

    @property
    def eq(self):
        return (1.0 + self.s) * (self.q - 2.0) / 2.0

    @property
    def er(self):
        return (1.0 + self.s) * (self.r1 + self.r2 - 2.0) / 2.0

    def swapped(self):
        """Parameters with the roles of the two components exchanged."""
        return ModelParams(
            s=self.s, p=self.q, q=self.p, r1=self.r2, r2=self.r1,
            mu1=self.mu2, mu2=self.mu1, beta=self.beta, a=self.b, b=self.a,
        )

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class StatePair:
    """Two fields on a common grid."""

    u: gs.Field
    v: gs.Field

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise ValueError("u and v must share a grid")

    @property
    def grid(self):
        return self.u.grid

    @property
    def nonnegative(self):
        return bool(self.u.values.min() >= 0 and self.v.values.min() >= 0)

    @classmethod
    def from_arrays(cls, grid, u, v):
        return cls(gs.Field(grid, u), gs.Field(grid, v))


@dataclass(frozen=True)
class FiberIntegrals:
    """Coefficients of the fiber reduction ``phi``."""

    A: float
    Bp: float
    Bq: float
    Br: float
    ep: float
    eq: float
    er: float
    s: float

    def terms(self):
        return ((self.Bp, self.ep), (self.Bq, self.eq), (self.Br, self.er))


@dataclass(frozen=True)
class CoercivityConstants:
    tau: float
    c0: float


@dataclass(frozen=True)
class _Integrals:
    kinetic_u: float
    kinetic_v: float
    lp_u: float
    lp_v: float
    coupling: float


def _integrals(state, params):
    u, v = state.u, state.v
    return _Integrals(
        kinetic_u=gs.kinetic(u, params.s),
        kinetic_v=gs.kinetic(v, params.s),
        lp_u=gs.lp_integral(u, params.p),
        lp_v=gs.lp_integral(v, params.q),
        coupling=gs.coupling_integral(u, v, params.r1, params.r2),
    )


def fiber_integrals(state, params):
    """Collect ``A, Bp, Bq, Br`` and the exponents for a state."""
    ints = _integrals(state, params)
    return _fiber_from_integrals(ints, params)


def _fiber_from_integrals(ints, params):
    return FiberIntegrals(
        A=ints.kinetic_u + ints.kinetic_v,
        Bp=params.mu1 / params.p * ints.lp_u,
        Bq=params.mu2 / params.q * ints.lp_v,
        Br=params.beta * ints.coupling,
        ep=params.ep,
        eq=params.eq,
        er=params.er,
        s=params.s,
    )


def energy(state, params):
    """``J = A/2 - mu1/p int|u|^p - mu2/q int|v|^q - beta int|u|^r1 |v|^r2``."""
    return fiber_value(fiber_integrals(state, params), 1.0)


def pohozaev(state, params):
    """Scaling functional ``P = s A - ep Bp - eq Bq - er Br``."""
    return fiber_derivative(fiber_integrals(state, params), 1.0)


def _abs_power_signed(values, exponent):
    # |w|^(exponent-1) sign(w) == |w|^(exponent-2) w, finite at w = 0 for exponent > 1
    return np.sign(values) * np.abs(values) ** (exponent - 1.0)


def gradient_arrays(u, v, grid, params):
    """Variational derivative of ``J`` as two arrays."""
    s = params.s
    symbol = gs._half_symbol(grid, s)
    au, av = np.abs(u), np.abs(v)
    gu = gs._apply_symbol(u, grid, symbol) - params.mu1 * _abs_power_signed(u, params.p)
    gv = gs._apply_symbol(v, grid, symbol) - params.mu2 * _abs_power_signed(v, params.q)
    if params.beta:
        gu -= params.beta * params.r1 * _abs_power_signed(u, params.r1) * av**params.r2
        gv -= params.beta * params.r2 * _abs_power_signed(v, params.r2) * au**params.r1
    return gu, gv


def gradient(state, params):
    """Pair of variational derivatives of ``J``.

    First component ``L u - mu1 |u|^(p-2) u - beta r1 |u|^(r1-2) u |v|^r2``,
    second analogous; pairing with a direction is the grid inner product.
    """
    gu, gv = gradient_arrays(state.u.values, state.v.values, state.grid, params)
    return StatePair(gs.Field(state.grid, gu), gs.Field(state.grid, gv))


def pair_inner(first, second):
    return gs.inner(first.u, second.u) + gs.inner(first.v, second.v)


def _check_t(t):
    t = check_real(t, "t")
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    return t


def fiber_value(fi, t):
    t = _check_t(t)
    return 0.5 * fi.A * t ** (2 * fi.s) - sum(b * t**e for b, e in fi.terms())


def fiber_derivative(fi, t):
    t = _check_t(t)
    return fi.s * fi.A * t ** (2 * fi.s - 1) - sum(e * b * t ** (e - 1) for b, e in fi.terms())


def fiber_second(fi, t):
    t = _check_t(t)
    s = fi.s
    return s * (2 * s - 1) * fi.A * t ** (2 * s - 2) - sum(
        e * (e - 1) * b * t ** (e - 2) for b, e in fi.terms()
    )


def fiber_second_on_manifold(fi):
    """``phi''(1)`` rewritten with ``P = 0``: ``-sum e (e - 2s) B``.

    Equals :func:`fiber_second` at ``t = 1`` when the state lies on the
    Pohozaev manifold, and is negative whenever some ``B`` is positive.
    """
    return -sum(e * (e - 2 * fi.s) * b for b, e in fi.terms())


def pohozaev_time(fi):
    """Unique ``t0 > 0`` with ``phi'(t0) = 0`` (the maximizer of ``phi``).

    Solves ``g(t) = s A - sum e B t**(e - 2s) = 0``; ``g`` is strictly
    decreasing, so the root is bracketed by doubling/halving from ``t = 1``
    and refined by Newton steps in ``log t`` guarded by bisection.
    """
    if not fi.A > 0 or not any(b > 0 for b, _ in fi.terms()):
        raise ValueError("degenerate fiber integrals: need A > 0 and a positive nonlinear term")
    s = fi.s
    terms = [(e * b, e - 2 * s) for b, e in fi.terms() if b > 0]
    sA = s * fi.A

    def g(log_t):
        return sA - sum(c * math.exp(k * log_t) for c, k in terms)

    def dg(log_t):
        return -sum(c * k * math.exp(k * log_t) for c, k in terms)

    lo = hi = 0.0
    step = math.log(2.0)
    if g(0.0) > 0:
        while g(hi) > 0:
            lo, hi = hi, hi + step
    else:
        while g(lo) <= 0:
            lo, hi = lo - step, lo
    if g(hi) == 0:
        return math.exp(hi)
    x = 0.5 * (lo + hi)
    for _ in range(200):
        gx = g(x)
        if gx > 0:
            lo = x
        else:
            hi = x
        d = dg(x)
        x_new = x - gx / d if d != 0 else 0.5 * (lo + hi)
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= PROJECTION_RTOL * 0.1 or hi - lo <= PROJECTION_RTOL * 0.1:
            x = x_new
            break
        x = x_new
    return math.exp(x)


def single_term_time(A, B, e, s):
    """Closed-form maximizer of ``A/2 t^(2s) - B t^e``."""
    return (s * A / (e * B)) ** (1.0 / (e - 2 * s))


def _dilate_pair(state, t, s):
    return StatePair(gs.fiber_resample(state.u, t, s), gs.fiber_resample(state.v, t, s))


def project_state(state, params, t=None, rtol=1e-10, max_rounds=8):
    """Fiber-dilate both components onto the Pohozaev manifold.

    Resampling is not exactly the discrete fiber map, so the dilation is
    repeated until the next Pohozaev time is within ``rtol`` of 1. With an
    explicit ``t`` a single dilation by ``t`` is applied.

    Returns
    -------
    (StatePair, float)
        The dilated pair and the accumulated dilation factor.
    """
    if t is not None:
        return _dilate_pair(state, check_positive(t, "t"), params.s), t
    total = 1.0
    for _ in range(max_rounds):
        t = pohozaev_time(fiber_integrals(state, params))
        state = _dilate_pair(state, t, params.s)
        total *= t
        if abs(t - 1.0) <= rtol:
            break
    return state, total


def coercivity_constants(params):
    s = params.s
    ratios = [2 * s / ((x - 2) * (1 + s)) for x in (params.p, params.q, params.r1 + params.r2)]
    tau = max(ratios)
    return CoercivityConstants(tau=tau, c0=0.5 - tau)


def _branch_bound(x, coefficient, c_h, total_mass, s):
    d = (1 + s) * (x - 2) - 4 * s
    return (3 * coefficient * c_h) ** (-4 * s / d) * (1.0 / total_mass) ** ((2 * s * x - (x - 2) * (1 + s)) / d)


def delta_branches(params, gn):
    """The three kinetic lower bounds whose minimum is ``delta``.

    ``gn`` maps ``'p'``, ``'q'`` and ``'r'`` to the combined-form sharp
    constant for exponents ``p``, ``q`` and ``r1 + r2`` (either floats or
    objects with a ``c_h`` attribute).
    """
    s = params.s
    c = {key: float(getattr(gn[key], "c_h", gn[key])) for key in ("p", "q", "r")}
    total = params.a + params.b
    r = params.r1 + params.r2
    return {
        "p": _branch_bound(params.p, (params.p - 2) * (1 + s) / (2 * s * params.p) * params.mu1, c["p"], total, s),
        "q": _branch_bound(params.q, (params.q - 2) * (1 + s) / (2 * s * params.q) * params.mu2, c["q"], total, s),
        "r": _branch_bound(r, (r - 2) * (1 + s) / (2 * s) * params.beta, c["r"], total, s),
    }


def delta_lower_bound(params, gn):
    """Lower bound on the kinetic energy of any Pohozaev-manifold state with masses ``<= (a, b)``."""
    return min(delta_branches(params, gn).values())

