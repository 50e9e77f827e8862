"""Input checks shared by the public entry points."""

import math
import numbers


def check_order(s):
    """Return ``s`` as float after checking ``1/2 < s < 1``."""
    s = check_real(s, "s")
    if not 0.5 < s < 1.0:
        raise ValueError(f"fractional order s must lie in (1/2, 1), got {s}")
    return s


def check_real(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    return value


def check_positive(value, name):
    value = check_real(value, name)
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def window_bounds(s):
    """Lower and upper ends of the supercritical, Sobolev-subcritical window."""
    return 2.0 * (1.0 + 3.0 * s) / (1.0 + s), 2.0 * (1.0 + s) / (1.0 - s)


def check_window_exponent(value, s, name):
    """Check that an exponent lies strictly inside the admissible window.

    The error message names the violated end of the window.
    """
    value = check_real(value, name)
    lower, upper = window_bounds(s)
    if value <= lower:
        raise ValueError(
            f"{name}={value:g} is not above 2(1+3s)/(1+s)={lower:.6g} "
            f"(mass-supercritical window, s={s:g})"
        )
    if value >= upper:
        raise ValueError(
            f"{name}={value:g} is not below 2(1+s)/(1-s)={upper:.6g} "
            f"(Sobolev-subcritical window, s={s:g})"
        )
    return value


def check_same_grid(u, v):
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
