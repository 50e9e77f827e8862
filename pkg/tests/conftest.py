import json
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from anisonls import grid as gs
from anisonls.functionals import ModelParams, StatePair, pohozaev
from anisonls.scalar import solve_scalar_base
from anisonls.system import solve_system

_ACCEPTANCE_LINES = []


def gaussian(grid, cx=0.0, cy=0.0, wx=1.0, wy=1.0, amp=1.0):
    X, Y = grid.mesh()
    return gs.Field(grid, amp * np.exp(-0.5 * ((X - cx) / wx) ** 2 - 0.5 * ((Y - cy) / wy) ** 2))


def smooth_random(grid, rng, width=1.0, envelope=3.0):
    """Positive smooth random field: filtered noise under a Gaussian envelope."""
    noise = rng.standard_normal(grid.shape)
    damp = np.exp(-0.5 * np.add.outer((grid.eta * width) ** 2, (grid.xi * width) ** 2))
    noise = np.fft.ifft2(np.fft.fft2(noise) * damp).real
    noise /= np.abs(noise).max()
    X, Y = grid.mesh()
    bump = np.exp(-0.5 * (X**2 + Y**2) / envelope**2)
    return gs.Field(grid, bump * (1.2 + noise))


def random_pair(grid, rng):
    """Gaussian pair with random centers, widths and amplitudes (decayed in the box)."""
    fields = []
    for _ in range(2):
        fields.append(
            gaussian(
                grid,
                cx=rng.uniform(-1, 1), cy=rng.uniform(-1, 1),
                wx=rng.uniform(0.6, 1.4), wy=rng.uniform(0.6, 1.4),
                amp=rng.uniform(0.3, 2.0),
            )
        )
    return StatePair(*fields)


def amplitude_projected(state, params):
    """Scale both components by one constant so that the state lies on the Pohozaev set.

    Unlike the fiber dilation this keeps the shape, and with it the resolution.
    """
    def scaled(c):
        return StatePair(state.u.with_values(c * state.u.values), state.v.with_values(c * state.v.values))

    c = brentq(lambda c: pohozaev(scaled(c), params), 1e-3, 1e3, xtol=1e-14, rtol=1e-14)
    return scaled(c)


@pytest.fixture(scope="session")
def small_grid():
    return gs.Grid(8.0, 8.0, 64, 64)


@pytest.fixture(scope="session")
def params():
    return ModelParams(s=0.75, p=5.0, q=5.0, r1=1.5, r2=3.0)


@pytest.fixture(scope="session")
def base_fast():
    """Base profile at s = 0.9, p = 6 (a few seconds on its default grid)."""
    return solve_scalar_base(0.9, 6.0)


@pytest.fixture(scope="session")
def base_75():
    """Base profile at s = 0.75, p = 5."""
    return solve_scalar_base(0.75, 5.0)


@pytest.fixture(scope="session")
def coupled_run(params, base_75):
    """Three-seed coupled solve in the default regime, with its wall time."""
    start = time.perf_counter()
    report = solve_system(params, scalars={5.0: base_75})
    return report, time.perf_counter() - start


@pytest.fixture(scope="session")
def schema_validator():
    import jsonschema
    from referencing import Registry, Resource

    from anisonls.io import load_schema

    registry = Registry().with_resource("anisonls/defs", Resource.from_contents(load_schema("_defs")))

    def validate(name, document):
        if not isinstance(document, dict):
            document = json.loads(document)
        jsonschema.Draft202012Validator(load_schema(name), registry=registry).validate(document)

    return validate


@pytest.fixture
def record_criterion():
    def record(number, passed, detail):
        _ACCEPTANCE_LINES.append((number, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
