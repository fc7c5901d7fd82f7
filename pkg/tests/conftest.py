"""Shared fixtures: two reference flows and cheap building blocks.

The expensive session fixtures are the endurance run at the gap-loss
exponent (wide grid, 200 time units) and the off-critical contrast run;
both are consumed by several module tests and by most acceptance criteria,
so they are computed exactly once.
"""
import numpy as np
import pytest

from fdlab.profiles import make_params, make_sandwich
from fdlab.radial_grid import build_grid
from fdlab.fp_solver import InitialDataSpec, run
from fdlab import linear_flow


@pytest.fixture(scope="session")
def params_critical():
    return make_params(5, "critical")


@pytest.fixture(scope="session")
def bounds_default(params_critical):
    return make_sandwich(params_critical, 4.0, 1.0, 0.25)


@pytest.fixture(scope="session")
def bump_spec(bounds_default):
    return InitialDataSpec(
        bounds=bounds_default, center=2.5, width=0.5, amplitude=0.1,
        sign=1, rebalance=False,
    )


@pytest.fixture(scope="session")
def ref_run(params_critical, bump_spec):
    """Endurance run at the gap-loss exponent: the truncation radius is
    wide enough that the deviation front (diffusive in asinh r) stays far
    from the wall for the whole 200 time units."""
    grid = build_grid(5, 1.0e45, 1600, 0.25)
    return run(bump_spec, grid, s_end=200.0, cadence=0.1,
               params=params_critical, keep_snapshots=True)


@pytest.fixture(scope="session")
def contrast_run(bounds_default):
    """Same perturbation at m = 0.45, where the linearized operator keeps a
    spectral gap on the truncated domain; mass-rebalanced so the distance
    to the matched profile can decay to zero."""
    params = make_params(5, 0.45)
    bounds = make_sandwich(params, 4.0, 1.0, 0.25)
    spec = InitialDataSpec(bounds=bounds, center=2.5, width=0.5,
                           amplitude=0.1, sign=1, rebalance=True)
    grid = build_grid(5, 400.0, 1200, 0.25)
    return run(spec, grid, s_end=20.0, cadence=0.25, params=params,
               keep_snapshots=True)


@pytest.fixture(scope="session")
def small_run(params_critical, bump_spec):
    """Cheap critical flow for module-level checks."""
    grid = build_grid(5, 50.0, 200, 0.25)
    return run(bump_spec, grid, s_end=5.0, cadence=0.25,
               params=params_critical, keep_snapshots=True)


@pytest.fixture(scope="session")
def probe_operator(params_critical):
    """Linearized generator at the configuration the decay fits use."""
    grid = build_grid(5, 400.0, 1200, 0.25)
    return linear_flow.assemble(grid, params_critical, 1.0)
