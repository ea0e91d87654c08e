import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from turnpike.costs import TrackingTarget
from turnpike.domain import AdmissibleClass, DomainMask
from turnpike.fields import GridSpec, ScalarField
from turnpike.optimizer import random_admissible_mask
from turnpike.pde_core import solve_poisson

settings.register_profile('default', max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile('default')


def small_class(n=12, omega=(5, 7, 5, 7), N=2):
    grid = GridSpec(n, n, 1.0 / n)
    return AdmissibleClass(DomainMask.from_blocks(grid, [omega]), N)


@st.composite
def admissible_masks(draw, n=12, N=2, max_flips=60):
    """Random admissible masks reached by a walk of boundary flips from the full interior."""
    cls = small_class(n, N=N)
    seed = draw(st.integers(0, 2 ** 32 - 1))
    flips = draw(st.integers(0, max_flips))
    return cls, random_admissible_mask(cls, np.random.default_rng(seed), flips)


@st.composite
def random_masks(draw, n=8, density=0.7):
    """Arbitrary nonempty masks (not necessarily admissible) on an n-by-n grid."""
    grid = GridSpec(n, n, 1.0 / n)
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    active = rng.random(grid.shape) < density
    active[grid.frame()] = False
    active[n // 2, n // 2] = True
    return DomainMask(grid, active)


def block_field(grid, block, value):
    i0, i1, j0, j1 = block
    v = np.zeros(grid.shape)
    v[j0:j1, i0:i1] = value
    v[grid.frame()] = 0.0
    return ScalarField(grid, v)


@pytest.fixture(scope='session')
def planted_fixture():
    """48x48 standard fixture: omega, source, planted mask and the tracking target."""
    grid = GridSpec(48, 48, 1 / 48)
    omega = DomainMask.from_blocks(grid, [(20, 28, 20, 28)])
    f = block_field(grid, (8, 16, 28, 36), 10.0)
    planted = DomainMask.full_interior(grid).without_block((16, 20, 20, 28))
    z = solve_poisson(planted, f)
    target = TrackingTarget(z, omega, f, ScalarField.zeros(grid))
    return AdmissibleClass(omega, 2), target, planted


@pytest.fixture(scope='session')
def small_fixture():
    """24x24 analogue of the standard fixture for fast optimizer tests."""
    grid = GridSpec(24, 24, 1 / 24)
    omega = DomainMask.from_blocks(grid, [(10, 14, 10, 14)])
    f = block_field(grid, (4, 8, 14, 18), 10.0)
    planted = DomainMask.full_interior(grid).without_block((8, 10, 10, 14))
    z = solve_poisson(planted, f)
    target = TrackingTarget(z, omega, f, ScalarField.zeros(grid))
    return AdmissibleClass(omega, 2), target, planted


# -- acceptance report ---------------------------------------------------------

ACCEPTANCE_LINES = {}


def record_criterion(number, title, passed, detail):
    ACCEPTANCE_LINES[number] = f'{"PASS" if passed else "FAIL"} criterion {number} ({title}): {detail}'


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section('acceptance criteria')
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
