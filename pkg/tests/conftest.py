import time

import numpy as np
import pytest

from emqs.formulations import Excitation
from emqs.grid import GridSpec, build_grid
from emqs.materials import VOID, MaterialBox, build_material_field
from emqs.operators import build_operators
from emqs.scenarios import Problem, load_scenario

COPPER = 5.96e7


def column_problem(n=2, kappa=COPPER, h=0.01, background=VOID, kappa_hat=None, eps_r=1.0):
    """n^3 grid with a one-cell conductor column along z at the x=y=0 corner,
    driven at z=0 and grounded at the top."""
    from emqs.materials import KappaHatPolicy

    grid = build_grid(GridSpec(n, n, n, h, h, h))
    boxes = [MaterialBox((0, 0, 0), (h, h, n * h), kappa=kappa, eps_r=eps_r, tag="conductor")]
    mat = build_material_field(grid, background, boxes, kappa_hat or KappaHatPolicy())
    ops = build_operators(grid, mat)
    xyz = grid.node_coords()
    foot = (xyz[:, 0] <= h) & (xyz[:, 1] <= h)
    src = np.flatnonzero(foot & (xyz[:, 2] == 0))
    gnd = np.flatnonzero(foot & np.isclose(xyz[:, 2], n * h))
    return Problem(grid, mat, ops, Excitation(src, gnd, 1.0, 0.0))


@pytest.fixture(scope="session")
def copper2():
    return column_problem(2)


@pytest.fixture(scope="session")
def mini():
    return load_scenario("mini").build()


@pytest.fixture(scope="session")
def coil_scenario():
    return load_scenario("coil")


@pytest.fixture(scope="session")
def coil(coil_scenario):
    return coil_scenario.build()


W7 = 2 * np.pi * 1e7
W5 = 2 * np.pi * 1e5


# acceptance criteria: one line per criterion in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}
SUITE_LIMIT_S = 300.0


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(ok), detail)


def pytest_sessionstart(session):
    session.config._emqs_t0 = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    elapsed = time.perf_counter() - config._emqs_t0
    if 10 in ACCEPTANCE:
        ok, detail = ACCEPTANCE[10]
        ACCEPTANCE[10] = (ok and elapsed <= SUITE_LIMIT_S, f"{detail}; suite wall time {elapsed:.1f} s (limit {SUITE_LIMIT_S:.0f} s)")
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        if n in ACCEPTANCE:
            ok, detail = ACCEPTANCE[n]
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d}: NOT RUN")
