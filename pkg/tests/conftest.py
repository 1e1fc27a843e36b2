import numpy as np
import pytest

from spvar.grid import Grid, ScalarField


def gaussian(grid: Grid, width: float = 1.0, amp: float = 1.0, center=(0.0, 0.0, 0.0)) -> ScalarField:
    """``amp * exp(-|x - c|^2 / (2 width^2))`` on ``grid``."""
    x, y, z = grid.coords
    r2 = (x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2
    return ScalarField(grid, amp * np.exp(-r2 / (2.0 * width**2)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def coercive_record():
    """Converged solution for rho = (1 + |x|^2), p = 2.5 on a resolved grid."""
    from spvar.charge import CoercivePower
    from spvar.functional import ProblemParams
    from spvar.grid import make_grid
    from spvar.solvers import mountain_pass_solve

    g = make_grid(64, 4.0)
    return mountain_pass_solve(CoercivePower(1.0, 2.0), ProblemParams(2.5), gaussian(g, 0.7, 2.0))


BUMP_EPS = (0.4, 0.2, 0.1, 0.05)


@pytest.fixture(scope="session")
def bump_sweep():
    """eps sweep for an off-centre dip in a constant background, p = 3, 64^3."""
    import time

    from spvar.charge import BumpedConstant
    from spvar.functional import ProblemParams
    from spvar.semiclassical import eps_sweep

    cd = BumpedConstant(1.0, 0.8, 1.0, (0.5, 0.3, 0.0))
    t0 = time.perf_counter()
    records, reports = eps_sweep(cd, ProblemParams(3.0), BUMP_EPS, n=64)
    return cd, records, reports, time.perf_counter() - t0


# ------------------------------------------------------------ acceptance log

ACCEPTANCE: dict = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
