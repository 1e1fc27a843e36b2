import math

import numpy as np
import pytest

from spvar.charge import BumpedConstant, CoercivePower, Constant
from spvar.diagnostics import lower_bound_C, sobolev_radial
from spvar.functional import ProblemParams, energy, nehari_value
from spvar.grid import ScalarField, make_grid
from spvar.solvers import (
    ground_state_nehari,
    monotone_non_increasing,
    mountain_pass_solve,
    mu_continuation,
    nehari_project,
    nehari_scale,
)
from spvar.solvers.mountain_pass import radial_seed

from conftest import gaussian

ZERO = Constant(0.0)


# ---------------------------------------------------------------- Nehari scale

def test_nehari_scale_closed_form_without_charge():
    g = make_grid(16, 4.0)
    u = gaussian(g, 1.0, 0.7)
    pp = ProblemParams(4.0, mu=0.8)
    e = energy(u, ZERO, pp)
    want = ((e.dirichlet + e.mass) / (pp.mu * e.nonlinear)) ** (1.0 / (pp.p - 1.0))
    assert nehari_project(u, ZERO, pp) == pytest.approx(want, rel=1e-12)


def test_nehari_scale_fixed_point():
    g = make_grid(16, 4.0)
    u = gaussian(g, 1.0, 0.7)
    cd, pp = Constant(1.0), ProblemParams(4.0)
    t = nehari_project(u, cd, pp)
    v = ScalarField(g, t * u.values)
    assert nehari_project(v, cd, pp) == pytest.approx(1.0, abs=1e-10)
    assert abs(nehari_value(v, cd, pp)) < 1e-10 * energy(v, cd, pp).e_norm ** 2


def test_nehari_scale_against_bisection():
    g = make_grid(16, 4.0)
    u = gaussian(g, 1.0)
    cd, pp = Constant(1.0), ProblemParams(4.0)
    e = energy(u, cd, pp)
    A, B, C = e.dirichlet + e.mass, e.coulomb, e.nonlinear
    f = lambda t: A + t * t * B - t ** (pp.p - 1) * C
    lo, hi = 1e-3, 1e3
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) > 0 else (lo, mid)
    assert nehari_project(u, cd, pp) == pytest.approx(0.5 * (lo + hi), rel=1e-10)


def test_nehari_scale_regime_checks():
    with pytest.raises(ValueError):
        nehari_scale(1.0, 1.0, 1.0, 3.0, 1.0)
    with pytest.raises(ValueError):
        nehari_scale(1.0, 1.0, 0.0, 4.0, 1.0)


# ---------------------------------------------------------------- Nehari descent

def test_nehari_ground_state_uncoupled():
    g = make_grid(32, 4.0)
    rec = ground_state_nehari(ZERO, ProblemParams(4.0), gaussian(g, 0.5, 4.0))
    assert rec.converged
    assert rec.nehari_residual < 1e-6 * rec.h1_norm_sq
    assert rec.u.values.min() >= 0.0


def test_nehari_rejects_trivial_seed():
    g = make_grid(16, 4.0)
    with pytest.raises(ValueError):
        ground_state_nehari(ZERO, ProblemParams(4.0), ScalarField.zeros(g))
    with pytest.raises(ValueError):
        ground_state_nehari(ZERO, ProblemParams(3.0), gaussian(g))


@pytest.mark.slow
def test_nehari_ground_state_coupled_pohozaev():
    g = make_grid(96, 3.0)
    rec = ground_state_nehari(Constant(1.0), ProblemParams(4.0), gaussian(g, 0.3, 5.0))
    assert rec.converged
    assert rec.pohozaev_residual < 1e-2 * rec.pohozaev_scale


# ---------------------------------------------------------------- mountain pass

def test_mountain_pass_coercive(coercive_record):
    rec = coercive_record
    assert rec.converged
    assert rec.residual_l2 < rec.tol
    assert rec.nehari_residual < 1e-6 * rec.h1_norm_sq
    assert rec.pohozaev_residual < 1e-2 * rec.pohozaev_scale
    assert rec.c >= lower_bound_C(0.0, 2.5, sobolev_radial(2.5))
    # the scaling path through the solution peaks at the solution itself
    assert rec.path_value >= rec.c * (1 - 1e-6)


def test_bump_lowers_level():
    g = make_grid(48, 6.0)
    seed = gaussian(g, 0.8, 3.0)
    pp = ProblemParams(3.5)
    bumped = mountain_pass_solve(BumpedConstant(1.0, 0.5, 1.0, (0.0, 0.0, 0.0)), pp, seed)
    flat = mountain_pass_solve(Constant(1.0), pp, seed)
    assert bumped.converged and flat.converged
    assert bumped.c < flat.c


def test_mountain_pass_preconditions():
    g = make_grid(16, 4.0)
    with pytest.raises(ValueError):
        mountain_pass_solve(ZERO, ProblemParams(3.0), ScalarField(g, -np.ones(g.shape)))
    with pytest.raises(ValueError):
        mountain_pass_solve(ZERO, ProblemParams(5.0), gaussian(g))


def test_radial_seed_is_uncoupled_solution():
    g = make_grid(64, 8.0)
    pp = ProblemParams(3.0)
    rec = mountain_pass_solve(ZERO, pp, radial_seed(g, pp), path_bound=False)
    assert rec.converged and rec.iterations <= 6
    assert rec.c == pytest.approx(18.8972513025, rel=1e-3)


# ---------------------------------------------------------------- continuation

def test_single_point_continuation_matches_direct_solve():
    g = make_grid(32, 6.0)
    seed = gaussian(g, 1.0, 2.0)
    pp = ProblemParams(3.0)
    res = mu_continuation(Constant(0.5), pp, [1.0], seed)
    rec = mountain_pass_solve(Constant(0.5), pp, seed, path_bound=False)
    assert res.all_converged and res.monotone_ok
    assert res.c_values[0] == pytest.approx(rec.c, rel=1e-12)


def test_continuation_grid_validation():
    g = make_grid(16, 4.0)
    with pytest.raises(ValueError):
        mu_continuation(ZERO, ProblemParams(3.0), [1.0, 0.5], gaussian(g))
    with pytest.raises(ValueError):
        mu_continuation(ZERO, ProblemParams(3.0), [], gaussian(g))


def test_monotone_helper():
    assert monotone_non_increasing([3.0, 2.0, 2.0, 1.0])
    assert monotone_non_increasing([1.0, 1.0 + 1e-7])
    assert not monotone_non_increasing([1.0, 1.0 + 1e-5])
    assert monotone_non_increasing([math.pi])
