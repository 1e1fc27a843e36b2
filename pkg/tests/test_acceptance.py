"""Acceptance suite: one test (or group) per numbered criterion.

Each criterion logs one ``criterion N PASS/FAIL`` line, repeated in the
terminal summary.  Criteria 8 and 10 are not attainable as stated; their
literal assertions run as strict xfails next to tests of the values that do
hold (see the notes in each test).
"""

import math
import time

import numpy as np
import pytest

from spvar.charge import BumpedConstant, CoercivePower, Constant, ExpCoercive
from spvar.coulomb import coulomb_energy, coulomb_energy_direct
from spvar.diagnostics import (
    check_triple_consistency,
    lower_bound_C,
    lower_bound_coefficient,
    sobolev_radial,
    triple_bounds,
)
from spvar.functional import ProblemParams, energy, e_norm, pohozaev_residual, scale_path_energy
from spvar.grid import ScalarField, make_grid, shift_cells
from spvar.oracles import gradient_check_suite, poisson_oracle_suite, random_smooth_field
from spvar.semiclassical import claim3_integral, decay_barrier, expansion_check
from spvar.solvers import ground_state_nehari, mountain_pass_solve, mu_continuation
from spvar.solvers.mountain_pass import radial_seed
from spvar.solvers.radial import radial_limit_ground_state
from spvar.solvers.records import make_record

from conftest import BUMP_EPS, gaussian, record_criterion

FAMILIES = [
    Constant(1.0),
    CoercivePower(1.0, 2.0),
    BumpedConstant(1.0, 0.5, 1.0, (0.3, 0.0, 0.0)),
    ExpCoercive(1.0, 0.5, 1.0),
]

MU_GRID = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0]


# ------------------------------------------------------------ shared runs

@pytest.fixture(scope="module")
def continuation():
    g = make_grid(48, 8.0)
    pp = ProblemParams(2.5, mu=0.5)
    t0 = time.perf_counter()
    res = mu_continuation(Constant(0.2), pp, MU_GRID, radial_seed(g, pp))
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def nehari_p4():
    g = make_grid(256, 8.0)
    seed = ScalarField(g, 2.0 * np.exp(-g.radius**2))
    t0 = time.perf_counter()
    rec = ground_state_nehari(Constant(0.0), ProblemParams(4.0), seed, max_iter=3000)
    return rec, time.perf_counter() - t0


@pytest.fixture(scope="module")
def coercive_p35():
    g = make_grid(64, 4.0)
    return mountain_pass_solve(CoercivePower(1.0, 2.0), ProblemParams(3.5), gaussian(g, 0.5, 3.0))


# ------------------------------------------------------------ 1

def test_criterion_01_poisson_oracle():
    t0 = time.perf_counter()
    out = poisson_oracle_suite(np.random.default_rng(1), n=8, cases=20)
    dt = time.perf_counter() - t0
    ok = len(out.errors) == 20 and out.max_error < 1e-10 and dt < 10.0
    record_criterion(1, ok, f"max rel err {out.max_error:.2e} over 20 fields, {dt:.2f} s")
    assert ok


# ------------------------------------------------------------ 2

def test_criterion_02_energy_identity():
    g = make_grid(64, 4.0)
    u = gaussian(g, 1.0)
    rels = []
    for cd in FAMILIES:
        sol = coulomb_energy(u, cd)
        rels.append(abs(sol.dirichlet_energy - sol.coulomb_energy) / sol.coulomb_energy)
    g16 = make_grid(16, 3.0)
    u16 = gaussian(g16, 0.8)
    direct = []
    for cd in FAMILIES:
        D = coulomb_energy(u16, cd).coulomb_energy
        direct.append(abs(D - coulomb_energy_direct(u16, cd)) / D)
    ok = max(rels) < 1e-3 and max(direct) < 1e-8
    record_criterion(2, ok, f"64^3 identity max {max(rels):.2e}; 16^3 vs direct max {max(direct):.2e}")
    assert ok


# ------------------------------------------------------------ 3

def test_criterion_03_gradient_check():
    g = make_grid(32, 6.0)
    t0 = time.perf_counter()
    out = gradient_check_suite(g, CoercivePower(1.0, 2.0), ProblemParams(2.5, mu=0.8),
                               np.random.default_rng(3), pairs=20)
    dt = time.perf_counter() - t0
    ok = len(out.errors) == 20 and out.max_error < 1e-5 and dt < 60.0
    record_criterion(3, ok, f"max rel mismatch {out.max_error:.2e} over 20 pairs, {dt:.1f} s")
    assert ok


# ------------------------------------------------------------ 4

def test_criterion_04_pohozaev(coercive_record, coercive_p35, continuation, bump_sweep, nehari_p4):
    prof = radial_limit_ground_state(3.0)
    g = make_grid(64, 8.0)
    u = ScalarField(g, prof(g.radius))
    dec = pohozaev_residual(u, Constant(1.0), ProblemParams(3.0, poh_coeffs=(1.0, 0.0, 1.0)))
    dec_rel = abs(dec.value) / dec.kinetic
    records = [coercive_record, coercive_p35, *continuation[0].records, *bump_sweep[1], nehari_p4[0]]
    conv = [r for r in records if r.converged]
    worst = max(r.pohozaev_residual / r.pohozaev_scale for r in conv)
    ok = dec_rel < 1e-2 and worst < 1e-2 and len(conv) == len(records)
    record_criterion(4, ok, f"decoupled |P|/kin {dec_rel:.2e}; worst of {len(conv)} converged records {worst:.2e}")
    assert ok


# ------------------------------------------------------------ 5

def test_criterion_05_bounds(coercive_record, coercive_p35):
    b = triple_bounds(1.0, 0.0, 2.5)
    exact = b["delta_max"] == 10.5 and b["gamma_max"] == 5.0
    coef = (math.isclose(lower_bound_coefficient(0.0, 2.5), 1 / 10.5, rel_tol=1e-14)
            and math.isclose(lower_bound_coefficient(0.0, 3.0), 0.25, rel_tol=1e-14))
    checks = []
    for rec in (coercive_record, coercive_p35):
        assert rec.converged
        p = rec.params.p
        lb = lower_bound_C(0.0, p, sobolev_radial(p))
        checks.append(lb <= rec.c)
        if 2 < p < 3:
            tc = check_triple_consistency(rec, k=0.0)
            checks.append(tc.identity.delta <= tc.delta_max and tc.identity.gamma <= tc.gamma_max)
    ok = exact and coef and all(checks)
    record_criterion(5, ok, f"(10.5, 5.0) exact={exact}; coefficients={coef}; "
                            f"bounds hold on {len(checks)} record checks={all(checks)}")
    assert ok


# ------------------------------------------------------------ 6

def test_criterion_06_monotone_levels(continuation):
    res, dt = continuation
    c = res.c_values
    ok = (res.all_converged and len(c) == 6 and res.monotone_ok and c[0] >= c[-1]
          and dt < 1800.0)
    record_criterion(6, ok, f"c(mu) = {', '.join(f'{v:.4f}' for v in c)}; {dt:.0f} s on 48^3")
    assert ok


def test_criterion_06_levels_match_radial_oracle(continuation):
    # constant rho: the coupled radial ground state gives the same level
    res, _ = continuation
    for mu, c in zip(res.mu_values, res.c_values):
        ref = radial_limit_ground_state(2.5, mu=mu, rho_inf=0.2).energy
        assert c == pytest.approx(ref, rel=2e-3)


# ------------------------------------------------------------ 7

def test_criterion_07_nehari_ground_state(nehari_p4):
    rec, dt = nehari_p4
    g = rec.u.grid
    ref = radial_limit_ground_state(4.0)(g.radius)
    dist = math.sqrt(g.cell_volume * float(np.sum((rec.u.values - ref) ** 2)))
    neh = rec.nehari_residual / rec.h1_norm_sq
    ok = rec.converged and dist < 1e-3 and neh < 1e-6
    record_criterion(7, ok, f"L2 distance {dist:.2e}; Nehari residual {neh:.1e} of H1^2; "
                            f"{rec.iterations} iterations, {dt:.0f} s on 256^3")
    assert ok


# ------------------------------------------------------------ 8

def test_criterion_08_peak_bound_and_runtime(bump_sweep):
    cd, records, reports, dt = bump_sweep
    assert [r.eps for r in reports] == list(BUMP_EPS)
    assert all(r.converged for r in records)
    assert all(r.peak_bound_ok for r in reports)
    assert dt < 3600.0


def test_criterion_08_peak_at_critical_point(bump_sweep):
    # the radial dip makes every solution symmetric about its centre, so the
    # peak sits on the critical point of rho at every eps
    cd, _, reports, _ = bump_sweep
    gmax = 0.8 * math.exp(-0.5) / 1.0  # max |grad rho| of the dip, at r = sigma
    for r in reports:
        assert r.grad_rho_norm < 1e-6 * gmax
        assert np.allclose(r.x_peak, (0.5, 0.3, 0.0), atol=1e-6)


@pytest.mark.xfail(strict=True, reason="gradient at the peak is at round-off level for every eps; "
                                       "a 100x drop between eps = 0.4 and 0.05 cannot occur")
def test_criterion_08_gradient_ratio(bump_sweep):
    _, _, reports, dt = bump_sweep
    g0, g1 = reports[0].grad_rho_norm, reports[-1].grad_rho_norm
    ratio = g1 / g0
    ok = ratio < 1e-2 and all(r.peak_bound_ok for r in reports) and dt < 3600.0
    record_criterion(8, ok, f"|grad rho(x_peak)| {g0:.2e} -> {g1:.2e}, ratio {ratio:.2f}; "
                            f"peak bound at all eps; {dt:.0f} s")
    assert ratio < 1e-2


# ------------------------------------------------------------ 9

def test_criterion_09_rescaled_profile(bump_sweep):
    _, records, reports, _ = bump_sweep
    kw = [r.kwong_residual for r in reports]
    barrier = [decay_barrier(rec)[0] for rec in records]
    ok = all(b < a for a, b in zip(kw, kw[1:])) and kw[-1] < 1e-3 and all(barrier)
    record_criterion(9, ok, f"limit-equation residual {', '.join(f'{v:.1e}' for v in kw)}; "
                            f"decay barrier holds on {sum(barrier)}/{len(barrier)}")
    assert ok


# ------------------------------------------------------------ 10

EXPANSION_EPS = [0.5, 0.35, 0.25, 0.18]


@pytest.fixture(scope="module")
def expansion():
    g = make_grid(32, 3.0)
    t0 = time.perf_counter()
    out = expansion_check(gaussian(g, 0.5), Constant(1.3), (0.0, 0.0, 0.0), EXPANSION_EPS)
    return out, time.perf_counter() - t0


@pytest.mark.xfail(strict=True, reason="the functional carries 1/4 on the Coulomb term, so the "
                                       "eps^2 coefficient is rho0^2 D*/4, not rho0^2 D*")
def test_criterion_10_expansion_slope(expansion):
    out, dt = expansion
    ok = out["rel_err"] < 0.10 and dt < 300.0
    record_criterion(10, ok, f"slope {out['slope']:.6g} vs rho0^2 D* {out['predicted']:.6g}, "
                             f"rel err {out['rel_err']:.3f}; {dt:.1f} s")
    assert out["rel_err"] < 0.10


def test_criterion_10_slope_is_quarter_of_prediction(expansion):
    out, dt = expansion
    assert out["slope"] / out["predicted"] == pytest.approx(0.25, rel=1e-3)
    assert dt < 300.0


# ------------------------------------------------------------ 11

def test_criterion_11_mountain_pass_geometry():
    rng = np.random.default_rng(11)
    g = make_grid(16, 4.0)
    positive = []
    for i in range(50):
        cd = FAMILIES[i % len(FAMILIES)]
        pp = ProblemParams(float(rng.choice([2.5, 3.0, 4.0])), mu=float(rng.uniform(0.5, 1.0)))
        u = random_smooth_field(g, rng, width=1.0)
        u *= 0.05 / e_norm(ScalarField(g, u), cd)
        positive.append(energy(ScalarField(g, u), cd, pp).total > 0.0)
    g2 = make_grid(32, 6.0)
    u2 = gaussian(g2, 1.0, 3.0)
    negative = {}
    for p in (2.5, 3.0, 4.0):
        negative[p] = min(scale_path_energy(u2, Constant(1.0), ProblemParams(p), t)
                          for t in (2.0, 2.5, 3.0))
    ok = all(positive) and all(v < 0 for v in negative.values())
    record_criterion(11, ok, f"I > 0 on {sum(positive)}/50 small fields; path minimum "
                             + ", ".join(f"p={p}: {v:.3g}" for p, v in negative.items()))
    assert ok


# ------------------------------------------------------------ 12

def test_criterion_12_symmetries():
    g = make_grid(32, 4.0)
    u = gaussian(g, 0.35, 2.0)
    cd, pp = Constant(1.0), ProblemParams(3.0)
    base = energy(u, cd, pp).total
    # shifts of at most 3 cells keep the tails far below round-off at the box edge
    shifts = [(3, -2, 1), (-3, 0, 2), (0, 3, -3)]
    trans = max(abs(energy(shift_cells(u, s), cd, pp).total - base) / abs(base) for s in shifts)

    g2 = make_grid(32, 2.0)
    bump = BumpedConstant(1.0, 0.5, 1.0, (0.5, 0.3, 0.0))
    mirror = BumpedConstant(1.0, 0.5, 1.0, (-0.5, 0.3, 0.0))
    v = gaussian(g2, 0.3, 2.0, (0.2, 0.1, 0.0))
    vr = ScalarField(g2, v.values[::-1])
    ppe = ProblemParams(3.0, eps=0.5)
    a = claim3_integral(make_record(v, bump, ppe, 0, True), bump, (0.2, 0.1, 0.0))
    b = claim3_integral(make_record(vr, mirror, ppe, 0, True), mirror, (-0.2, 0.1, 0.0))
    refl = max(abs(b[0] + a[0]), *np.abs(b[1:] - a[1:])) / np.max(np.abs(a))
    ok = trans < 1e-12 and refl < 1e-12
    record_criterion(12, ok, f"translation rel change {trans:.1e}; reflection mismatch {refl:.1e}")
    assert ok
