import math

import numpy as np
import pytest
from scipy.integrate import quad

from spvar.charge import CoercivePower, Constant
from spvar.coulomb import OMEGA, coulomb_energy, coulomb_energy_direct
from spvar.functional import (
    ProblemParams,
    e_norm,
    energy,
    first_variation,
    limit_density,
    nehari_value,
    pohozaev_residual,
    scale_path_energy,
)
from spvar.grid import ScalarField, dirichlet_integral, make_grid
from spvar.oracles import gradient_check_suite
from spvar.solvers.radial import radial_limit_ground_state

from conftest import gaussian

ZERO = Constant(0.0)


def test_params_validation():
    with pytest.raises(ValueError):
        ProblemParams(p=6.0)
    with pytest.raises(ValueError):
        ProblemParams(p=3.0, mu=0.4)
    with pytest.raises(ValueError):
        ProblemParams(p=3.0, lam=0.0)
    assert ProblemParams(3.0, eps=0.5).pohozaev_coefficients == (4.0, 4.0, 4.0)


def test_zero_field_is_zero_everywhere():
    g = make_grid(16, 3.0)
    z = ScalarField.zeros(g)
    pp = ProblemParams(3.0)
    cd = Constant(1.0)
    assert energy(z, cd, pp).total == 0.0
    assert np.all(first_variation(z, cd, pp).values == 0.0)
    assert nehari_value(z, cd, pp) == 0.0
    assert pohozaev_residual(z, cd, pp).value == 0.0
    assert e_norm(z, cd) == 0.0


def test_mu_bookkeeping():
    g = make_grid(16, 3.0)
    u = gaussian(g, 0.8, 1.7)
    cd = CoercivePower(1.0, 2.0)
    p = 2.5
    e1 = energy(u, cd, ProblemParams(p, mu=1.0))
    e34 = energy(u, cd, ProblemParams(p, mu=0.75))
    expect = e1.total + (1 - 0.75) / (p + 1) * e1.nonlinear
    assert e34.total == pytest.approx(expect, rel=1e-12)


def test_energy_against_radial_quadrature():
    # kinetic, mass and power terms from 1D quadrature; Coulomb term from direct summation
    w = 0.6
    g = make_grid(16, 3.0)
    u = gaussian(g, w)
    f = lambda r: math.exp(-r * r / (2 * w * w))
    shell = lambda h: quad(lambda r: 4 * math.pi * r * r * h(r), 0, np.inf, epsabs=1e-14)[0]
    grad2 = shell(lambda r: (r / (w * w) * f(r)) ** 2)
    mass = shell(lambda r: f(r) ** 2)
    quart = shell(lambda r: f(r) ** 4)
    D = coulomb_energy_direct(u, Constant(1.0))
    ref = 0.5 * (grad2 + mass) + 0.25 * D - 0.25 * quart
    assert energy(u, Constant(1.0), ProblemParams(3.0)).total == pytest.approx(ref, rel=1e-6)


def test_gradient_check(rng):
    g = make_grid(16, 4.0)
    out = gradient_check_suite(g, CoercivePower(1.0, 2.0), ProblemParams(2.5, mu=0.8), rng, pairs=4)
    assert out.passed, out.max_error


def test_nehari_value_is_polynomial_in_amplitude():
    g = make_grid(16, 4.0)
    u = gaussian(g, 1.0)
    cd, pp = Constant(1.0), ProblemParams(3.5)
    e = energy(u, cd, pp)
    a, gam, dlt = e.dirichlet + e.mass, e.coulomb, e.nonlinear
    for t in (0.3, 1.0, 2.2):
        v = ScalarField(g, t * u.values)
        want = t * t * a + t**4 * gam - t ** (pp.p + 1) * dlt
        assert nehari_value(v, cd, pp) == pytest.approx(want, rel=1e-11)


def test_pohozaev_decoupled_ground_state():
    prof = radial_limit_ground_state(3.0)
    g = make_grid(64, 8.0)
    u = ScalarField(g, prof(g.radius))
    pp = ProblemParams(3.0, poh_coeffs=(1.0, 0.0, 1.0))
    res = pohozaev_residual(u, Constant(1.0), pp)
    assert res.reliable
    assert abs(res.value) < 1e-2 * res.kinetic


def test_pohozaev_detects_non_solution():
    g = make_grid(32, 6.0)
    u = gaussian(g, 1.0, 3.0)
    res = pohozaev_residual(u, ZERO, ProblemParams(3.0))
    assert abs(res.value) > 0.1 * res.kinetic


def test_scale_path_identity_and_descent():
    g = make_grid(32, 6.0)
    u = gaussian(g, 1.0, 3.0)
    cd, pp = Constant(1.0), ProblemParams(2.5)
    assert scale_path_energy(u, cd, pp, 1.0) == energy(u, cd, pp).total
    vals = [scale_path_energy(u, cd, pp, t) for t in (2.0, 2.5, 3.0)]
    assert vals[-1] < 0.0
    assert vals[0] > vals[1] > vals[2]


def test_scale_path_closed_form_without_charge():
    g = make_grid(64, 6.0)
    u = gaussian(g, 1.0)
    pp = ProblemParams(3.0)
    e = energy(u, ZERO, pp)
    for t in (0.8, 1.3):
        want = t**3 / 2 * e.dirichlet + t / 2 * e.mass - t ** (2 * pp.p - 1) / (pp.p + 1) * e.nonlinear
        assert scale_path_energy(u, ZERO, pp, t) == pytest.approx(want, rel=1e-3)


def test_scale_path_rejects_degenerate_t():
    g = make_grid(16, 3.0)
    with pytest.raises(ValueError):
        scale_path_energy(gaussian(g, 0.5), ZERO, ProblemParams(3.0), 50.0)


def test_e_norm_without_charge_is_h1():
    g = make_grid(32, 5.0)
    u = gaussian(g, 1.0)
    h1 = math.sqrt(dirichlet_integral(u) + float(g.cell_volume * np.sum(u.values**2)))
    assert e_norm(u, ZERO) == pytest.approx(h1, rel=1e-14)


def test_e_norm_composition():
    g = make_grid(32, 5.0)
    u = gaussian(g, 1.0)
    cd = Constant(1.0)
    D = coulomb_energy(u, cd).coulomb_energy
    want = math.sqrt(dirichlet_integral(u) + float(g.cell_volume * np.sum(u.values**2)) + math.sqrt(OMEGA * D))
    assert e_norm(u, cd) == pytest.approx(want, rel=1e-10)


def test_limit_density():
    assert limit_density(Constant(2.0)).rho_inf == 2.0
    with pytest.raises(ValueError):
        limit_density(CoercivePower(1.0, 2.0))
