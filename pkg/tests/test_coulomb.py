import math

import numpy as np
import pytest
from scipy import integrate

from spvar.charge import BumpedConstant, CoercivePower, Constant
from spvar.coulomb import (
    coulomb_energy,
    coulomb_energy_direct,
    origin_kernel,
    poisson_direct,
    poisson_fft,
)
from spvar.grid import ScalarField, make_grid

from conftest import gaussian


def _point_charge(grid, Q=1.0):
    q = np.zeros(grid.shape)
    q[0, 0, 0] = Q / grid.cell_volume
    return ScalarField(grid, q)


def test_point_charge_far_field():
    g = make_grid(32, 4.0)
    q = _point_charge(g)
    phi = poisson_fft(q).values
    src = np.array([a[0] for a in g.axes])
    x, y, z = np.meshgrid(*g.axes, indexing="ij")
    r = np.sqrt((x - src[0]) ** 2 + (y - src[1]) ** 2 + (z - src[2]) ** 2)
    far = r > 10 * g.h
    rel = np.abs(phi[far] * 4 * math.pi * r[far] - 1.0)
    assert np.max(rel) < 1e-3


def test_uniform_ball():
    g = make_grid(64, 4.0)
    R, Q = 1.5, 2.0
    r = g.radius
    q = np.where(r <= R, Q / (4.0 / 3.0 * math.pi * R**3), 0.0)
    phi = poisson_fft(ScalarField(g, q)).values
    exact = np.where(r >= R, Q / (4 * math.pi * np.maximum(r, 1e-300)),
                     Q * (3 * R**2 - r**2) / (8 * math.pi * R**3))
    # away from the discontinuous surface the cell sampling error is small
    mask = np.abs(r - R) > 2 * g.h
    assert np.max(np.abs(phi - exact)[mask] / np.abs(exact[mask])) < 1e-2


def test_gaussian_fft_matches_direct():
    g = make_grid(8, 2.0)
    q = gaussian(g, 0.7)
    a, b = poisson_fft(q).values, poisson_direct(q).values
    assert np.max(np.abs(a - b)) / np.max(np.abs(b)) < 1e-10


def test_random_fft_matches_direct(rng):
    g = make_grid(8, 1.5)
    for _ in range(3):
        q = ScalarField(g, rng.uniform(-1, 1, g.shape))
        a, b = poisson_fft(q).values, poisson_direct(q).values
        assert np.max(np.abs(a - b)) / np.max(np.abs(b)) < 1e-10


def test_zero_charge():
    g = make_grid(8, 2.0)
    assert np.all(poisson_fft(ScalarField.zeros(g)).values == 0.0)
    assert np.all(poisson_direct(ScalarField.zeros(g)).values == 0.0)
    sol = coulomb_energy(ScalarField.zeros(g), Constant(1.0))
    assert sol.coulomb_energy == 0.0 and sol.dirichlet_energy == 0.0


def test_single_cell_gives_kernel_column():
    g = make_grid(8, 2.0)
    q = _point_charge(g, g.cell_volume)  # unit cell value
    col_fft = poisson_fft(q).values / g.cell_volume
    col_direct = poisson_direct(q).values / g.cell_volume
    assert np.allclose(col_fft, col_direct, rtol=1e-12, atol=0)
    # self term is minus the continued lattice sum of 1/|j|
    assert col_direct[0, 0, 0] == pytest.approx(-_lattice_zeta_half() / (4 * math.pi * g.h), rel=1e-10)
    # neighbouring cells use the point value
    assert col_direct[1, 0, 0] == pytest.approx(1.0 / (4 * math.pi * g.h), rel=1e-14)


def _lattice_zeta_half():
    # sum_{j != 0} |j|^{-1} over Z^3, continued through the theta-function split:
    # Z = -3 + int_1^inf (t^{-1/2} + 1) (theta(t)^3 - 1) dt
    n = np.arange(-8, 9)

    def integrand(t):
        theta = np.exp(-math.pi * n**2 * t).sum()
        return (t**-0.5 + 1.0) * (theta**3 - 1.0)

    val, _ = integrate.quad(integrand, 1.0, np.inf, epsabs=1e-14, epsrel=1e-14, limit=200)
    return -3.0 + val


def test_origin_weight_matches_theta_series():
    assert origin_kernel(1.0) * 4 * math.pi == pytest.approx(-_lattice_zeta_half(), rel=1e-12)


def test_direct_rejects_large_grids():
    with pytest.raises(ValueError):
        poisson_direct(ScalarField.zeros(make_grid(32, 2.0)))


def test_coulomb_energy_matches_direct_sum():
    g = make_grid(16, 3.0)
    u = gaussian(g, 0.8)
    D = coulomb_energy(u, Constant(1.0)).coulomb_energy
    assert D == pytest.approx(coulomb_energy_direct(u, Constant(1.0)), rel=1e-8)


def test_quartic_homogeneity():
    g = make_grid(16, 3.0)
    u = gaussian(g, 0.8)
    cd = CoercivePower(1.0, 1.0)
    D1 = coulomb_energy(u, cd).coulomb_energy
    D2 = coulomb_energy(ScalarField(g, 2.0 * u.values), cd).coulomb_energy
    assert D2 == pytest.approx(16.0 * D1, rel=1e-12)


def test_coulomb_energy_of_gaussian_closed_form():
    # u^2 = exp(-r^2) is a Gaussian charge with total pi^{3/2} and std 1/sqrt(2);
    # its Coulomb self-energy is Q^2 / (4 pi) / (sqrt(pi) s)
    s, Q = 1.0 / math.sqrt(2.0), math.pi**1.5
    exact = Q**2 / (4 * math.pi) / (math.sqrt(math.pi) * s)
    errs = []
    for n in (64, 128):
        g = make_grid(n, 4.0)
        D = coulomb_energy(gaussian(g, 1.0), Constant(1.0)).coulomb_energy
        errs.append(abs(D / exact - 1.0))
    assert errs[0] < 1e-5
    # the lattice origin weight removes the second-order term
    assert errs[0] / errs[1] > 12.0


@pytest.mark.parametrize("cd", [Constant(1.0), CoercivePower(1.0, 2.0),
                                BumpedConstant(1.0, 0.5, 1.0, (0.2, 0.0, 0.0))],
                         ids=lambda c: c.variant)
def test_energy_identity_small_grid(cd):
    g = make_grid(32, 3.0)
    sol = coulomb_energy(gaussian(g, 0.5), cd)
    rel = abs(sol.dirichlet_energy - sol.coulomb_energy) / sol.coulomb_energy
    assert rel < 1e-2
