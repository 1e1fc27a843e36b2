"""Accuracy of the free-space Coulomb energy on a unit Gaussian.

For u(x) = exp(-|x|^2 / 2) the charge u^2 is a Gaussian with total pi^{3/2}
and standard deviation 1/sqrt(2), so its self-energy is known in closed form.
The script refines the grid, prints the relative error of D(u) and the
mismatch between D(u) and the field energy int |grad phi|^2.

    python demos/coulomb_quadrature.py
"""

import math

import numpy as np

from spvar import Constant, ScalarField, make_grid
from spvar.coulomb import coulomb_energy

s, Q = 1.0 / math.sqrt(2.0), math.pi**1.5
exact = Q**2 / (4.0 * math.pi) / (math.sqrt(math.pi) * s)
print(f"closed form D = {exact:.12f}")
print(f"{'n':>5} {'D':>16} {'rel err':>10} {'identity':>10}")
prev = None
for n in (16, 32, 64, 128):
    g = make_grid(n, 4.0)
    u = ScalarField(g, np.exp(-g.radius**2 / 2.0))
    sol = coulomb_energy(u, Constant(1.0))
    err = abs(sol.coulomb_energy / exact - 1.0)
    ident = abs(sol.dirichlet_energy - sol.coulomb_energy) / sol.coulomb_energy
    order = "" if prev is None else f"  order {math.log2(prev / err):.1f}"
    print(f"{n:>5} {sol.coulomb_energy:16.12f} {err:10.2e} {ident:10.2e}{order}")
    prev = err
