"""Variational solvers for Schrodinger-Poisson systems with a charge density.

The problem is

    -eps^2 lap u + lam u + rho(x) phi u = mu u_+^p,    -lap phi = rho(x) u^2,

on R^3, discretised on uniform periodic-spectral grids with a free-space
Coulomb solver.  Subpackages and modules:

* :mod:`spvar.grid`, :mod:`spvar.charge`, :mod:`spvar.coulomb` -- discretisation;
* :mod:`spvar.functional` -- energy, first variation, scalar identities;
* :mod:`spvar.solvers` -- mountain-pass, Nehari and radial solvers;
* :mod:`spvar.diagnostics`, :mod:`spvar.semiclassical` -- checks on solutions;
* :mod:`spvar.config`, :mod:`spvar.cli` -- the batch experiment runner.
"""

from .charge import BumpedConstant, ChargeDensity, CoercivePower, Constant, ExpCoercive
from .functional import ProblemParams, energy, first_variation
from .grid import Grid, ScalarField, make_grid

__version__ = "0.1.0"

__all__ = [
    "BumpedConstant",
    "ChargeDensity",
    "CoercivePower",
    "Constant",
    "ExpCoercive",
    "ProblemParams",
    "energy",
    "first_variation",
    "Grid",
    "ScalarField",
    "make_grid",
]
