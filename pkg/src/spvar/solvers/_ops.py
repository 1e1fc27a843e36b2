"""Array-level operators for one fixed (grid, density, parameters) triple."""

from __future__ import annotations

import numpy as np

from ..charge import ChargeDensity, rho_on_grid
from ..coulomb import convolve_array
from ..functional import ProblemParams
from ..grid import Grid, dirichlet_array, helmholtz_solve_array, laplacian_array


class Operators:
    def __init__(self, grid: Grid, cd: ChargeDensity, pp: ProblemParams):
        self.grid = grid
        self.cd = cd
        self.pp = pp
        self.dv = grid.cell_volume
        self.eps2 = pp.eps**2
        self.rho = None if cd.is_zero else rho_on_grid(cd, grid)

    def potential(self, u: np.ndarray) -> np.ndarray:
        if self.rho is None:
            return np.zeros_like(u)
        return convolve_array(self.grid, self.rho * u * u)

    def parts(self, u: np.ndarray, phi: np.ndarray | None = None):
        """(||u||^2_{eps,lam}, D(u), int u_+^(p+1), phi)."""
        if phi is None:
            phi = self.potential(u)
        A = self.eps2 * dirichlet_array(self.grid, u) + self.pp.lam * self.dv * float(np.sum(u * u))
        B = 0.0 if self.rho is None else self.dv * float(np.sum(self.rho * phi * u * u))
        C = self.dv * float(np.sum(np.maximum(u, 0.0) ** (self.pp.p + 1)))
        return A, B, C, phi

    def energy_from_parts(self, A, B, C) -> float:
        p = self.pp.p
        return 0.5 * A + 0.25 * B - self.pp.mu * C / (p + 1)

    def residual(self, u: np.ndarray, phi: np.ndarray) -> np.ndarray:
        pp = self.pp
        g = -self.eps2 * laplacian_array(self.grid, u) + pp.lam * u - pp.mu * np.maximum(u, 0.0) ** pp.p
        if self.rho is not None:
            g += self.rho * phi * u
        return g

    def jvp(self, u: np.ndarray, phi: np.ndarray, v: np.ndarray) -> np.ndarray:
        pp = self.pp
        out = -self.eps2 * laplacian_array(self.grid, v) + pp.lam * v
        out -= pp.mu * pp.p * np.maximum(u, 0.0) ** (pp.p - 1) * v
        if self.rho is not None:
            out += self.rho * phi * v
            out += self.rho * u * convolve_array(self.grid, 2.0 * self.rho * u * v)
        return out

    def precondition(self, g: np.ndarray) -> np.ndarray:
        return helmholtz_solve_array(self.grid, g, self.eps2, self.pp.lam)

    def l2(self, a: np.ndarray) -> float:
        return float(np.sqrt(self.dv * np.sum(a * a)))

    def dot(self, a: np.ndarray, b: np.ndarray) -> float:
        return self.dv * float(np.sum(a * b))
