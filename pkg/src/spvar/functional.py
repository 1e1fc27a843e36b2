"""Energy functional, its first variation and the scalar identities.

For ``u`` on a grid the functional is

    I(u) = 1/2 int (eps^2 |grad u|^2 + lam u^2) + 1/4 D(u) - mu/(p+1) int u_+^(p+1)

with ``D(u) = int rho phi_u u^2``.  Setting ``rho`` to a constant ``rho_inf``
gives the functional of the problem at infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .charge import ChargeDensity, Constant, rho_on_grid, x_dot_grad_rho_on_grid
from .coulomb import OMEGA, convolve_array
from .grid import (
    Grid,
    ScalarField,
    boundary_fraction,
    dirichlet_array,
    laplacian_array,
    resample,
)

__all__ = [
    "ProblemParams",
    "EnergyBreakdown",
    "PohozaevResult",
    "energy",
    "first_variation",
    "nehari_value",
    "pohozaev_residual",
    "scale_path_energy",
    "scale_path_max",
    "e_norm",
    "limit_density",
    "BOUNDARY_THRESHOLD",
]

BOUNDARY_THRESHOLD = 1e-6


@dataclass(frozen=True)
class ProblemParams:
    """Exponent, coupling and scaling parameters of one problem instance.

    ``poh_coeffs`` are the ``(b, c, d)`` of the generalised equation
    ``-lap u + b u + c rho phi u = d |u|^(p-1) u``; when omitted they are
    derived from ``lam``, ``mu`` and ``eps`` by dividing through by ``eps^2``.
    """

    p: float
    mu: float = 1.0
    lam: float = 1.0
    eps: float = 1.0
    poh_coeffs: tuple[float, float, float] | None = None
    absolute_value: bool = False

    def __post_init__(self):
        if not 1 < self.p <= 5:
            raise ValueError(f"p must lie in (1, 5], got {self.p}")
        if not 0.5 <= self.mu <= 1:
            raise ValueError(f"mu must lie in [1/2, 1], got {self.mu}")
        if self.lam <= 0 or self.eps <= 0:
            raise ValueError("lam and eps must be positive")
        if self.poh_coeffs is not None:
            if len(self.poh_coeffs) != 3 or min(self.poh_coeffs) < 0:
                raise ValueError("poh_coeffs must be three nonnegative reals")
            object.__setattr__(self, "poh_coeffs", tuple(float(c) for c in self.poh_coeffs))

    @property
    def pohozaev_coefficients(self) -> tuple[float, float, float]:
        if self.poh_coeffs is not None:
            return self.poh_coeffs
        e2 = self.eps**2
        return self.lam / e2, 1.0 / e2, self.mu / e2

    def with_(self, **changes) -> "ProblemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    coulomb_quarter: float
    potential: float
    total: float
    e_norm: float
    coulomb: float = 0.0
    dirichlet: float = 0.0
    mass: float = 0.0
    nonlinear: float = 0.0


class PohozaevResult(NamedTuple):
    value: float
    reliable: bool
    boundary_fraction: float
    kinetic: float


def limit_density(cd: ChargeDensity) -> Constant:
    """``Constant(rho_inf)`` for a non-coercive density."""
    rinf = cd.metadata.rho_inf
    if math.isinf(rinf):
        raise ValueError("coercive density has no finite problem at infinity")
    return Constant(rinf)


def _power_terms(u: np.ndarray, pp: ProblemParams):
    base = np.abs(u) if pp.absolute_value else np.maximum(u, 0.0)
    up = base**pp.p
    if pp.absolute_value:
        up = np.sign(u) * up
    return base, up


def _coulomb_parts(grid: Grid, cd: ChargeDensity, u: np.ndarray):
    if cd.is_zero:
        return None, np.zeros_like(u), 0.0
    rho = rho_on_grid(cd, grid)
    q = rho * u * u
    phi = convolve_array(grid, q)
    return rho, phi, float(grid.cell_volume * np.sum(q * phi))


def energy(u: ScalarField, cd: ChargeDensity, pp: ProblemParams) -> EnergyBreakdown:
    g = u.grid
    a = u.values
    dv = g.cell_volume
    grad2 = dirichlet_array(g, a)
    mass = float(dv * np.sum(a * a))
    _, _, D = _coulomb_parts(g, cd, a)
    base, _ = _power_terms(a, pp)
    nonlin = float(dv * np.sum(base ** (pp.p + 1)))
    kinetic = 0.5 * (pp.eps**2 * grad2 + pp.lam * mass)
    potential = pp.mu / (pp.p + 1) * nonlin
    total = kinetic + 0.25 * D - potential
    en = math.sqrt(grad2 + mass + math.sqrt(OMEGA * D))
    return EnergyBreakdown(kinetic, 0.25 * D, potential, total, en, D, grad2, mass, nonlin)


def first_variation_array(grid: Grid, cd: ChargeDensity, pp: ProblemParams, u: np.ndarray):
    """Residual ``-eps^2 lap u + lam u + rho phi u - mu u_+^p`` and ``phi``."""
    rho, phi, _ = _coulomb_parts(grid, cd, u)
    _, up = _power_terms(u, pp)
    g = -pp.eps**2 * laplacian_array(grid, u) + pp.lam * u - pp.mu * up
    if rho is not None:
        g = g + rho * phi * u
    return g, phi


def first_variation(u: ScalarField, cd: ChargeDensity, pp: ProblemParams) -> ScalarField:
    """Strong-form Euler-Lagrange residual; its L2 pairing is ``I'(u)``."""
    g, _ = first_variation_array(u.grid, cd, pp, u.values)
    return ScalarField(u.grid, g)


def nehari_value(u: ScalarField, cd: ChargeDensity, pp: ProblemParams) -> float:
    """``I'(u) u``."""
    e = energy(u, cd, pp)
    return pp.eps**2 * e.dirichlet + pp.lam * e.mass + e.coulomb - pp.mu * e.nonlinear


def pohozaev_residual(u: ScalarField, cd: ChargeDensity, pp: ProblemParams) -> PohozaevResult:
    """Residual of the Pohozaev identity for ``-lap u + b u + c rho phi u = d u^p``.

    ``P = 1/2 int |grad u|^2 + 3b/2 int u^2 + 5c/4 int rho phi u^2
          + c/2 int phi u^2 (x, grad rho) - 3d/(p+1) int |u|^(p+1)``.

    The weight ``(x, grad rho)`` comes from the analytic gradient.  The
    identity neglects boundary terms, so the result is marked unreliable when
    more than ``BOUNDARY_THRESHOLD`` of ``int u^2`` sits in the boundary shell.
    ``kinetic`` in the result is ``1/2 int |grad u|^2 + b/2 int u^2``, the
    scale against which the residual is judged.
    """
    g = u.grid
    a = u.values
    dv = g.cell_volume
    b, c, d = pp.pohozaev_coefficients
    grad2 = dirichlet_array(g, a)
    mass = float(dv * np.sum(a * a))
    nonlin = float(dv * np.sum(np.abs(a) ** (pp.p + 1)))
    value = 0.5 * grad2 + 1.5 * b * mass - 3.0 * d / (pp.p + 1) * nonlin
    if c != 0.0 and not cd.is_zero:
        rho, phi, D = _coulomb_parts(g, cd, a)
        xg = x_dot_grad_rho_on_grid(cd, g)
        value += 1.25 * c * D + 0.5 * c * float(dv * np.sum(phi * a * a * xg))
    frac = boundary_fraction(u)
    return PohozaevResult(value, frac < BOUNDARY_THRESHOLD, frac, 0.5 * grad2 + 0.5 * b * mass)


def _support_radius(u: ScalarField, rel: float = 1e-6) -> float:
    a = np.abs(u.values)
    mask = a > rel * a.max()
    return float(np.max(u.grid.radius[mask])) if mask.any() else 0.0


def scaled_field(u: ScalarField, t: float) -> ScalarField:
    """``t^2 u(c + t (x - c))`` by cubic-spline resampling (``c`` = box centre)."""
    if t <= 0:
        raise ValueError("t must be positive")
    g = u.grid
    supp = _support_radius(u)
    if supp / t < 4 * g.h:
        raise ValueError(f"rescaled support degenerates below 4 cells at t = {t}")
    c = np.asarray(g.center)
    x, y, z = np.meshgrid(*g.axes, indexing="ij")
    pts = np.stack([x, y, z], axis=-1)
    vals = resample(u, c + t * (pts - c), order=3)
    return ScalarField(g, t * t * vals)


def scale_path_energy(u: ScalarField, cd: ChargeDensity, pp: ProblemParams, t: float) -> float:
    """Energy along the scaling path ``v_t(x) = t^2 u(t x)``."""
    if t == 1.0:
        return energy(u, cd, pp).total
    return energy(scaled_field(u, t), cd, pp).total


def scale_path_max(u: ScalarField, cd: ChargeDensity, pp: ProblemParams,
                   t_values=None) -> tuple[float, float]:
    """Maximum of the scaling-path energy over ``t_values``; returns (t*, value)."""
    if t_values is None:
        t_values = np.geomspace(0.25, 4.0, 33)
    best_t, best = float("nan"), -np.inf
    for t in t_values:
        try:
            val = scale_path_energy(u, cd, pp, float(t))
        except ValueError:
            continue
        if val > best:
            best_t, best = float(t), val
    return best_t, float(best)


def e_norm(u: ScalarField, cd: ChargeDensity) -> float:
    """``sqrt(int |grad u|^2 + u^2 + sqrt(int int u^2 rho u^2 rho / |x - y|))``."""
    g = u.grid
    grad2 = dirichlet_array(g, u.values)
    mass = float(g.cell_volume * np.sum(u.values**2))
    _, _, D = _coulomb_parts(g, cd, u.values)
    return math.sqrt(grad2 + mass + math.sqrt(OMEGA * D))
