"""Result containers shared by the solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..charge import ChargeDensity
from ..coulomb import convolve_array
from ..charge import rho_on_grid
from ..functional import (
    EnergyBreakdown,
    ProblemParams,
    energy,
    first_variation_array,
    pohozaev_residual,
)
from ..grid import ScalarField, norm

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000


@dataclass
class SolutionRecord:
    """A computed critical point with its energy and identity residuals.

    ``nehari_residual`` and ``pohozaev_residual`` are absolute values of
    ``I'(u)u`` and of the Pohozaev expression; ``h1_norm_sq`` and
    ``pohozaev_scale`` are the quantities they are judged against.
    ``path_value`` is the maximum of the scaling-path energy through ``u``,
    an upper bound for the mountain-pass level from one explicit path family.
    """

    u: ScalarField
    phi: ScalarField
    params: ProblemParams
    rho_tag: str
    energy: EnergyBreakdown
    residual_l2: float
    nehari_residual: float
    pohozaev_residual: float
    iterations: int
    converged: bool
    tol: float = DEFAULT_TOL
    h1_norm_sq: float = 0.0
    pohozaev_scale: float = 0.0
    pohozaev_reliable: bool = True
    path_t: float = math.nan
    path_value: float = math.nan
    method: str = ""
    message: str = ""
    history: list = field(default_factory=list, repr=False)

    @property
    def c(self) -> float:
        return self.energy.total

    def summary(self) -> dict:
        e = self.energy
        return {
            "method": self.method,
            "rho": self.rho_tag,
            "p": self.params.p,
            "mu": self.params.mu,
            "lambda": self.params.lam,
            "eps": self.params.eps,
            "n": self.u.grid.n,
            "L": self.u.grid.L,
            "converged": self.converged,
            "iterations": self.iterations,
            "energy": e.total,
            "kinetic": e.kinetic,
            "coulomb_quarter": e.coulomb_quarter,
            "potential": e.potential,
            "e_norm": e.e_norm,
            "residual_l2": self.residual_l2,
            "nehari_residual": self.nehari_residual,
            "pohozaev_residual": self.pohozaev_residual,
            "pohozaev_scale": self.pohozaev_scale,
            "pohozaev_reliable": self.pohozaev_reliable,
            "h1_norm_sq": self.h1_norm_sq,
            "path_t": self.path_t,
            "path_value": self.path_value,
            "u_max": float(self.u.values.max()),
            "u_min": float(self.u.values.min()),
            "message": self.message,
        }


def make_record(u: ScalarField, cd: ChargeDensity, pp: ProblemParams, iterations: int,
                converged: bool, tol: float = DEFAULT_TOL, method: str = "",
                message: str = "", history=None) -> SolutionRecord:
    g, phi = first_variation_array(u.grid, cd, pp, u.values)
    unorm = norm(u)
    res = float(np.sqrt(u.grid.cell_volume * np.sum(g * g)) / unorm) if unorm > 0 else 0.0
    e = energy(u, cd, pp)
    nehari = pp.eps**2 * e.dirichlet + pp.lam * e.mass + e.coulomb - pp.mu * e.nonlinear
    poh = pohozaev_residual(u, cd, pp)
    rec = SolutionRecord(
        u=u,
        phi=ScalarField(u.grid, phi),
        params=pp,
        rho_tag=cd.describe(),
        energy=e,
        residual_l2=res,
        nehari_residual=abs(nehari),
        pohozaev_residual=abs(poh.value),
        iterations=iterations,
        converged=bool(converged and res < tol),
        tol=tol,
        h1_norm_sq=e.dirichlet + e.mass,
        pohozaev_scale=poh.kinetic,
        pohozaev_reliable=poh.reliable,
        method=method,
        message=message,
        history=list(history or []),
    )
    return rec


@dataclass
class ContinuationResult:
    mu_values: list
    c_values: list
    monotone_ok: bool
    records: list = field(default_factory=list, repr=False)
    all_converged: bool = True

    def __post_init__(self):
        if len(self.mu_values) != len(self.c_values):
            raise ValueError("mu_values and c_values differ in length")


def monotone_non_increasing(values, rel_tol: float = 1e-6) -> bool:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return True
    slack = rel_tol * float(np.max(np.abs(v)))
    return bool(np.all(np.diff(v) <= slack))


def coulomb_potential(u: ScalarField, cd: ChargeDensity) -> ScalarField:
    if cd.is_zero:
        return ScalarField.zeros(u.grid)
    q = rho_on_grid(cd, u.grid) * u.values**2
    return ScalarField(u.grid, convolve_array(u.grid, q))
