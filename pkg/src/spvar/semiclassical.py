"""Semiclassical regime: ``-eps^2 lap u + lam u + rho phi_u u = u_+^p``.

Solutions concentrate at a point ``x0`` as ``eps -> 0``; with
``w_eps(y) = u(x0 + eps y)`` the rescaled profile approaches the radial ground
state of ``-lap w + lam w = w^p``.  This module runs warm-started sweeps in
``eps`` on grids that shrink with ``eps``, and measures the quantities that
characterise concentration.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.stats import kendalltau

from .charge import ChargeDensity, ExpCoercive, eval_rho, grad_rho, rho_on_grid
from .coulomb import convolve_array
from .functional import ProblemParams, energy
from .grid import Grid, ScalarField, laplacian_array, resample
from .solvers.mountain_pass import mountain_pass_solve, radial_seed
from .solvers.radial import radial_limit_ground_state
from .solvers.records import DEFAULT_TOL, SolutionRecord

__all__ = [
    "ConcentrationReport",
    "check_eps_guard",
    "solve_semiclassical",
    "locate_peak",
    "concentration_report",
    "claim3_integral",
    "claim3_scale",
    "kwong_residual",
    "mass_radius",
    "decay_barrier",
    "expansion_check",
    "uniform_bound_probe",
    "place_seed",
    "eps_sweep",
    "write_sweep_csv",
    "SWEEP_COLUMNS",
]

SWEEP_COLUMNS = ["eps", "peak_x1", "peak_x2", "peak_x3", "peak_value", "grad_rho_norm",
                 "claim3_norm", "profile_distance", "converged"]


@dataclass(frozen=True)
class ConcentrationReport:
    eps: float
    x_peak: np.ndarray
    peak_value: float
    grad_rho_at_peak: np.ndarray
    rho_grad_product: np.ndarray
    claim3_integral: np.ndarray
    peak_bound_ok: bool
    rescaled_profile_distance: float
    kwong_residual: float = math.nan
    claim3_scale: float = math.nan
    mass_radius: float = math.nan
    converged: bool = True

    @property
    def grad_rho_norm(self) -> float:
        return float(np.linalg.norm(self.grad_rho_at_peak))

    def row(self) -> list:
        return [self.eps, *map(float, self.x_peak), self.peak_value, self.grad_rho_norm,
                float(np.linalg.norm(self.claim3_integral)), self.rescaled_profile_distance,
                int(self.converged)]


def check_eps_guard(cd: ChargeDensity, pp: ProblemParams) -> None:
    """``eps < sqrt(lam) / b`` when ``|grad rho|`` may grow like ``e^{b|x|}``."""
    if not 0 < pp.eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {pp.eps}")
    growth = cd.metadata.grad_growth
    if growth is None:
        raise ValueError("gradient of rho grows faster than any exponential; "
                         "the concentration analysis does not apply")
    b = growth[1]
    if b > 0 and pp.eps >= math.sqrt(pp.lam) / b:
        raise ValueError(f"eps = {pp.eps} must be below sqrt(lam)/b = {math.sqrt(pp.lam) / b:.6g}")


def solve_semiclassical(cd: ChargeDensity, pp: ProblemParams, seed: ScalarField,
                        tol: float = DEFAULT_TOL, **kw) -> SolutionRecord:
    check_eps_guard(cd, pp)
    if isinstance(cd, ExpCoercive):
        cd.check_box(seed.grid)
    return mountain_pass_solve(cd, pp, seed, tol=tol, **kw)


def _trig_interpolant(u: ScalarField):
    """Evaluator of the trigonometric interpolant of ``u`` at one point."""
    g = u.grid
    coef = np.fft.fftn(u.values) / u.values.size
    k = 2.0 * np.pi * np.fft.fftfreq(g.n, d=g.h)
    x0 = np.array([ax[0] for ax in g.axes])

    def value(x) -> float:
        e = [np.exp(1j * k * (x[d] - x0[d])) for d in range(3)]
        return float(np.einsum("ijk,i,j,k->", coef, *e).real)

    return value


def locate_peak(u: ScalarField) -> tuple[np.ndarray, float]:
    """Maximum of the trigonometric interpolant of ``u`` near its largest sample.

    The search stays within one cell of the max cell.  Returns (position, value).
    """
    g = u.grid
    a = u.values
    idx = np.unravel_index(int(np.argmax(a)), g.shape)
    start = np.array([g.axes[d][idx[d]] for d in range(3)])
    f = _trig_interpolant(u)

    def neg(x):
        if np.max(np.abs(x - start)) > g.h:
            return math.inf
        return -f(x)

    res = minimize(neg, start, method="Nelder-Mead",
                   options={"xatol": 1e-10 * g.h, "fatol": 0.0, "maxiter": 4000,
                            "initial_simplex": start + 0.25 * g.h * np.vstack([np.zeros(3), np.eye(3)])})
    if -res.fun < a[idx]:
        return start, float(a[idx])
    return np.asarray(res.x, float), -float(res.fun)


def _rescaled_grid(grid: Grid, x0, eps: float) -> Grid:
    """The native grid in coordinates ``y = (x - x0) / eps``."""
    c = (np.asarray(grid.center) - np.asarray(x0)) / eps
    return Grid(grid.n, grid.L / eps, tuple(c))


def claim3_integral(rec: SolutionRecord, cd: ChargeDensity, x0=None) -> np.ndarray:
    """``int int w^2(y) rho(x0 + eps y) w^2(x) grad rho(x0 + eps x) / (4 pi |x - y|)``.

    ``w(y) = u(x0 + eps y)`` lives on the native grid read in rescaled
    coordinates, so no interpolation enters.
    """
    u = rec.u
    eps = rec.params.eps
    if x0 is None:
        x0, _ = locate_peak(u)
    yg = _rescaled_grid(u.grid, x0, eps)
    w2 = u.values**2
    rho = rho_on_grid(cd, u.grid)
    pot = convolve_array(yg, w2 * rho)
    x, y, z = u.grid.coords
    gx, gy, gz = (np.broadcast_to(c, u.grid.shape) for c in cd.gradient(x, y, z))
    dv = yg.cell_volume
    return np.array([dv * float(np.sum(w2 * gc * pot)) for gc in (gx, gy, gz)])


def claim3_scale(rec: SolutionRecord, cd: ChargeDensity, x0=None) -> float:
    """Same double integral with ``grad rho`` replaced by ``max |grad rho|``."""
    u = rec.u
    eps = rec.params.eps
    if x0 is None:
        x0, _ = locate_peak(u)
    yg = _rescaled_grid(u.grid, x0, eps)
    w2 = u.values**2
    rho = rho_on_grid(cd, u.grid)
    pot = convolve_array(yg, w2 * rho)
    x, y, z = u.grid.coords
    gnorm = np.sqrt(sum(np.broadcast_to(c, u.grid.shape) ** 2 for c in cd.gradient(x, y, z)))
    return yg.cell_volume * float(np.max(gnorm)) * float(np.sum(w2 * pot))


def kwong_residual(rec: SolutionRecord) -> float:
    """``||-eps^2 lap u + lam u - mu u_+^p|| / ||lam u||``.

    This is the residual of the limit equation for ``w_eps`` (the norms scale
    identically under ``x = x0 + eps y``).
    """
    pp = rec.params
    u = rec.u.values
    r = -pp.eps**2 * laplacian_array(rec.u.grid, u) + pp.lam * u - pp.mu * np.maximum(u, 0.0) ** pp.p
    return float(np.linalg.norm(r) / np.linalg.norm(pp.lam * u))


def mass_radius(u: ScalarField, x0=None, fraction: float = 0.99) -> float:
    """Smallest radius about ``x0`` containing ``fraction`` of ``int u^2``."""
    g = u.grid
    if x0 is None:
        x0, _ = locate_peak(u)
    x, y, z = g.coords
    r = np.sqrt((x - x0[0]) ** 2 + (y - x0[1]) ** 2 + (z - x0[2]) ** 2).ravel()
    m = (u.values**2).ravel()
    order = np.argsort(r)
    cum = np.cumsum(m[order])
    i = int(np.searchsorted(cum, fraction * cum[-1]))
    return float(r[order][min(i, r.size - 1)])


def _reference_profile(pp: ProblemParams):
    return radial_limit_ground_state(pp.p, lam=pp.lam, mu=pp.mu)


def rescaled_profile(rec: SolutionRecord, x0, ref_grid: Grid) -> ScalarField:
    """``w(y) = u(x0 + eps y)`` sampled on ``ref_grid`` by cubic interpolation."""
    eps = rec.params.eps
    pts = np.stack(np.meshgrid(*ref_grid.axes, indexing="ij"), axis=-1)
    vals = resample(rec.u, np.asarray(x0) + eps * pts, order=3)
    return ScalarField(ref_grid, vals)


def decay_barrier(rec: SolutionRecord, x0=None, shell=(0.5, 0.9)) -> tuple[bool, float]:
    """Check ``w(y) <= C |y|^-1 exp(-(sqrt(lam)/2)|y|)`` on the shell.

    The shell is taken relative to the rescaled half-width of the native grid,
    and ``C`` is fitted on its inner edge.  Returns (holds, worst ratio).
    """
    pp = rec.params
    g = rec.u.grid
    if x0 is None:
        x0, _ = locate_peak(rec.u)
    x, y, z = g.coords
    r = np.sqrt((x - x0[0]) ** 2 + (y - x0[1]) ** 2 + (z - x0[2]) ** 2) / pp.eps
    r = np.broadcast_to(r, g.shape)
    Lr = g.L / pp.eps
    mask = (r >= shell[0] * Lr) & (r <= shell[1] * Lr)
    barrier = np.exp(-0.5 * math.sqrt(pp.lam) * r[mask]) / r[mask]
    ratio = rec.u.values[mask] / barrier
    inner = r[mask] <= shell[0] * Lr + g.h / pp.eps
    C = float(np.max(ratio[inner]))
    worst = float(np.max(ratio) / C)
    return worst <= 1.0 + 1e-9, worst


def concentration_report(rec: SolutionRecord, cd: ChargeDensity, ref_grid: Grid | None = None,
                         profile=None) -> ConcentrationReport:
    pp = rec.params
    x0, peak = locate_peak(rec.u)
    gr = grad_rho(cd, x0)
    rho0 = float(eval_rho(cd, x0))
    c3 = claim3_integral(rec, cd, x0)
    c3s = claim3_scale(rec, cd, x0)
    g = rec.u.grid
    if ref_grid is None:
        ref_grid = Grid(g.n, g.L / pp.eps)
    if profile is None:
        profile = _reference_profile(pp)
    w = rescaled_profile(rec, x0, ref_grid)
    dist = float(np.sqrt(ref_grid.cell_volume * np.sum((w.values - profile(ref_grid.radius)) ** 2)))
    bound = pp.lam ** (1.0 / (pp.p - 1.0))
    return ConcentrationReport(
        eps=pp.eps,
        x_peak=np.asarray(x0, float),
        peak_value=peak,
        grad_rho_at_peak=np.asarray(gr, float),
        rho_grad_product=rho0 * np.asarray(gr, float),
        claim3_integral=c3,
        peak_bound_ok=bool(peak >= bound - 1e-10),
        rescaled_profile_distance=dist,
        kwong_residual=kwong_residual(rec),
        claim3_scale=c3s,
        mass_radius=mass_radius(rec.u, x0),
        converged=rec.converged,
    )


def _rescale_seed(prev: SolutionRecord, x0, grid: Grid, eps: float) -> ScalarField:
    """Previous solution stretched about its peak to the new ``eps``."""
    pts = np.stack(np.meshgrid(*grid.axes, indexing="ij"), axis=-1)
    factor = prev.params.eps / eps
    src = np.asarray(x0) + (pts - np.asarray(x0)) * factor
    vals = resample(prev.u, src, order=3)
    return ScalarField(grid, np.maximum(vals, 0.0))


def place_seed(cd: ChargeDensity, pp: ProblemParams, grid: Grid, start=None,
               coarse_n: int = 32) -> np.ndarray:
    """Centre for the radial seed that minimises its Coulomb energy.

    Translating the uncoupled profile changes only the Coulomb part of the
    energy, and for small ``eps`` that part is what pins the peak.  Newton
    cannot move a peak by more than a fraction of its width (translation is a
    near-null direction of the Jacobian), so the seed is placed first.  The
    search runs on a ``coarse_n`` copy of ``grid`` and stays inside its
    central half.
    """
    prof = radial_limit_ground_state(pp.p, lam=pp.lam, mu=pp.mu)
    cg = Grid(min(coarse_n, grid.n), grid.L, grid.center)
    x, y, z = cg.coords
    rho = rho_on_grid(cd, cg)
    c0 = np.asarray(grid.center if start is None else start, float)
    lim = 0.5 * grid.L

    def D(c):
        off = np.asarray(c) - np.asarray(grid.center)
        if np.max(np.abs(off)) > lim:
            return math.inf
        r = np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2) / pp.eps
        q = rho * prof(r) ** 2
        return float(np.sum(q * convolve_array(cg, q)))

    res = minimize(D, c0, method="Nelder-Mead",
                   options={"xatol": 1e-3 * grid.L, "fatol": 0.0, "maxfev": 400,
                            "initial_simplex": c0 + 0.2 * grid.L * np.vstack([np.zeros(3), np.eye(3)])})
    return np.asarray(res.x, float)


def eps_sweep(cd: ChargeDensity, pp: ProblemParams, eps_list, n: int = 64,
              L_ref: float = 8.0, center=(0.0, 0.0, 0.0), tol: float = DEFAULT_TOL,
              recenter: bool = True, place: bool = True, callback=None):
    """Sequential warm-started sweep; returns ``(records, reports)``.

    The grid for each ``eps`` has half-width ``eps * L_ref`` and is centred at
    the previous peak (``center`` for the first run).  The first run is seeded
    with the uncoupled radial ground state, placed by :func:`place_seed` when
    ``place`` is set and at ``center`` otherwise.
    """
    eps_values = [float(e) for e in eps_list]
    records, reports = [], []
    c = tuple(float(v) for v in center)
    profile = _reference_profile(pp.with_(eps=1.0))
    prev = None
    prev_peak = None
    for eps in eps_values:
        ppe = pp.with_(eps=eps)
        grid = Grid(n, eps * L_ref, c)
        if prev is None:
            c_seed = place_seed(cd, ppe, grid) if place else c
            seed = radial_seed(grid, ppe, center=c_seed)
        else:
            seed = _rescale_seed(prev, prev_peak, grid, eps)
        rec = solve_semiclassical(cd, ppe, seed, tol=tol, path_bound=False,
                                  warm=prev is not None or None)
        rep = concentration_report(rec, cd, Grid(n, L_ref), profile)
        records.append(rec)
        reports.append(rep)
        if callback is not None:
            callback(rec, rep)
        prev, prev_peak = rec, rep.x_peak
        if recenter:
            c = tuple(float(v) for v in rep.x_peak)
    return records, reports


def write_sweep_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for rep in reports:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in rep.row()])


def expansion_check(u: ScalarField, cd: ChargeDensity, x0, eps_list,
                    pp: ProblemParams | None = None) -> dict:
    """Small-``eps`` behaviour of ``(eps^-3 I_eps(u_eps) - I_0(u)) / eps^2``.

    ``u_eps(x) = u((x - x0) / eps)`` is represented by the same samples on the
    grid scaled by ``eps`` about ``x0``, so both functionals are evaluated
    without interpolation.  ``slope`` is the least-squares coefficient of
    ``eps^2`` in the difference and ``predicted`` is ``rho(x0)^2 D*(u)``,
    with ``D*`` the Coulomb double integral of ``u^2`` for ``rho = 1``.
    """
    eps_values = np.asarray([float(e) for e in eps_list])
    if eps_values.size < 3:
        raise ValueError("eps_list needs at least 3 values")
    if np.any(eps_values > 0.5) or np.any(eps_values <= 0):
        raise ValueError("eps values must lie in (0, 0.5]")
    pp = ProblemParams(p=3.0) if pp is None else pp
    from .charge import Constant

    g = u.grid
    base = energy(u, Constant(0.0), pp.with_(eps=1.0)).total
    x0 = np.asarray(x0, float)
    diffs = []
    for eps in eps_values:
        ge = Grid(g.n, eps * g.L, tuple(x0 + eps * np.asarray(g.center)))
        ue = ScalarField(ge, u.values)
        diffs.append(energy(ue, cd, pp.with_(eps=float(eps))).total / eps**3 - base)
    diffs = np.asarray(diffs)
    X = eps_values**2
    slope = float(np.dot(X, diffs) / np.dot(X, X))
    q = u.values**2
    d_star = g.cell_volume * float(np.sum(q * convolve_array(g, q)))
    predicted = float(eval_rho(cd, x0)) ** 2 * d_star
    rel = abs(slope - predicted) / abs(predicted) if predicted != 0 else abs(slope)
    return {"slope": slope, "predicted": predicted, "rel_err": float(rel),
            "d_star": d_star, "differences": diffs.tolist()}


def _mann_kendall_increasing(values, alpha: float = 0.05) -> bool:
    v = np.asarray(values, float)
    if v.size < 3:
        return False
    tau, pval = kendalltau(np.arange(v.size), v)
    if not np.isfinite(tau):
        return False
    return bool(tau > 0 and pval / 2.0 < alpha)


def uniform_bound_probe(sweep) -> dict:
    """Largest peak value over a sweep and a trend test for blow-up.

    ``sweep`` is ordered by decreasing ``eps``; the flag is true when the peak
    values show no increasing trend (one-sided Mann-Kendall at 5%).
    """
    recs = list(sweep)
    if len(recs) < 3:
        raise ValueError("need at least 3 records from a common sweep")
    peaks = [locate_peak(r.u)[1] for r in recs]
    return {"sup_linf": max(peaks), "no_blowup_trend": not _mann_kendall_increasing(peaks),
            "peaks": peaks}
