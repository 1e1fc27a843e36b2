"""Mountain-pass critical points and continuation in mu.

The solver works in three stages:

1. Locate a starting point near the mountain pass by maximising the energy
   along the scaling path ``t^2 u(t x)`` through the seed (for p > 2 this
   path leaves every ball and ends at negative energy).
2. Solve ``I'(u) = 0`` by damped Newton-GMRES with the spectral
   preconditioner ``(-eps^2 lap + lam)^{-1}``.  The nonlinearity only sees
   ``u_+``, so no clipping is needed during the iteration; the converged field
   is clipped at zero afterwards when that keeps the residual below ``tol``.
3. If Newton fails, continue in the coupling strength: start from the
   uncoupled radial ground state and ramp ``rho -> s rho`` up to ``s = 1``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.sparse.linalg import LinearOperator, gmres

from ..charge import ChargeDensity
from ..functional import ProblemParams, scale_path_energy, scaled_field
from ..grid import ScalarField
from ._ops import Operators
from .radial import radial_limit_ground_state
from .records import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    ContinuationResult,
    SolutionRecord,
    make_record,
    monotone_non_increasing,
)

__all__ = [
    "newton_solve",
    "mountain_pass_solve",
    "mu_continuation",
    "radial_seed",
    "path_upper_bound",
]

ARMIJO = 1e-4


def _check_seed(seed: ScalarField) -> None:
    if not np.any(seed.values > 0):
        raise ValueError("trivial seed: u_+ vanishes identically")


def newton_solve(ops: Operators, u0: np.ndarray, tol: float = DEFAULT_TOL,
                 max_iter: int = 60, gmres_restart: int = 40, callback=None,
                 clip: bool = False):
    """Damped Newton-GMRES on the Euler-Lagrange equation.

    Returns ``(u, converged, iterations, history)``.  The merit function is
    ``<F, P F>`` with ``P`` the preconditioner.  With ``clip`` the iterates
    are projected onto ``u >= 0``; on under-resolved grids the discrete
    solution can have a small negative part, and clipping then stalls.
    """
    n3 = u0.size
    shape = u0.shape
    u = np.maximum(u0, 0.0) if clip else np.array(u0, dtype=float)
    phi = ops.potential(u)
    F = ops.residual(u, phi)
    PF = ops.precondition(F)
    merit = ops.dot(F, PF)
    history = []
    f0 = None
    for it in range(1, max_iter + 1):
        unorm = ops.l2(u)
        if unorm == 0.0:
            return u, False, it, history
        res = ops.l2(F) / unorm
        history.append(res)
        if callback is not None:
            callback(it, res)
        if res < tol:
            return u, True, it, history
        f0 = res if f0 is None else f0
        eta = min(0.1, max(1e-3 * tol / res, 0.5 * (res / f0) ** 0.5)) if it > 1 else 0.1
        J = LinearOperator((n3, n3), matvec=lambda v: ops.jvp(u, phi, v.reshape(shape)).ravel(),
                           dtype=float)
        M = LinearOperator((n3, n3), matvec=lambda v: ops.precondition(v.reshape(shape)).ravel(),
                           dtype=float)
        step, _ = gmres(J, -F.ravel(), rtol=eta, restart=gmres_restart, maxiter=4, M=M)
        step = step.reshape(shape)
        s = 1.0
        while s > 1e-4:
            v = u + s * step
            if clip:
                v = np.maximum(v, 0.0)
            phi_v = ops.potential(v)
            F_v = ops.residual(v, phi_v)
            PF_v = ops.precondition(F_v)
            m_v = ops.dot(F_v, PF_v)
            if m_v <= (1.0 - 2.0 * ARMIJO * s) * merit:
                break
            s *= 0.5
        else:
            return u, False, it, history
        u, phi, F, PF, merit = v, phi_v, F_v, PF_v, m_v
        f0 = min(f0, res)
    unorm = ops.l2(u)
    ok = unorm > 0 and ops.l2(F) / unorm < tol
    return u, ok, max_iter, history


def path_upper_bound(u: ScalarField, cd: ChargeDensity, pp: ProblemParams,
                     bracket=(0.5, 2.0)) -> tuple[float, float]:
    """Maximum of ``t -> I(t^2 u(t x))`` near ``t = 1``; returns (t*, value)."""

    def neg(t):
        try:
            return -scale_path_energy(u, cd, pp, t)
        except ValueError:
            return math.inf

    res = minimize_scalar(neg, bounds=bracket, method="bounded", options={"xatol": 1e-4})
    t_best, v_best = float(res.x), -float(res.fun)
    at_one = scale_path_energy(u, cd, pp, 1.0)
    if at_one > v_best:
        t_best, v_best = 1.0, at_one
    return t_best, v_best


def _path_start(ops: Operators, seed: ScalarField, cd, pp) -> np.ndarray:
    """Scaling-path maximiser through the seed."""
    best_t, best = 1.0, -math.inf
    for t in np.geomspace(0.25, 4.0, 25):
        try:
            v = scaled_field(seed, float(t))
        except ValueError:
            continue
        A, B, C, _ = ops.parts(v.values)
        E = ops.energy_from_parts(A, B, C)
        if E > best:
            best_t, best = float(t), E
    return scaled_field(seed, best_t).values


def radial_seed(grid, pp: ProblemParams, center=None) -> ScalarField:
    """Uncoupled radial ground state ``w((x - c) / eps)`` sampled on the grid."""
    prof = radial_limit_ground_state(pp.p, lam=pp.lam, mu=pp.mu)
    c = grid.center if center is None else tuple(center)
    x, y, z = grid.coords
    r = np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2) / pp.eps
    return ScalarField(grid, prof(r))


def mountain_pass_solve(cd: ChargeDensity, pp: ProblemParams, seed: ScalarField,
                        tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                        warm: bool | None = None, homotopy: bool = True,
                        path_bound: bool = True, callback=None) -> SolutionRecord:
    """Mountain-pass candidate for ``-eps^2 lap u + lam u + rho phi u = mu u_+^p``.

    ``warm`` skips the path search and starts Newton at the seed itself; by
    default this happens when the seed residual is already below 5%.  The
    record carries both the solution energy (candidate critical level) and
    the scaling-path maximum through the solution (an upper bound from one
    path family); the two are not claimed to coincide.
    """
    if not 2 < pp.p < 5:
        raise ValueError(f"mountain-pass solver needs p in (2, 5), got {pp.p}")
    _check_seed(seed)
    grid = seed.grid
    ops = Operators(grid, cd, pp)
    newton_iters = min(max_iter, 200)
    u_seed = np.maximum(seed.values, 0.0)
    if warm is None:
        phi = ops.potential(u_seed)
        warm = ops.l2(ops.residual(u_seed, phi)) / ops.l2(u_seed) < 0.05
    start = u_seed if warm else _path_start(ops, ScalarField(grid, u_seed), cd, pp)
    u, ok, its, hist = newton_solve(ops, start, tol, newton_iters, callback=callback)
    total_its = its
    method = "newton_gmres"
    if not ok and ops.l2(u) > 0 and homotopy:
        u, ok, its, h2 = _coupling_homotopy(grid, cd, pp, tol, newton_iters, seed)
        total_its += its
        hist += h2
        method = "newton_gmres+coupling_homotopy"
    if ok and ops.l2(u) < 1e-6 * ops.l2(u_seed):
        ok = False
    if ok and u.min() < 0.0:
        clipped = np.maximum(u, 0.0)
        if ops.l2(ops.residual(clipped, ops.potential(clipped))) < tol * ops.l2(clipped):
            u = clipped
    rec = make_record(ScalarField(grid, u), cd, pp, total_its, ok, tol, method=method,
                      message="" if ok else "Newton iteration did not converge", history=hist)
    if path_bound and ok:
        rec.path_t, rec.path_value = path_upper_bound(rec.u, cd, pp)
    return rec


def _coupling_homotopy(grid, cd, pp, tol, newton_iters, seed):
    c = _peak_location(seed)
    u = radial_seed(grid, pp, center=c).values
    s, ds = 0.0, 0.25
    total = 0
    hist = []
    while s < 1.0:
        s_try = min(1.0, s + ds)
        ops = Operators(grid, cd.scaled(s_try), pp)
        v, ok, its, h = newton_solve(ops, u, tol if s_try == 1.0 else max(tol, 1e-6), newton_iters)
        total += its
        hist += h
        if ok:
            u, s = v, s_try
            ds = min(2.0 * ds, 0.5)
        else:
            ds *= 0.5
            if ds < 1e-3:
                return u, False, total, hist
    return u, True, total, hist


def _peak_location(f: ScalarField):
    i = np.unravel_index(int(np.argmax(f.values)), f.grid.shape)
    return tuple(float(a[j]) for a, j in zip(f.grid.axes, i))


def mu_continuation(cd: ChargeDensity, pp_base: ProblemParams, mu_grid, seed: ScalarField,
                    tol: float = DEFAULT_TOL, rel_tol: float = 1e-6,
                    path_bound: bool = False) -> ContinuationResult:
    """Warm-started sweep of ``mountain_pass_solve`` over ascending ``mu``."""
    mus = [float(m) for m in mu_grid]
    if not mus:
        raise ValueError("mu_grid is empty")
    if any(not 0.5 <= m <= 1.0 for m in mus) or any(b <= a for a, b in zip(mus, mus[1:])):
        raise ValueError("mu_grid must be ascending within [1/2, 1]")
    records = []
    current = seed
    for m in mus:
        pp = pp_base.with_(mu=m)
        rec = mountain_pass_solve(cd, pp, current, tol=tol, warm=bool(records),
                                  path_bound=path_bound)
        records.append(rec)
        if not rec.converged:
            break
        current = rec.u
    c_values = [r.energy.total for r in records]
    done = len(records) == len(mus) and all(r.converged for r in records)
    return ContinuationResult(mus[: len(records)], c_values,
                              monotone_non_increasing(c_values, rel_tol), records, done)
