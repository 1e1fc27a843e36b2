"""Closed-form energy bounds and their evaluation on computed solutions.

For a solution at level ``c`` write ``alpha = ||u||^2``, ``gamma = D(u)`` and
``delta = mu int u_+^(p+1)``.  Energy, Nehari identity and the Pohozaev
identity (turned into an inequality by ``k rho <= (x, grad rho)``) give

    alpha/2 + gamma/4 - delta/(p+1) = c
    alpha + gamma = delta
    alpha/2 + (5+2k)/4 gamma - 3 delta/(p+1) <= 0

and hence a-priori bounds on ``delta`` and ``gamma`` in terms of ``c``.  With
the Sobolev constant ``S`` (``S ||u||^2_{p+1} <= ||u||^2_{H^1}``) they turn into
lower bounds for ``c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .charge import ChargeDensity, check_low_p_admissible, rho_on_grid
from .functional import ProblemParams
from .grid import Grid, ScalarField, dirichlet_array, helmholtz_solve_array

__all__ = [
    "TripleIdentity",
    "TripleCheck",
    "SobolevEstimate",
    "DecayFit",
    "DiagnosticsReport",
    "triple_bounds",
    "lower_bound_coefficient",
    "lower_bound_C",
    "sobolev_estimate",
    "sobolev_radial",
    "decay_fit",
    "check_triple_consistency",
    "diagnostics_report",
]


@dataclass(frozen=True)
class TripleIdentity:
    alpha: float
    gamma: float
    delta: float
    c: float
    k: float
    p: float

    def __post_init__(self):
        if min(self.alpha, self.gamma, self.delta) < 0:
            raise ValueError("alpha, gamma, delta must be nonnegative")


@dataclass(frozen=True)
class TripleCheck:
    identity: TripleIdentity
    residual1: float
    residual2: float
    slack3: float
    delta_max: float = math.nan
    gamma_max: float = math.nan
    bounds_ok: bool = True

    @property
    def scale(self) -> float:
        t = self.identity
        return max(t.alpha, t.gamma, t.delta)


@dataclass(frozen=True)
class SobolevEstimate:
    p: float
    S_hat: float
    method: str
    trial_value: float = math.nan
    iterations: int = 0

    def __post_init__(self):
        if not self.S_hat > 0:
            raise ValueError("Sobolev estimate must be positive")


def _denominator(k: float, p: float) -> float:
    return 2.0 * (p - 2.0) + k * (p - 1.0)


def triple_bounds(c: float, k: float, p: float) -> dict:
    """Largest ``delta`` and ``gamma`` compatible with the system at level ``c``."""
    if not 2 < p < 3:
        raise ValueError(f"triple bounds apply for p in (2, 3), got {p}")
    if c < 0:
        raise ValueError("energy level must be nonnegative")
    check_low_p_admissible(k, p)
    den = _denominator(k, p)
    return {
        "delta_max": c * (3.0 + 2.0 * k) * (p + 1.0) / den,
        "gamma_max": -2.0 * c * (p - 5.0) / den,
    }


def lower_bound_coefficient(k: float, p: float) -> float:
    """Coefficient multiplying ``S^((p+1)/(p-1))`` in the energy lower bound."""
    if 3 <= p < 5:
        return (p - 1.0) / (2.0 * (p + 1.0))
    if 2 < p < 3:
        check_low_p_admissible(k, p)
        return _denominator(k, p) / ((3.0 + 2.0 * k) * (p + 1.0))
    raise ValueError(f"lower bound available for p in (2, 5), got {p}")


def lower_bound_C(k: float, p: float, S: SobolevEstimate | float) -> float:
    s = S.S_hat if isinstance(S, SobolevEstimate) else float(S)
    return lower_bound_coefficient(k, p) * s ** ((p + 1.0) / (p - 1.0))


def _rayleigh(grid: Grid, u: np.ndarray, p: float):
    dv = grid.cell_volume
    a = dirichlet_array(grid, u) + dv * float(np.sum(u * u))
    b = dv * float(np.sum(np.abs(u) ** (p + 1)))
    return a / b ** (2.0 / (p + 1)), a, b


def sobolev_estimate(grid: Grid, p: float, tol: float = 1e-12,
                     max_iter: int = 2000) -> SobolevEstimate:
    """Minimise ``||u||^2_{H^1} / ||u||^2_{p+1}`` by preconditioned descent.

    The descent direction is the ``(-lap + 1)^{-1}``-preconditioned gradient;
    steps are chosen by Armijo backtracking from a Gaussian start.  The
    quotient is scale invariant, so iterates are renormalised each step.
    """
    if not 1 < p < 5:
        raise ValueError(f"p must lie in (1, 5), got {p}")
    u = np.exp(-0.5 * grid.radius**2)
    Q, a, b = _rayleigh(grid, u, p)
    trial = Q
    s = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        w = np.abs(u) ** (p - 1) * u
        d = (a / b) * helmholtz_solve_array(grid, w, 1.0, 1.0) - u
        slope_scale = float(np.sum(d * d))
        if slope_scale == 0.0:
            break
        s = min(1.0, 2.0 * s)
        while s > 1e-10:
            v = u + s * d
            Qv, av, bv = _rayleigh(grid, v, p)
            if Qv <= Q - 1e-4 * s * Q * slope_scale / max(float(np.sum(u * u)), 1e-300):
                break
            s *= 0.5
        if s <= 1e-10 or Q - Qv <= tol * Q:
            if Qv < Q:
                Q = Qv
            break
        nv = bv ** (1.0 / (p + 1))
        u, Q, a, b = v / nv, Qv, av / nv**2, bv / nv ** (p + 1)
    return SobolevEstimate(p, float(Q), "grid_preconditioned_descent", float(trial), it)


def sobolev_radial(p: float) -> SobolevEstimate:
    """``S`` from the radial ground state ``w`` of ``-lap w + w = w^p``.

    ``w`` attains the infimum and satisfies ``||w||^2_{H^1} = int w^(p+1)``,
    so ``S = (int w^(p+1))^((p-1)/(p+1))``.
    """
    from .solvers.radial import radial_limit_ground_state

    prof = radial_limit_ground_state(p)
    # energy = (1/2 - 1/(p+1)) int w^(p+1) for a solution
    N = prof.energy / (0.5 - 1.0 / (p + 1.0))
    return SobolevEstimate(p, float(N ** ((p - 1.0) / (p + 1.0))), "radial_ground_state")


@dataclass(frozen=True)
class DecayFit:
    gamma_fit: float
    alpha_fit: float
    inequality_ok: bool
    A: float | None = None
    alpha_bound: float | None = None
    charge_ok: bool = True
    worst_ratio: float = math.nan

    def __getitem__(self, key):
        return getattr(self, key)


def _shell_profile(u: ScalarField, center, r_lo: float, r_hi: float):
    g = u.grid
    x, y, z = g.coords
    r = np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2)
    r = np.broadcast_to(r, g.shape)
    mask = (r >= r_lo) & (r <= r_hi)
    edges = np.arange(r_lo, r_hi + g.h, g.h)
    idx = np.digitize(r[mask], edges)
    vals = u.values[mask]
    rr = r[mask]
    prof_r, prof_u = [], []
    for i in np.unique(idx):
        sel = idx == i
        prof_r.append(float(np.mean(rr[sel])))
        prof_u.append(float(np.mean(vals[sel])))
    return np.asarray(prof_r), np.asarray(prof_u), r, mask


def decay_fit(u: ScalarField, cd: ChargeDensity | None = None, center=None,
              shell=(0.5, 0.9), slack: float = 1e-6) -> DecayFit:
    """Fit the far-field decay of ``u`` on the shell ``[L/2, 0.9 L]``.

    ``gamma_fit`` is the rate of an exponential ``exp(-gamma (1 + r))`` and
    ``alpha_fit`` the exponent of a stretched exponential
    ``exp(-a (1 + r)^alpha)``, both fitted to the shell-averaged profile.  For
    densities with decay constants ``(A, alpha, beta)`` the check compares
    ``u exp(sqrt(A) (1 + r)^alpha)`` and ``rho u^2 exp((2 sqrt(A) - beta)(1 + r)^alpha)``
    with their values on the inner edge of the shell; the fitted constant
    ``C`` is that inner value.
    """
    g = u.grid
    c = g.center if center is None else tuple(center)
    r_lo, r_hi = shell[0] * g.L, shell[1] * g.L
    pr, pu, r, mask = _shell_profile(u, c, r_lo, r_hi)
    if pu.size < 3 or np.any(pu <= 0):
        raise ValueError("u vanishes on the fit shell; cannot fit decay")
    logu = np.log(pu)
    s = 1.0 + pr
    gamma_fit = -float(np.polyfit(s, logu, 1)[0])

    def misfit(alpha):
        X = np.vstack([np.ones_like(s), -(s**alpha)]).T
        coef, *_ = np.linalg.lstsq(X, logu, rcond=None)
        return float(np.sum((X @ coef - logu) ** 2))

    alpha_fit = float(minimize_scalar(misfit, bounds=(0.2, 4.0), method="bounded",
                                      options={"xatol": 1e-8}).x)
    ok, charge_ok, worst = True, True, math.nan
    A = alpha_b = None
    if cd is not None:
        meta = cd.metadata
        if meta.A is not None and meta.alpha is not None:
            A, alpha_b = meta.A, meta.alpha
            weight = np.sqrt(A) * (1.0 + r) ** alpha_b
            vals = u.values[mask]
            wv = vals * np.exp(weight[mask])
            inner = (r[mask] <= r_lo + g.h)
            C = float(np.max(wv[inner]))
            worst = float(np.max(wv) / C)
            ok = worst <= 1.0 + slack
            if meta.beta is not None:
                rho = rho_on_grid(cd, g)
                q = (rho * u.values**2)[mask] * np.exp(((2.0 * np.sqrt(A) - meta.beta) * (1.0 + r) ** alpha_b)[mask])
                charge_ok = bool(np.max(q) <= (1.0 + slack) * np.max(q[inner]))
        else:
            # plain L2-type decay: exp(-gamma (1 + r)) for gamma < sqrt(lam)
            ok = gamma_fit > 0
    return DecayFit(gamma_fit, alpha_fit, bool(ok and charge_ok), A, alpha_b, charge_ok, worst)


def check_triple_consistency(rec, k: float = 0.0) -> TripleCheck:
    """Measure ``(alpha, gamma, delta)`` on a record and test the system."""
    e = rec.energy
    pp: ProblemParams = rec.params
    alpha = pp.eps**2 * e.dirichlet + pp.lam * e.mass
    gamma = e.coulomb
    delta = pp.mu * e.nonlinear
    c = e.total
    p = pp.p
    tri = TripleIdentity(alpha, gamma, delta, c, k, p)
    r1 = abs(0.5 * alpha + 0.25 * gamma - delta / (p + 1) - c)
    r2 = abs(alpha + gamma - delta)
    slack3 = 3.0 * delta / (p + 1) - 0.5 * alpha - (5.0 + 2.0 * k) / 4.0 * gamma
    dmax = gmax = math.nan
    ok = True
    if 2 < p < 3 and c >= 0:
        b = triple_bounds(c, k, p)
        dmax, gmax = b["delta_max"], b["gamma_max"]
        tol = 1e-6 * max(alpha, gamma, delta, 1e-300)
        ok = delta <= dmax + tol and gamma <= gmax + tol
    return TripleCheck(tri, r1, r2, slack3, dmax, gmax, bool(ok))


@dataclass
class DiagnosticsReport:
    """Flat key/value summary of one solution and all checks run on it."""

    values: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = dict(self.values)
        out["failures"] = list(self.failures)
        out["ok"] = not self.failures
        return out


def diagnostics_report(rec, cd: ChargeDensity, k: float | None = None,
                       sobolev: SobolevEstimate | None = None,
                       rel_tol: float = 1e-6) -> DiagnosticsReport:
    """Run the solution-level checks and collect them into a flat report."""
    rep = DiagnosticsReport()
    v = rep.values
    v.update(rec.summary())
    p = rec.params.p
    k = cd.k if k is None else k
    v["k"] = k
    if not rec.converged:
        rep.failures.append("not_converged")
    scale = rec.h1_norm_sq
    if rec.nehari_residual >= rel_tol * scale:
        rep.failures.append("nehari_residual")
    if rec.pohozaev_residual >= 1e-2 * rec.pohozaev_scale:
        rep.failures.append("pohozaev_residual")
    if float(rec.u.values.min()) < -1e-12:
        rep.failures.append("negative_values")
    tc = check_triple_consistency(rec, k)
    v.update({
        "alpha": tc.identity.alpha,
        "gamma": tc.identity.gamma,
        "delta": tc.identity.delta,
        "triple_residual1": tc.residual1,
        "triple_residual2": tc.residual2,
        "triple_slack3": tc.slack3,
        "delta_max": tc.delta_max,
        "gamma_max": tc.gamma_max,
    })
    if not tc.bounds_ok:
        rep.failures.append("triple_bounds")
    if sobolev is not None and 2 < p < 5:
        try:
            lb = lower_bound_C(k, p, sobolev)
        except ValueError:
            lb = math.nan
        v["S_hat"] = sobolev.S_hat
        v["energy_lower_bound"] = lb
        if math.isfinite(lb) and rec.energy.total < lb * (1.0 - 1e-3):
            rep.failures.append("energy_lower_bound")
    return rep
