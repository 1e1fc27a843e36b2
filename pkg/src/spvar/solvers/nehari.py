"""Ground states on the Nehari manifold (p > 3)."""

from __future__ import annotations

import numpy as np

from ..charge import ChargeDensity
from ..functional import ProblemParams
from ..grid import ScalarField
from ._ops import Operators
from .records import DEFAULT_MAX_ITER, DEFAULT_TOL, SolutionRecord, make_record

__all__ = ["nehari_project", "nehari_scale", "ground_state_nehari"]

ARMIJO = 1e-4


def nehari_scale(A: float, B: float, C: float, p: float, mu: float,
                 check_unique: bool = True) -> float:
    """Positive root of ``A + t^2 B - mu t^(p-1) C``.

    ``A = ||u||^2``, ``B = D(u)``, ``C = int u_+^(p+1)``; ``t u`` then lies on
    the Nehari manifold.
    """
    if p <= 3:
        raise ValueError("Nehari projection not well-posed in this regime (p <= 3)")
    if C <= 0:
        raise ValueError("u_+ vanishes identically")

    def f(t):
        return A + t * t * B - mu * t ** (p - 1) * C

    lo, hi = 0.0, 1.0
    while f(hi) > 0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    scale = A + t * t * B
    for _ in range(50):
        ft = f(t)
        if abs(ft) <= 1e-13 * scale:
            break
        dft = 2.0 * t * B - mu * (p - 1) * t ** (p - 2) * C
        t_new = t - ft / dft
        t = t_new if lo <= t_new <= hi else 0.5 * (lo + hi)
        if f(t) > 0:
            lo = t
        else:
            hi = t
    if check_unique:
        ts = t * np.geomspace(1e-3, 1e3, 241)
        signs = np.sign(A + ts**2 * B - mu * ts ** (p - 1) * C)
        signs = signs[signs != 0]  # a sample may land on the root itself
        if np.count_nonzero(np.diff(signs)) != 1:
            raise RuntimeError("Nehari fibre has more than one sign change")
    return float(t)


def nehari_project(u: ScalarField, cd: ChargeDensity, pp: ProblemParams) -> float:
    """Scale ``t*`` with ``I'(t* u)(t* u) = 0``."""
    ops = Operators(u.grid, cd, pp)
    if pp.p <= 3:
        raise ValueError("Nehari projection not well-posed in this regime (p <= 3)")
    A, B, C, _ = ops.parts(u.values)
    return nehari_scale(A, B, C, pp.p, pp.mu)


def _check_seed(seed: ScalarField) -> np.ndarray:
    u = np.maximum(seed.values, 0.0)
    if not np.any(u > 0):
        raise ValueError("trivial seed: u_+ vanishes identically")
    return u


def ground_state_nehari(cd: ChargeDensity, pp: ProblemParams, seed: ScalarField,
                        tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                        callback=None) -> SolutionRecord:
    """Least-energy solution by preconditioned descent on the Nehari manifold.

    Each step moves along ``-(-eps^2 lap + lam)^{-1} I'(u)``, clips at zero and
    rescales back onto the manifold; step lengths come from Armijo
    backtracking.  Near convergence the energy decrease falls below round-off,
    so a step is then also accepted when it reduces the residual.
    """
    if not 3 < pp.p < 5:
        raise ValueError(f"Nehari ground states need p in (3, 5), got {pp.p}")
    grid = seed.grid
    ops = Operators(grid, cd, pp)
    p, mu = pp.p, pp.mu

    def project(v):
        A, B, C, phi = ops.parts(v)
        t = nehari_scale(A, B, C, p, mu, check_unique=False)
        E = ops.energy_from_parts(t * t * A, t**4 * B, t ** (p + 1) * C)
        return t * v, t * t * phi, E

    u, phi, E = project(_check_seed(seed))
    s = 1.0
    history = []
    rises = 0
    converged = False
    message = ""
    it = 0
    for it in range(1, max_iter + 1):
        g = ops.residual(u, phi)
        res = ops.l2(g) / ops.l2(u)
        history.append((E, res))
        if callback is not None:
            callback(it, E, res)
        if res < tol:
            converged = True
            break
        d = -ops.precondition(g)
        slope = ops.dot(g, d)
        s = min(1.0, 2.0 * s)
        accepted = False
        while s > 1e-12:
            v, phi_v, E_v = project(np.maximum(u + s * d, 0.0))
            if E_v <= E + ARMIJO * s * slope:
                accepted = True
            elif abs(E_v - E) <= 1e-12 * abs(E):
                res_v = ops.l2(ops.residual(v, phi_v)) / ops.l2(v)
                accepted = res_v < res
            if accepted:
                break
            s *= 0.5
        if not accepted:
            message = "line search failed"
            break
        rises = rises + 1 if E_v > E else 0
        u, phi, E = v, phi_v, E_v
        if rises >= 50:
            message = "energy increased on 50 consecutive steps"
            break
    else:
        message = "iteration limit reached"
    return make_record(ScalarField(grid, u), cd, pp, it, converged, tol,
                       method="nehari_descent", message=message, history=history)
