"""Radial ground states of the limit problems.

``rho_inf = 0``: the positive radial solution of ``-u'' - 2u'/r + lam u = mu u^p``.
``rho_inf > 0``: the radial solution of the constant-density system

    -u'' - 2u'/r + lam u + rho_inf phi u = mu u^p,
    -phi'' - 2phi'/r = rho_inf u^2.

The initial value ``u(0)`` is first located by shooting with bisection.  The
profile is then polished by Newton's method on a Chebyshev collocation of
``[0, R]`` with ``u'(0) = 0`` and a Robin condition matching the decaying
tail at ``R``.  Outside ``[0, R]`` the profile continues as
``C exp(-sqrt(lam) r) / r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.fft import dct
from scipy.integrate import solve_ivp
from scipy.linalg import solve

__all__ = [
    "RadialProfile",
    "shoot_initial_value",
    "radial_limit_ground_state",
    "write_golden",
    "read_golden",
]


def _cheb(N: int):
    """Chebyshev points ``cos(j pi / N)`` and the differentiation matrix."""
    j = np.arange(N + 1)
    x = np.cos(np.pi * j / N)
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    X = np.tile(x, (N + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def _clenshaw_curtis(N: int) -> np.ndarray:
    theta = np.pi * np.arange(N + 1) / N
    w = np.zeros(N + 1)
    v = np.ones(N - 1)
    inner = slice(1, N)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N * N - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(N * theta[inner]) / (N * N - 1)
    else:
        w[0] = w[N] = 1.0 / (N * N)
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2.0 * v / N
    return w


def _power(u, p):
    return np.maximum(u, 0.0) ** p


def shoot_initial_value(p: float, lam: float = 1.0, mu: float = 1.0,
                        r_max: float | None = None, tol: float = 1e-14) -> float:
    """Bisect on ``u(0)`` until the trajectory neither crosses zero nor turns up."""
    lower = (lam / mu) ** (1.0 / (p - 1.0))
    upper = 1e3
    r_max = 40.0 / math.sqrt(lam) if r_max is None else r_max

    def classify(a: float) -> int:
        return _shoot(a, p, lam, mu, r_max)[0]

    lo, hi = lower * (1.0 + 1e-9), upper
    if classify(lo) != -1 or classify(hi) != 1:
        raise ValueError(
            f"shooting bracket not found within u(0) in ({lower:.6g}, {upper:g})")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if classify(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _shoot(a, p, lam, mu, r_max):
    """Integrate from ``u(0) = a``; returns (+1 crossed zero / -1 turned up, solution)."""
    r0 = 1e-6
    u0 = a + (lam * a - mu * a**p) * r0**2 / 6.0
    v0 = (lam * a - mu * a**p) * r0 / 3.0

    def rhs(r, y):
        return [y[1], -2.0 * y[1] / r + lam * y[0] - mu * _power(y[0], p)]

    def cross(r, y):
        return y[0]

    def turn(r, y):
        return y[1]

    cross.terminal = turn.terminal = True
    cross.direction = -1
    turn.direction = 1
    sol = solve_ivp(rhs, (r0, r_max), [u0, v0], method="DOP853", rtol=1e-12,
                    atol=1e-14 * a, events=(cross, turn), dense_output=True)
    if sol.t_events[0].size:
        return 1, sol
    if sol.t_events[1].size:
        return -1, sol
    return (1 if sol.y[0, -1] < 0 else -1), sol



def _trajectory_guess(a, p, lam, mu, r):
    """Shot profile at ``|r|``, continued by the linear tail where it degrades."""
    _, sol = _shoot(a, p, lam, mu, 40.0 / math.sqrt(lam))
    r = np.abs(r)
    # trust the trajectory until it has decayed by 1e-7 or stopped
    t = sol.t
    u = sol.y[0]
    ok = (u > 1e-7 * a) & (sol.y[1] < 0)
    ok[0] = True
    rc = t[np.nonzero(~ok)[0][0] - 1] if np.any(~ok) else t[-1]
    out = np.empty_like(r)
    inner = r <= rc
    out[inner] = sol.sol(np.maximum(r[inner], t[0]))[0]
    uc = sol.sol(rc)[0]
    out[~inner] = uc * (rc / r[~inner]) * np.exp(-math.sqrt(lam) * (r[~inner] - rc))
    return out


@dataclass
class RadialProfile:
    """Radial ground state sampled on Chebyshev nodes of ``[0, R]``."""

    p: float
    lam: float
    mu: float
    rho_inf: float
    R: float
    coeffs: np.ndarray = field(repr=False)
    phi_coeffs: np.ndarray | None = field(default=None, repr=False)
    u0: float = 0.0
    energy: float = 0.0
    residual: float = 0.0
    nodes: np.ndarray = field(default=None, repr=False)
    values: np.ndarray = field(default=None, repr=False)

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        inside = r <= self.R
        out[inside] = C.chebval(2.0 * r[inside] / self.R - 1.0, self.coeffs)
        if np.any(~inside):
            uR = C.chebval(1.0, self.coeffs)
            ro = r[~inside]
            out[~inside] = uR * (self.R / ro) * np.exp(-math.sqrt(self.lam) * (ro - self.R))
        return out

    def phi(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.phi_coeffs is None:
            return np.zeros_like(r)
        out = np.empty_like(r)
        inside = r <= self.R
        out[inside] = C.chebval(2.0 * r[inside] / self.R - 1.0, self.phi_coeffs)
        out[~inside] = C.chebval(1.0, self.phi_coeffs) * self.R / r[~inside]
        return out

    def table(self, r=None) -> tuple[np.ndarray, np.ndarray]:
        if r is None:
            r = np.linspace(0.0, self.R, 401)
        return np.asarray(r, dtype=float), self(r)


def _nodes(R: float, N: int):
    """Chebyshev nodes mapped to ``[0, R]`` (descending) and ``d/dr``."""
    x, D = _cheb(N)
    return 0.5 * R * (x + 1.0), D * (2.0 / R)


def _collocation_newton(p, lam, mu, rho_inf, R, N, u_init, phi_init, max_iter=60):
    r, D = _nodes(R, N)
    inv_r = np.zeros_like(r)
    inv_r[:-1] = 1.0 / r[:-1]
    L = D @ D + 2.0 * inv_r[:, None] * D
    n = N + 1
    robin = math.sqrt(lam) + 1.0 / R
    u = u_init.copy()
    phi = phi_init.copy()
    coupled = rho_inf > 0

    def bc(J, F, v, outer):
        # row 0 is r = R (Robin), row -1 is r = 0 (symmetry)
        F[0] = D[0] @ v + outer * v[0]
        F[-1] = D[-1] @ v
        J[0] = D[0]
        J[0, 0] += outer
        J[-1] = D[-1]

    def system(u, phi):
        F1 = L @ u - lam * u - rho_inf * phi * u + mu * _power(u, p)
        J11 = L - np.diag(lam + rho_inf * phi - mu * p * _power(u, p - 1))
        bc(J11, F1, u, robin)
        if not coupled:
            return F1, J11
        F2 = L @ phi + rho_inf * u * u
        J22 = L.copy()
        bc(J22, F2, phi, 1.0 / R)
        J12 = -np.diag(rho_inf * u)
        J21 = np.diag(2.0 * rho_inf * u)
        J12[[0, -1]] = 0.0
        J21[[0, -1]] = 0.0
        return np.concatenate([F1, F2]), np.block([[J11, J12], [J21, J22]])

    F, J = system(u, phi)
    for _ in range(max_iter):
        step = solve(J, -F)
        norm0 = np.linalg.norm(F)
        t = 1.0
        while True:
            u_new = u + t * step[:n]
            phi_new = phi + t * step[n:] if coupled else phi
            F_new, J_new = system(u_new, phi_new)
            if np.linalg.norm(F_new) < (1.0 - 1e-4 * t) * norm0 or t < 1e-3:
                break
            t *= 0.5
        u, phi, F, J = u_new, phi_new, F_new, J_new
        if t == 1.0 and np.max(np.abs(step[:n])) < 1e-14 * np.max(np.abs(u)):
            break
    ur = D @ u
    terms = [np.abs(L @ u - 2.0 * inv_r * ur), np.abs(2.0 * inv_r * ur), lam * np.abs(u),
             rho_inf * np.abs(phi * u), mu * _power(u, p)]
    scale = max(float(np.max(t_[1:-1])) for t_ in terms)
    F1 = L @ u - lam * u - rho_inf * phi * u + mu * _power(u, p)
    res = float(np.max(np.abs(F1[1:-1])) / scale)
    return r, D, u, phi, res


def _to_coeffs(vals: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients (in ``2r/R - 1``) of samples at the extreme points."""
    N = vals.size - 1
    c = dct(vals, type=1) / N
    c[0] *= 0.5
    c[-1] *= 0.5
    return c


def radial_limit_ground_state(p: float, lam: float = 1.0, mu: float = 1.0,
                              rho_inf: float = 0.0, R: float | None = None,
                              N: int = 200) -> RadialProfile:
    """Ground state of the limit problem and its energy (the reference level).

    For ``rho_inf > 0`` the coupled system is reached by continuation in the
    coupling strength starting from the uncoupled profile.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if not 2 < p < 5 and not (rho_inf == 0 and 1 < p < 5):
        raise ValueError(f"p must lie in (2, 5), got {p}")
    R = 20.0 / math.sqrt(lam) if R is None else float(R)
    a = shoot_initial_value(p, lam, mu)
    r, _ = _nodes(R, N)
    guess = _trajectory_guess(a, p, lam, mu, r)
    r, D, u, phi, res = _collocation_newton(p, lam, mu, 0.0, R, N, guess, np.zeros_like(guess))
    if rho_inf > 0:
        for t in np.linspace(0.0, 1.0, 6)[1:]:
            r, D, u, phi, res = _collocation_newton(p, lam, mu, t * rho_inf, R, N, u, phi)
    if np.any(u < -1e-8 * u.max()) or not np.isfinite(res):
        raise RuntimeError("collocation Newton did not reach a positive profile")
    w = 4.0 * np.pi * 0.5 * R * _clenshaw_curtis(N) * r * r
    ur = D @ u
    grad2 = float(np.sum(w * ur**2))
    mass = float(np.sum(w * u**2))
    nonlin = float(np.sum(w * _power(u, p + 1)))
    coul = float(np.sum(w * rho_inf * phi * u**2)) if rho_inf > 0 else 0.0
    energy = 0.5 * (grad2 + lam * mass) + 0.25 * coul - mu / (p + 1) * nonlin
    coeffs = _to_coeffs(u)
    phic = _to_coeffs(phi) if rho_inf > 0 else None
    return RadialProfile(p, lam, mu, rho_inf, R, coeffs, phic, float(u[-1]),
                         energy, res, r[::-1].copy(), u[::-1].copy())


def write_golden(path, profile: RadialProfile, r=None) -> None:
    r, u = profile.table(r)
    header = (f"# radial ground state p={profile.p!r} lam={profile.lam!r} mu={profile.mu!r} "
              f"rho_inf={profile.rho_inf!r} u0={profile.u0:.17g} energy={profile.energy:.17g}\n"
              "# r value\n")
    lines = "".join(f"{ri:.17g} {ui:.17g}\n" for ri, ui in zip(r, u))
    Path(path).write_text(header + lines)


def read_golden(path) -> tuple[dict, np.ndarray, np.ndarray]:
    meta = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k] = float(v)
            continue
        if line.strip():
            rows.append([float(t) for t in line.split()])
    arr = np.asarray(rows)
    return meta, arr[:, 0], arr[:, 1]
