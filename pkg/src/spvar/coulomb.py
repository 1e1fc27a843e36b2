"""Newtonian potential of a charge density on the grid.

``phi = q * G`` with ``G(x) = 1 / (4 pi |x|)`` is evaluated as a free-space
(aperiodic) discrete convolution: the charge is zero-padded onto a ``(2n)^3``
grid so periodic images never reach the original box.  The kernel is sampled
at cell offsets, except at the singular offset where the origin weight of the
corrected trapezoidal rule for ``1/|x|`` on a cubic lattice is used.  That
weight cancels the leading lattice-sum error, so smooth charges see a
fourth-order accurate quadrature.
:func:`poisson_direct` evaluates the same discrete sum term by term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy import integrate as sint

from .charge import ChargeDensity, rho_on_grid
from .grid import Grid, ScalarField, fft_workers, gradient_array

__all__ = [
    "OMEGA",
    "CoulombSolution",
    "origin_kernel",
    "poisson_fft",
    "poisson_direct",
    "coulomb_energy",
    "coulomb_energy_direct",
    "exterior_monopole_energy",
]

OMEGA = 4.0 * math.pi

# minus the analytically continued lattice sum  sum_{j != 0} 1/|j|  over Z^3
_LATTICE_ORIGIN_WEIGHT = 2.837297479480619

DIRECT_MAX_N = 16


def origin_kernel(h: float) -> float:
    """Value used for ``1/(4 pi |x|)`` at the zero offset on a lattice of spacing ``h``."""
    return _LATTICE_ORIGIN_WEIGHT / (OMEGA * h)


def _kernel_value(offsets: np.ndarray, h: float) -> np.ndarray:
    """Discrete kernel at integer cell offsets (last axis of length 3)."""
    r = h * np.sqrt(np.sum(offsets.astype(float) ** 2, axis=-1))
    out = np.empty_like(r)
    zero = r == 0
    out[~zero] = 1.0 / (OMEGA * r[~zero])
    out[zero] = origin_kernel(h)
    return out


@lru_cache(maxsize=8)
def _kernel_spectrum(n: int, h: float) -> np.ndarray:
    m = 2 * n
    i = np.fft.fftfreq(m) * m
    off = np.stack(np.meshgrid(i, i, i, indexing="ij"), axis=-1)
    G = _kernel_value(off, h)
    # offset -n is never reached by two points of the original box
    return sfft.rfftn(G, workers=fft_workers())


def convolve_array(grid: Grid, q: np.ndarray) -> np.ndarray:
    """``h^3 sum_j G(x_i - x_j) q_j`` for every point of the box."""
    n, h = grid.n, grid.h
    m = 2 * n
    spec = sfft.rfftn(q, s=(m, m, m), workers=fft_workers())
    spec *= _kernel_spectrum(n, h)
    out = sfft.irfftn(spec, s=(m, m, m), workers=fft_workers())[:n, :n, :n]
    return out * grid.cell_volume


def poisson_fft(q: ScalarField) -> ScalarField:
    """Free-space potential of ``q`` (zero-padded FFT convolution)."""
    return ScalarField(q.grid, convolve_array(q.grid, q.values))


def poisson_direct(q: ScalarField) -> ScalarField:
    """Same discrete convolution as :func:`poisson_fft`, summed pair by pair."""
    g = q.grid
    if g.n > DIRECT_MAX_N:
        raise ValueError(f"grid too large for direct summation (n = {g.n} > {DIRECT_MAX_N})")
    idx = np.stack(np.meshgrid(*(np.arange(g.n),) * 3, indexing="ij"), axis=-1).reshape(-1, 3)
    qf = q.values.ravel()
    phi = np.empty_like(qf)
    chunk = 512
    for start in range(0, idx.shape[0], chunk):
        off = idx[start : start + chunk, None, :] - idx[None, :, :]
        phi[start : start + chunk] = _kernel_value(off, g.h) @ qf
    return ScalarField(g, phi.reshape(g.shape) * g.cell_volume)


@dataclass(frozen=True)
class CoulombSolution:
    """Potential ``phi`` of ``rho u^2`` and the two forms of its energy.

    ``coulomb_energy`` is ``D(u) = int rho phi u^2``; ``dirichlet_energy`` is
    ``int |grad phi|^2`` over all space (box part plus far-field tail).
    """

    phi: ScalarField
    dirichlet_energy: float
    coulomb_energy: float
    charge: float = 0.0
    tail_energy: float = 0.0


@lru_cache(maxsize=64)
def _face_integral(d: float, a0: float, a1: float, b0: float, b1: float) -> float:
    """``int int d / (d^2 + x^2 + y^2)^2`` over ``[a0,a1] x [b0,b1]``."""

    def inner(x):
        A = d * d + x * x
        sa = math.sqrt(A)

        def F(y):
            return y / (2.0 * A * (A + y * y)) + math.atan(y / sa) / (2.0 * A * sa)

        return F(b1) - F(b0)

    val, _ = sint.quad(inner, a0, a1, epsabs=1e-14, epsrel=1e-12, limit=200)
    return d * val


def exterior_monopole_energy(grid: Grid, charge: float, centroid) -> float:
    """``int |grad (Q / 4 pi |x - c|)|^2`` over the complement of the box.

    The exterior is split into the six cones subtended by the faces; over the
    cone behind a face at normal distance ``d`` the radial integral of
    ``r^-4`` reduces to ``int_face d / r^4 dA``.
    """
    if charge == 0.0:
        return 0.0
    c = np.asarray(centroid, dtype=float)
    lo = np.asarray(grid.center) - grid.L
    hi = np.asarray(grid.center) + grid.L
    total = 0.0
    for ax in range(3):
        others = [i for i in range(3) if i != ax]
        a0, a1 = lo[others[0]] - c[others[0]], hi[others[0]] - c[others[0]]
        b0, b1 = lo[others[1]] - c[others[1]], hi[others[1]] - c[others[1]]
        for d in (hi[ax] - c[ax], c[ax] - lo[ax]):
            total += _face_integral(float(d), float(a0), float(a1), float(b0), float(b1))
    return charge**2 / OMEGA**2 * total


def coulomb_energy(u: ScalarField, cd: ChargeDensity) -> CoulombSolution:
    """Potential and Coulomb energy of the charge ``rho u^2``.

    ``grad phi`` is obtained as ``G * grad q`` (``q`` decays inside the box,
    so its spectral gradient is clean), which avoids differentiating the slowly
    decaying, non-periodic ``phi``.  The part of ``int |grad phi|^2`` outside
    the box is added from the monopole field about the charge centroid.
    """
    g = u.grid
    q = rho_on_grid(cd, g) * u.values**2
    if not np.any(q):
        zero = ScalarField.zeros(g)
        return CoulombSolution(zero, 0.0, 0.0)
    phi = convolve_array(g, q)
    D = float(g.cell_volume * np.sum(q * phi))
    grads = [convolve_array(g, dq) for dq in gradient_array(g, q)]
    inside = float(g.cell_volume * sum(np.sum(a * a) for a in grads))
    Q = float(g.cell_volume * np.sum(q))
    x, y, z = g.coords
    centroid = [float(g.cell_volume * np.sum(q * c) / Q) for c in (x, y, z)]
    tail = exterior_monopole_energy(g, Q, centroid)
    return CoulombSolution(ScalarField(g, phi), inside + tail, D, Q, tail)


def coulomb_energy_direct(u: ScalarField, cd: ChargeDensity) -> float:
    """``D(u)`` as the explicit double sum over cell pairs (small grids only)."""
    q = ScalarField(u.grid, rho_on_grid(cd, u.grid) * u.values**2)
    return float(u.grid.cell_volume * np.sum(q.values * poisson_direct(q).values))
