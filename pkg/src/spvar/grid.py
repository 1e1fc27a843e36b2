"""Uniform cell-centred 3D grids, scalar fields and spectral calculus.

Every field lives on a cube ``[-L, L]^3`` (shifted by ``center``) sampled at
``n`` cell centres per axis, so no grid point ever sits on the origin of the
box.  Derivatives are spectral; the fields handled here are expected to decay
to (numerically) zero before the box faces, and :func:`boundary_fraction`
reports how well that holds.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.fft as sfft
from scipy import ndimage

__all__ = [
    "Grid",
    "ScalarField",
    "make_grid",
    "integrate",
    "gradient_field",
    "laplacian",
    "dirichlet_integral",
    "norm",
    "boundary_fraction",
    "shift_cells",
    "resample",
    "fft_workers",
]


def fft_workers() -> int:
    """Worker count for scipy.fft, capped by ``SPVAR_THREADS``."""
    env = os.environ.get("SPVAR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def allowed_size(n: int) -> bool:
    """Powers of two, plus three times a power of two (e.g. 48, 96)."""
    return _is_power_of_two(n) or (n % 3 == 0 and _is_power_of_two(n // 3))


@dataclass(frozen=True, eq=False)
class Grid:
    """Cell-centred grid on ``center + [-L, L]^3`` with ``n`` points per axis."""

    n: int
    L: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or not allowed_size(int(self.n)):
            raise ValueError(f"n must be power of two (or 3 times one), got {self.n!r}")
        if self.n < 8:
            raise ValueError(f"n must be at least 8, got {self.n}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"L must be positive, got {self.L!r}")
        c = tuple(float(v) for v in self.center)
        if len(c) != 3:
            raise ValueError("center must be a 3-vector")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "center", c)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.n, self.L, self.center) == (other.n, other.L, other.center)

    def __hash__(self):
        return hash((self.n, self.L, self.center))

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def cell_volume(self) -> float:
        return self.h**3

    @cached_property
    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        base = -self.L + (np.arange(self.n) + 0.5) * self.h
        return tuple(base + c for c in self.center)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays of shapes (n,1,1), (1,n,1), (1,1,n)."""
        x, y, z = self.axes
        return x[:, None, None], y[None, :, None], z[None, None, :]

    @cached_property
    def radius(self) -> np.ndarray:
        """Distance of every grid point from the box centre."""
        x, y, z = self.coords
        cx, cy, cz = self.center
        return np.sqrt((x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2)

    def points(self) -> np.ndarray:
        """All grid points as an (n^3, 3) array in lexicographic order."""
        x, y, z = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Angular wavenumbers for an rfftn layout, Nyquist mode zeroed.

        Used for first derivatives only: the Nyquist mode has no real odd
        derivative, so it is dropped there.
        """
        n, h = self.n, self.h
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
        k[n // 2] = 0.0
        kz = 2.0 * np.pi * np.fft.rfftfreq(n, d=h)
        kz[-1] = 0.0
        return k[:, None, None], k[None, :, None], kz[None, None, :]

    @cached_property
    def k_squared(self) -> np.ndarray:
        """Symbol of ``-lap``, with the Nyquist mode kept at ``(pi/h)^2``.

        Dropping it would leave checkerboard modes unpenalised by the
        Laplacian, and coupled solves then pick up spurious grid-scale
        oscillations.  The Dirichlet integral uses the same symbol, so
        ``-<u, lap u> == int |grad u|^2`` still holds exactly.
        """
        n, h = self.n, self.h
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
        kz = 2.0 * np.pi * np.fft.rfftfreq(n, d=h)
        return k[:, None, None] ** 2 + k[None, :, None] ** 2 + kz[None, None, :] ** 2

    def scaled(self, factor: float, center=None) -> "Grid":
        """Grid with the same ``n`` and half-width ``factor * L``."""
        return Grid(self.n, self.L * factor, self.center if center is None else tuple(center))


def make_grid(n: int, L: float, center: Sequence[float] = (0.0, 0.0, 0.0)) -> Grid:
    return Grid(n, L, tuple(center))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real samples of a function on a :class:`Grid`, shape ``(n, n, n)``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.n**3:
            raise ValueError(f"expected {self.grid.n**3} values, got {v.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, func) -> "ScalarField":
        x, y, z = grid.coords
        return cls(grid, np.broadcast_to(func(x, y, z), grid.shape).copy())

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)

    def _combine(self, other, op):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            other = other.values
        return ScalarField(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


def integrate(f: ScalarField) -> float:
    """Midpoint rule: ``h^3 * sum(values)``."""
    return float(f.grid.cell_volume * np.sum(f.values))


# -- spectral kernels on raw arrays (used by the hot loops in the solvers) --

def _rfft(a: np.ndarray) -> np.ndarray:
    return sfft.rfftn(a, workers=fft_workers())


def _irfft(a: np.ndarray, n: int) -> np.ndarray:
    return sfft.irfftn(a, s=(n, n, n), workers=fft_workers())


def gradient_array(grid: Grid, a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    spec = _rfft(a)
    return tuple(_irfft(1j * k * spec, grid.n) for k in grid.wavenumbers)


def laplacian_array(grid: Grid, a: np.ndarray) -> np.ndarray:
    return _irfft(-grid.k_squared * _rfft(a), grid.n)


def helmholtz_solve_array(grid: Grid, a: np.ndarray, eps2: float, lam: float) -> np.ndarray:
    """Apply ``(-eps2 * lap + lam)^{-1}`` spectrally."""
    return _irfft(_rfft(a) / (eps2 * grid.k_squared + lam), grid.n)


def dirichlet_array(grid: Grid, a: np.ndarray) -> float:
    """``int |grad a|^2`` evaluated through Parseval."""
    spec = _rfft(a)
    w = np.full(spec.shape[-1], 2.0)
    w[0] = 1.0
    if grid.n % 2 == 0:
        w[-1] = 1.0
    total = np.sum(grid.k_squared * np.abs(spec) ** 2 * w)
    return float(total * grid.cell_volume / grid.n**3)


def gradient_field(f: ScalarField) -> tuple[ScalarField, ScalarField, ScalarField]:
    """Spectral partial derivatives of ``f``.

    The periodic extension of ``f`` is differentiated, so the result is only
    meaningful when ``f`` is negligible near the faces; check with
    :func:`boundary_fraction`.
    """
    return tuple(ScalarField(f.grid, g) for g in gradient_array(f.grid, f.values))


def laplacian(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, laplacian_array(f.grid, f.values))


def dirichlet_integral(f: ScalarField, spectral: bool = True) -> float:
    """``int |grad f|^2``, via Parseval or via the real-space gradient."""
    if spectral:
        return dirichlet_array(f.grid, f.values)
    return float(sum(np.sum(g**2) for g in gradient_array(f.grid, f.values)) * f.grid.cell_volume)


def norm(f: ScalarField, kind: str = "L2", q: float | None = None) -> float:
    """L2, H1 or Lq norm of ``f``.

    ``kind`` is ``"L2"``, ``"H1"`` or ``"Lq"`` (with ``q``); ``"L<q>"`` such as
    ``"L4"`` is accepted as shorthand.
    """
    kind_u = kind.upper()
    if kind_u.startswith("L") and kind_u not in ("L2", "LQ"):
        q = float(kind_u[1:])
        kind_u = "LQ"
    if kind_u == "L2":
        return float(np.sqrt(integrate(f.with_values(f.values**2))))
    if kind_u == "H1":
        l2sq = f.grid.cell_volume * float(np.sum(f.values**2))
        return float(np.sqrt(dirichlet_array(f.grid, f.values) + l2sq))
    if kind_u == "LQ":
        if q is None or q < 1:
            raise ValueError(f"Lq norm needs q >= 1, got {q!r}")
        return float((f.grid.cell_volume * np.sum(np.abs(f.values) ** q)) ** (1.0 / q))
    raise ValueError(f"unknown norm kind {kind!r}")


def boundary_fraction(f: ScalarField, width: int | None = None, power: int = 2) -> float:
    """Share of ``int |f|^power`` carried by the outer ``width`` cells of the box."""
    n = f.grid.n
    w = max(2, n // 16) if width is None else width
    a = np.abs(f.values) ** power
    total = float(np.sum(a))
    if total == 0.0:
        return 0.0
    inner = float(np.sum(a[w : n - w, w : n - w, w : n - w]))
    return (total - inner) / total


def shift_cells(f: ScalarField, shift: Sequence[int]) -> ScalarField:
    """Translate by whole cells, filling vacated cells with zeros."""
    n = f.grid.n
    out = np.zeros_like(f.values)
    src = []
    dst = []
    for s in shift:
        s = int(s)
        if abs(s) >= n:
            return ScalarField(f.grid, out)
        if s >= 0:
            src.append(slice(0, n - s))
            dst.append(slice(s, n))
        else:
            src.append(slice(-s, n))
            dst.append(slice(0, n + s))
    out[tuple(dst)] = f.values[tuple(src)]
    return ScalarField(f.grid, out)


def resample(f: ScalarField, points: np.ndarray, order: int = 1) -> np.ndarray:
    """Interpolate ``f`` at physical ``points`` (shape (..., 3)); zero outside.

    ``order=1`` is trilinear interpolation, ``order=3`` a cubic spline.
    """
    g = f.grid
    pts = np.asarray(points, dtype=float)
    shape = pts.shape[:-1]
    idx = [(pts[..., i].ravel() - g.axes[i][0]) / g.h for i in range(3)]
    vals = ndimage.map_coordinates(
        f.values, idx, order=order, mode="constant", cval=0.0, prefilter=order > 1
    )
    return vals.reshape(shape)
