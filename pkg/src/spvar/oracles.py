"""Self-checks of the numerical kernels against independent references.

* :func:`poisson_oracle_suite` compares the FFT convolution with pairwise
  summation on small grids.
* :func:`gradient_check_suite` compares central finite differences of the
  energy with the L2 pairing of the first variation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .charge import ChargeDensity
from .coulomb import poisson_direct, poisson_fft
from .functional import ProblemParams, energy, first_variation_array
from .grid import Grid, ScalarField

__all__ = ["OracleResult", "poisson_oracle_suite", "gradient_check_suite", "random_smooth_field"]


@dataclass
class OracleResult:
    name: str
    tol: float
    errors: list = field(default_factory=list)

    @property
    def max_error(self) -> float:
        return float(max(self.errors)) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return bool(self.errors) and self.max_error < self.tol

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "cases": len(self.errors),
            "tol": self.tol,
            "max_error": self.max_error,
            "passed": self.passed,
        }


def poisson_oracle_suite(rng: np.random.Generator, n: int = 8, L: float = 2.0,
                         cases: int = 20, tol: float = 1e-10) -> OracleResult:
    """FFT potential versus direct summation for random charges on ``n^3``."""
    grid = Grid(n, L)
    out = OracleResult("poisson_fft_vs_direct", tol)
    for _ in range(cases):
        q = ScalarField(grid, rng.uniform(-1.0, 1.0, grid.shape))
        fast = poisson_fft(q).values
        ref = poisson_direct(q).values
        out.errors.append(float(np.max(np.abs(fast - ref)) / np.max(np.abs(ref))))
    return out


def random_smooth_field(grid: Grid, rng: np.random.Generator, width: float | None = None,
                        smoothing: float = 1.5) -> np.ndarray:
    """Positive Gaussian envelope modulated by smoothed noise."""
    width = 0.35 * grid.L if width is None else width
    x, y, z = grid.coords
    c = grid.center
    env = np.exp(-((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2) / (2 * width**2))
    noise = ndimage.gaussian_filter(rng.standard_normal(grid.shape), smoothing, mode="wrap")
    noise /= np.max(np.abs(noise))
    return env * (1.0 + 0.5 * noise)


def gradient_check_suite(grid: Grid, cd: ChargeDensity, pp: ProblemParams,
                         rng: np.random.Generator, pairs: int = 20, t: float = 1e-4,
                         tol: float = 1e-5) -> OracleResult:
    """Relative mismatch of ``(I(u + t v) - I(u - t v)) / 2t`` and ``<I'(u), v>``."""
    out = OracleResult("gradient_check", tol)
    dv = grid.cell_volume
    for _ in range(pairs):
        u = random_smooth_field(grid, rng)
        v = random_smooth_field(grid, rng)
        g, _ = first_variation_array(grid, cd, pp, u)
        pairing = float(dv * np.sum(g * v))
        plus = energy(ScalarField(grid, u + t * v), cd, pp).total
        minus = energy(ScalarField(grid, u - t * v), cd, pp).total
        fd = (plus - minus) / (2.0 * t)
        out.errors.append(abs(fd - pairing) / abs(pairing))
    return out
