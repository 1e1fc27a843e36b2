"""Analytic charge densities rho(x) >= 0 with exact gradients.

Four families are provided:

* :class:`Constant` -- ``rho_inf`` everywhere (the problem at infinity);
* :class:`CoercivePower` -- ``rho0 (1 + |x|^2)^(s/2)``, unbounded;
* :class:`BumpedConstant` -- ``rho_inf - a exp(-|x - x_b|^2 / sigma^2)``, which
  tends to ``rho_inf`` from below and is strictly below it near ``x_b``;
* :class:`ExpCoercive` -- ``rho0 exp(beta (1 + |x|)^alpha)``.

Each density also carries ``k``, the constant in the one-sided bound
``k rho(x) <= (x, grad rho(x))`` used by the Pohozaev-based estimates, and a
:class:`DecayMetadata` record with the constants of the a-priori decay bounds.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .grid import Grid

__all__ = [
    "ChargeDensity",
    "Constant",
    "CoercivePower",
    "BumpedConstant",
    "ExpCoercive",
    "DecayMetadata",
    "KCondition",
    "eval_rho",
    "grad_rho",
    "rho_on_grid",
    "x_dot_grad_rho_on_grid",
    "verify_k_condition",
    "k_threshold",
    "check_low_p_admissible",
    "from_dict",
    "allowed_keys",
]


@dataclass(frozen=True)
class DecayMetadata:
    """Constants attached to a density.

    ``rho_inf`` is the limit at infinity (``math.inf`` for coercive families).
    ``A``, ``alpha``, ``beta`` are the constants of the stretched-exponential
    decay bound (``None`` when the hypotheses do not apply).  ``grad_growth``
    is ``(a, b)`` with ``|grad rho| = O(|x|^a e^{b|x|})``, or ``None`` if no
    such bound exists.
    """

    rho_inf: float
    A: float | None = None
    alpha: float | None = None
    beta: float | None = None
    grad_growth: tuple[float, float] | None = (0.0, 0.0)

    @property
    def coercive(self) -> bool:
        return math.isinf(self.rho_inf)


class ChargeDensity:
    """Base class; subclasses implement ``_value`` and ``_gradient``."""

    k: float = 0.0
    variant: str = ""

    def value(self, x, y, z) -> np.ndarray:
        return self._value(np.asarray(x, float), np.asarray(y, float), np.asarray(z, float))

    def gradient(self, x, y, z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._gradient(np.asarray(x, float), np.asarray(y, float), np.asarray(z, float))

    @property
    def metadata(self) -> DecayMetadata:
        raise NotImplementedError

    def params(self) -> dict:
        """Numeric parameters, keyed as in the experiment config."""
        raise NotImplementedError

    def describe(self) -> str:
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{self.variant}({inner})"

    def scaled(self, factor: float) -> "ChargeDensity":
        """The density ``factor * rho`` (used for coupling continuation)."""
        return _Scaled(self, float(factor))

    @property
    def is_zero(self) -> bool:
        return False


@dataclass(frozen=True)
class Constant(ChargeDensity):
    rho_inf: float
    k: float = 0.0
    variant: str = field(default="constant", init=False, repr=False)

    def __post_init__(self):
        if self.rho_inf < 0:
            raise ValueError("rho_inf must be nonnegative")

    def _value(self, x, y, z):
        return np.full(np.broadcast_shapes(x.shape, y.shape, z.shape), float(self.rho_inf))

    def _gradient(self, x, y, z):
        zero = np.zeros(np.broadcast_shapes(x.shape, y.shape, z.shape))
        return zero, zero.copy(), zero.copy()

    @property
    def metadata(self):
        return DecayMetadata(rho_inf=float(self.rho_inf))

    def params(self):
        return {"rho_inf": self.rho_inf}

    @property
    def is_zero(self):
        return self.rho_inf == 0.0


@dataclass(frozen=True)
class CoercivePower(ChargeDensity):
    """``rho0 (1 + |x|^2)^(s/2)``.

    ``rho |x|^(1 - 2 alpha)`` tends to ``rho0`` for ``alpha = (s + 1) / 2``;
    the stored decay constant is ``A = decay_fraction * rho0`` (any value
    below ``rho0`` satisfies the hypothesis).
    """

    rho0: float
    s: float
    k: float = 0.0
    decay_fraction: float = 0.25
    variant: str = field(default="coercive_power", init=False, repr=False)

    def __post_init__(self):
        if self.rho0 <= 0 or self.s <= 0:
            raise ValueError("CoercivePower needs rho0 > 0 and s > 0")
        if not 0 < self.decay_fraction < 1:
            raise ValueError("decay_fraction must lie in (0, 1)")

    def _value(self, x, y, z):
        return self.rho0 * (1.0 + x * x + y * y + z * z) ** (0.5 * self.s)

    def _gradient(self, x, y, z):
        base = 1.0 + x * x + y * y + z * z
        f = self.rho0 * self.s * base ** (0.5 * self.s - 1.0)
        return f * x, f * y, f * z

    @property
    def metadata(self):
        A = self.decay_fraction * self.rho0
        alpha = 0.5 * (self.s + 1.0)
        # any beta > 0 bounds a polynomial; half the admissible ceiling 2 sqrt(A)
        return DecayMetadata(
            rho_inf=math.inf, A=A, alpha=alpha, beta=math.sqrt(A),
            grad_growth=(max(self.s - 1.0, 0.0), 0.0),
        )

    def params(self):
        return {"rho0": self.rho0, "s": self.s}


@dataclass(frozen=True)
class BumpedConstant(ChargeDensity):
    """``rho_inf - a exp(-|x - x_b|^2 / sigma^2)`` with ``0 < a < rho_inf``."""

    rho_inf: float
    a: float
    sigma: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    k: float = 0.0
    variant: str = field(default="bumped_constant", init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.a < self.rho_inf:
            raise ValueError("BumpedConstant needs 0 < a < rho_inf")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def _bump(self, x, y, z):
        cx, cy, cz = self.center
        dx, dy, dz = x - cx, y - cy, z - cz
        return dx, dy, dz, self.a * np.exp(-(dx * dx + dy * dy + dz * dz) / self.sigma**2)

    def _value(self, x, y, z):
        return self.rho_inf - self._bump(x, y, z)[3]

    def _gradient(self, x, y, z):
        dx, dy, dz, b = self._bump(x, y, z)
        f = 2.0 * b / self.sigma**2
        return f * dx, f * dy, f * dz

    @property
    def metadata(self):
        return DecayMetadata(rho_inf=float(self.rho_inf))

    def params(self):
        return {"rho_inf": self.rho_inf, "a": self.a, "sigma": self.sigma, "center": list(self.center)}


@dataclass(frozen=True)
class ExpCoercive(ChargeDensity):
    """``rho0 exp(beta (1 + |x|)^alpha)``.

    The gradient is continuous away from the origin; at the origin it is taken
    as zero (the radial derivative has a cone there, which is irrelevant on a
    cell-centred grid).
    """

    rho0: float
    beta: float
    alpha: float
    k: float = 0.0
    variant: str = field(default="exp_coercive", init=False, repr=False)

    def __post_init__(self):
        if self.rho0 <= 0 or self.beta <= 0 or self.alpha <= 0:
            raise ValueError("ExpCoercive needs rho0, beta, alpha > 0")

    def _value(self, x, y, z):
        r = np.sqrt(x * x + y * y + z * z)
        return self.rho0 * np.exp(self.beta * (1.0 + r) ** self.alpha)

    def _gradient(self, x, y, z):
        r = np.sqrt(x * x + y * y + z * z)
        rho = self.rho0 * np.exp(self.beta * (1.0 + r) ** self.alpha)
        dr = rho * self.beta * self.alpha * (1.0 + r) ** (self.alpha - 1.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            f = np.where(r > 0, dr / np.where(r > 0, r, 1.0), 0.0)
        return f * x, f * y, f * z

    @property
    def metadata(self):
        if self.alpha < 1:
            growth = (0.0, 0.0)
        elif self.alpha == 1:
            growth = (0.0, float(self.beta))
        else:
            growth = None
        # rho |x|^(1-2 alpha) is unbounded, so any A works; A = beta^2 keeps beta < 2 sqrt(A)
        return DecayMetadata(
            rho_inf=math.inf, A=float(self.beta) ** 2, alpha=float(self.alpha),
            beta=float(self.beta), grad_growth=growth,
        )

    def params(self):
        return {"rho0": self.rho0, "beta": self.beta, "alpha": self.alpha}

    def check_box(self, grid: Grid, max_value: float = 1e100) -> None:
        """Raise if rho overflows the representable range on ``grid``."""
        rmax = float(np.max(grid.radius)) + float(np.linalg.norm(grid.center))
        exponent = self.beta * (1.0 + rmax) ** self.alpha
        if math.log(self.rho0) + exponent > math.log(max_value):
            raise ValueError(
                f"ExpCoercive growth too fast for this box: rho reaches e^{exponent:.1f}"
            )


@dataclass(frozen=True)
class _Scaled(ChargeDensity):
    base: ChargeDensity
    factor: float

    @property
    def variant(self):
        return self.base.variant

    @property
    def k(self):
        return self.base.k

    def _value(self, x, y, z):
        return self.factor * self.base._value(x, y, z)

    def _gradient(self, x, y, z):
        return tuple(self.factor * g for g in self.base._gradient(x, y, z))

    @property
    def metadata(self):
        return self.base.metadata

    def params(self):
        return dict(self.base.params(), scale=self.factor)

    @property
    def is_zero(self):
        return self.factor == 0.0 or self.base.is_zero


def _split(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1], x[..., 2]


def eval_rho(cd: ChargeDensity, x) -> np.ndarray | float:
    """rho at a point or at an (..., 3) array of points."""
    out = cd.value(*_split(x))
    return float(out) if np.ndim(out) == 0 else out


def grad_rho(cd: ChargeDensity, x) -> np.ndarray:
    """Exact gradient of rho, shape (..., 3)."""
    return np.stack(cd.gradient(*_split(x)), axis=-1)


def rho_on_grid(cd: ChargeDensity, grid: Grid) -> np.ndarray:
    return np.broadcast_to(cd.value(*grid.coords), grid.shape)


def x_dot_grad_rho_on_grid(cd: ChargeDensity, grid: Grid) -> np.ndarray:
    """``(x, grad rho(x))`` at every grid point, from the analytic gradient."""
    x, y, z = grid.coords
    gx, gy, gz = cd.gradient(x, y, z)
    return np.broadcast_to(x * gx + y * gy + z * gz, grid.shape)


class KCondition(NamedTuple):
    holds: bool
    worst_margin: float


def verify_k_condition(cd: ChargeDensity, sample: Grid, k: float | None = None) -> KCondition:
    """Check ``k rho(x) <= (x, grad rho(x))`` at every point of ``sample``."""
    k = cd.k if k is None else k
    margin = x_dot_grad_rho_on_grid(cd, sample) - k * rho_on_grid(cd, sample)
    worst = float(np.min(margin))
    return KCondition(worst >= 0.0, worst)


def k_threshold(p: float) -> float:
    """Lower admissible bound ``-2(p-2)/(p-1)`` on ``k`` for p in (2, 3)."""
    return -2.0 * (p - 2.0) / (p - 1.0)


def _pretty(x: float) -> str:
    frac = Fraction(x).limit_denominator(1000)
    if abs(float(frac) - x) <= 1e-12 * max(1.0, abs(x)):
        return str(frac)
    return f"{x:.6g}"


def check_low_p_admissible(k: float, p: float) -> None:
    if 2 < p < 3 and not k > k_threshold(p):
        raise ValueError(
            f"k below admissible threshold -2(p-2)/(p-1) = {_pretty(k_threshold(p))} (k = {k})"
        )


_VARIANTS = {
    "constant": (Constant, ("rho_inf",)),
    "coercive_power": (CoercivePower, ("rho0", "s")),
    "bumped_constant": (BumpedConstant, ("rho_inf", "a", "sigma")),
    "exp_coercive": (ExpCoercive, ("rho0", "beta", "alpha")),
}

OPTIONAL_KEYS = {
    "constant": ("k",),
    "coercive_power": ("k", "decay_fraction"),
    "bumped_constant": ("k", "center"),
    "exp_coercive": ("k",),
}


def allowed_keys(variant: str) -> tuple[str, ...] | None:
    """Config keys accepted for ``variant`` (``None`` if the variant is unknown)."""
    if variant not in _VARIANTS:
        return None
    return ("variant", *_VARIANTS[variant][1], *OPTIONAL_KEYS[variant])


def from_dict(spec: dict) -> ChargeDensity:
    """Build a density from ``{"variant": ..., <params>, "k": ...}``."""
    spec = dict(spec)
    variant = spec.pop("variant", None)
    if variant not in _VARIANTS:
        raise ValueError(f"unknown rho.variant {variant!r}; expected one of {sorted(_VARIANTS)}")
    cls, required = _VARIANTS[variant]
    allowed = set(required) | set(OPTIONAL_KEYS[variant])
    unknown = sorted(set(spec) - allowed)
    if unknown:
        raise ValueError(f"unknown key(s) for rho.variant={variant}: " + ", ".join(f"rho.{u}" for u in unknown))
    missing = [r for r in required if r not in spec]
    if missing:
        raise ValueError("missing key(s): " + ", ".join(f"rho.{m}" for m in missing))
    if "center" in spec:
        spec["center"] = tuple(spec["center"])
    return cls(**spec)
