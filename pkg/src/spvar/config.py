"""Experiment configuration: TOML schema, validation and serialisation.

A config is one flat TOML document::

    mode = "solve"

    [grid]
    n = 64
    L = 8.0
    center = [0.0, 0.0, 0.0]

    [rho]
    variant = "coercive_power"
    rho0 = 1.0
    s = 2.0

    [params]
    p = 2.5

    [solver]
    tol = 1e-8
    max_iter = 10000

Every section except ``rho`` and ``params`` is optional.  Unknown keys are
rejected, and all problems found are reported together in one
:class:`ConfigError`.
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .charge import (
    ChargeDensity,
    ExpCoercive,
    allowed_keys,
    check_low_p_admissible,
    from_dict,
)
from .functional import ProblemParams
from .grid import Grid, allowed_size
from .semiclassical import check_eps_guard
from .solvers.records import DEFAULT_MAX_ITER, DEFAULT_TOL

__all__ = [
    "MODES",
    "ConfigError",
    "GridSpec",
    "SeedSpec",
    "SolverSpec",
    "SweepSpec",
    "OutputSpec",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "serialize",
]

MODES = ("solve", "sweep_mu", "sweep_eps", "diagnose", "oracle", "sobolev")
FORMATS = ("csv", "json")
METHODS = ("auto", "mountain_pass", "nehari")
SEED_KINDS = ("gaussian", "radial")


class ConfigError(ValueError):
    """Aggregated validation failure; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class GridSpec:
    n: int = 64
    L: float = 8.0
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def build(self) -> Grid:
        return Grid(self.n, self.L, self.center)


@dataclass(frozen=True)
class SeedSpec:
    """Initial guess: a Gaussian bump or the uncoupled radial ground state."""

    kind: str = "gaussian"
    amplitude: float = 1.0
    width: float = 1.0
    center: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class SolverSpec:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    method: str = "auto"
    rng_seed: int = 0
    seed: SeedSpec = field(default_factory=SeedSpec)


@dataclass(frozen=True)
class SweepSpec:
    mu_values: tuple[float, ...] = ()
    eps_values: tuple[float, ...] = ()
    L_ref: float = 8.0
    recenter: bool = True


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "out"
    formats: tuple[str, ...] = FORMATS


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    grid: GridSpec
    rho: dict
    params: ProblemParams
    solver: SolverSpec = field(default_factory=SolverSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    @property
    def charge(self) -> ChargeDensity:
        return from_dict(self.rho)

    def with_output(self, directory) -> "ExperimentConfig":
        return ExperimentConfig(self.mode, self.grid, self.rho, self.params, self.solver,
                                self.sweep, OutputSpec(str(directory), self.output.formats))


# ---------------------------------------------------------------- parsing

_SECTIONS = {
    "grid": ("n", "L", "center"),
    "params": ("p", "mu", "lambda", "eps", "poh_coeffs", "absolute_value"),
    "solver": ("tol", "max_iter", "method", "rng_seed", "seed"),
    "sweep": ("mu_values", "eps_values", "L_ref", "recenter"),
    "output": ("directory", "formats"),
}
_SEED_KEYS = ("kind", "amplitude", "width", "center")


class _Collector:
    def __init__(self):
        self.errors: list[str] = []

    def unknown(self, table: dict, allowed, prefix: str):
        for key in table:
            if key not in allowed:
                self.errors.append(f"unknown key {prefix}{key}")

    def number(self, table, key, prefix, default, kind=float, check=None, why=""):
        if key not in table:
            return default
        v = table[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.errors.append(f"{prefix}{key} must be a number")
            return default
        if kind is int and not isinstance(v, int):
            self.errors.append(f"{prefix}{key} must be an integer")
            return default
        v = kind(v)
        if not math.isfinite(v) or (check is not None and not check(v)):
            self.errors.append(f"{prefix}{key} = {v!r} {why}".rstrip())
            return default
        return v

    def vector(self, table, key, prefix, default, length=None):
        if key not in table:
            return default
        v = table[key]
        ok = isinstance(v, list) and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in v
        )
        if not ok or (length is not None and len(v) != length):
            size = f"{length} " if length else ""
            self.errors.append(f"{prefix}{key} must be a list of {size}finite numbers")
            return default
        return tuple(float(x) for x in v)

    def choice(self, table, key, prefix, default, options):
        if key not in table:
            return default
        v = table[key]
        if v not in options:
            self.errors.append(f"{prefix}{key} = {v!r} is not one of {list(options)}")
            return default
        return v

    def boolean(self, table, key, prefix, default):
        if key not in table:
            return default
        v = table[key]
        if not isinstance(v, bool):
            self.errors.append(f"{prefix}{key} must be true or false")
            return default
        return v

    def table(self, doc, key):
        v = doc.get(key, {})
        if not isinstance(v, dict):
            self.errors.append(f"{key} must be a table")
            return {}
        return v


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _normalise_rho(raw: dict) -> dict:
    out = {}
    for key, v in raw.items():
        if isinstance(v, list) and all(_is_number(x) for x in v):
            out[key] = [float(x) for x in v]
        elif _is_number(v):
            out[key] = float(v)
        else:
            out[key] = v
    return out


def parse_config(text: str, mode: str | None = None) -> ExperimentConfig:
    """Parse and validate a TOML experiment description.

    ``mode`` (from the command line) fills in a missing ``mode`` key and must
    agree with it when both are given.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"syntax error: {exc}"]) from None
    col = _Collector()
    col.unknown(doc, ("mode", "rho", *_SECTIONS), "")

    file_mode = doc.get("mode")
    if file_mode is not None and mode is not None and file_mode != mode:
        col.errors.append(f"mode mismatch: config says {file_mode!r}, command line says {mode!r}")
    chosen = mode if mode is not None else file_mode
    if chosen is None:
        col.errors.append("mode is required")
        chosen = "solve"
    elif chosen not in MODES:
        col.errors.append(f"mode = {chosen!r} is not one of {list(MODES)}")
        chosen = "solve"

    g = col.table(doc, "grid")
    col.unknown(g, _SECTIONS["grid"], "grid.")
    n = col.number(g, "n", "grid.", 64, int, lambda v: v >= 8 and allowed_size(v),
                   "must be >= 8 and a power of two (or 3 times one)")
    L = col.number(g, "L", "grid.", 8.0, float, lambda v: v > 0, "must be positive")
    center = col.vector(g, "center", "grid.", (0.0, 0.0, 0.0), 3)
    grid = GridSpec(n, L, center)

    pt = col.table(doc, "params")
    col.unknown(pt, _SECTIONS["params"], "params.")
    params = None
    if "p" not in pt:
        col.errors.append("missing key params.p")
    else:
        p = col.number(pt, "p", "params.", None)
        mu = col.number(pt, "mu", "params.", 1.0)
        lam = col.number(pt, "lambda", "params.", 1.0)
        eps = col.number(pt, "eps", "params.", 1.0)
        poh = col.vector(pt, "poh_coeffs", "params.", None, 3)
        absval = col.boolean(pt, "absolute_value", "params.", False)
        if p is not None:
            try:
                params = ProblemParams(p=p, mu=mu, lam=lam, eps=eps, poh_coeffs=poh,
                                       absolute_value=absval)
            except ValueError as exc:
                col.errors.append(f"params: {exc}")

    rt = col.table(doc, "rho")
    rho = _normalise_rho(rt)
    cd = None
    if not rt:
        col.errors.append("missing table rho")
    else:
        allowed = allowed_keys(rho.get("variant"))
        if allowed is not None:
            col.unknown(rho, allowed, "rho.")
            known = {k: v for k, v in rho.items() if k in allowed}
        else:
            known = rho
        try:
            cd = from_dict(known)
        except (TypeError, ValueError) as exc:
            col.errors.append(str(exc))
        if cd is None and params is not None and _is_number(rho.get("k")):
            try:
                check_low_p_admissible(rho["k"], params.p)
            except ValueError as exc:
                col.errors.append(str(exc))
    if cd is not None and params is not None:
        try:
            check_low_p_admissible(cd.k, params.p)
        except ValueError as exc:
            col.errors.append(str(exc))
        if isinstance(cd, ExpCoercive):
            try:
                cd.check_box(grid.build())
            except ValueError as exc:
                col.errors.append(str(exc))
            if chosen != "sweep_eps":
                try:
                    check_eps_guard(cd, params)
                except ValueError as exc:
                    col.errors.append(str(exc))

    st = col.table(doc, "solver")
    col.unknown(st, _SECTIONS["solver"], "solver.")
    tol = col.number(st, "tol", "solver.", DEFAULT_TOL, float, lambda v: v > 0, "must be positive")
    max_iter = col.number(st, "max_iter", "solver.", DEFAULT_MAX_ITER, int, lambda v: v > 0,
                          "must be positive")
    method = col.choice(st, "method", "solver.", "auto", METHODS)
    rng_seed = col.number(st, "rng_seed", "solver.", 0, int, lambda v: v >= 0, "must be >= 0")
    sd = col.table(st, "seed") if "seed" in st else {}
    col.unknown(sd, _SEED_KEYS, "solver.seed.")
    seed = SeedSpec(
        kind=col.choice(sd, "kind", "solver.seed.", "gaussian", SEED_KINDS),
        amplitude=col.number(sd, "amplitude", "solver.seed.", 1.0, float, lambda v: v > 0,
                             "must be positive"),
        width=col.number(sd, "width", "solver.seed.", 1.0, float, lambda v: v > 0,
                         "must be positive"),
        center=col.vector(sd, "center", "solver.seed.", None, 3),
    )
    if params is not None:
        if method == "nehari" and not 3 < params.p < 5:
            col.errors.append("solver.method = 'nehari' needs 3 < p < 5")
        if method in ("auto", "mountain_pass") and chosen in ("solve", "diagnose", "sweep_mu",
                                                               "sweep_eps") \
                and not 2 < params.p < 5:
            col.errors.append("mountain-pass solves need 2 < p < 5")
    solver = SolverSpec(tol, max_iter, method, rng_seed, seed)

    sw = col.table(doc, "sweep")
    col.unknown(sw, _SECTIONS["sweep"], "sweep.")
    sweep = SweepSpec(
        mu_values=col.vector(sw, "mu_values", "sweep.", ()),
        eps_values=col.vector(sw, "eps_values", "sweep.", ()),
        L_ref=col.number(sw, "L_ref", "sweep.", 8.0, float, lambda v: v > 0, "must be positive"),
        recenter=col.boolean(sw, "recenter", "sweep.", True),
    )
    if chosen == "sweep_mu":
        mus = sweep.mu_values
        if not mus:
            col.errors.append("sweep.mu_values is required for mode sweep_mu")
        elif any(not 0.5 <= m <= 1 for m in mus) or any(b <= a for a, b in zip(mus, mus[1:])):
            col.errors.append("sweep.mu_values must be ascending within [1/2, 1]")
    if chosen == "sweep_eps":
        es = sweep.eps_values
        if not es:
            col.errors.append("sweep.eps_values is required for mode sweep_eps")
        elif cd is not None and params is not None:
            for e in es:
                try:
                    check_eps_guard(cd, params.with_(eps=e))
                except ValueError as exc:
                    col.errors.append(f"sweep.eps_values: {exc}")

    ot = col.table(doc, "output")
    col.unknown(ot, _SECTIONS["output"], "output.")
    directory = ot.get("directory", "out")
    if not isinstance(directory, str) or not directory:
        col.errors.append("output.directory must be a non-empty string")
        directory = "out"
    formats = ot.get("formats", list(FORMATS))
    if not isinstance(formats, list) or not formats or any(f not in FORMATS for f in formats):
        col.errors.append(f"output.formats must be a non-empty subset of {list(FORMATS)}")
        formats = list(FORMATS)
    output = OutputSpec(directory, tuple(dict.fromkeys(formats)))

    if col.errors:
        raise ConfigError(col.errors)
    return ExperimentConfig(chosen, grid, rho, params, solver, sweep, output)


def load_config(path, mode: str | None = None) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), mode)


def check_output_writable(cfg: ExperimentConfig) -> None:
    d = Path(cfg.output.directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
        probe = d / ".spvar_write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError([f"output.directory {str(d)!r} is not writable: {exc}"]) from None


# ---------------------------------------------------------- serialisation

def _drop_none(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if v is None:
            continue
        if isinstance(v, dict):
            v = _drop_none(v)
        elif isinstance(v, tuple):
            v = list(v)
        out[k] = v
    return out


def serialize(cfg: ExperimentConfig) -> str:
    """TOML text that :func:`parse_config` maps back to ``cfg``."""
    pp = cfg.params
    solver = asdict(cfg.solver)
    doc = {
        "mode": cfg.mode,
        "grid": asdict(cfg.grid),
        "rho": dict(cfg.rho),
        "params": {
            "p": pp.p,
            "mu": pp.mu,
            "lambda": pp.lam,
            "eps": pp.eps,
            "poh_coeffs": pp.poh_coeffs,
            "absolute_value": pp.absolute_value,
        },
        "solver": solver,
        "sweep": asdict(cfg.sweep),
        "output": asdict(cfg.output),
    }
    return tomli_w.dumps(_drop_none(doc))
