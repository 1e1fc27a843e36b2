"""Command-line experiment runner.

Usage::

    spvar <mode> --config <path> [--out <dir>]

Modes: solve, sweep_mu, sweep_eps, diagnose, oracle, sobolev.  Artifacts are
written to the configured output directory (``--out`` overrides it).  The exit
status is 0 when every solve converged and every hard check passed; otherwise
it is 1 and ``failures.json`` lists what went wrong.  Status 2 means the
config was rejected.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import MODES, ConfigError, ExperimentConfig, check_output_writable, load_config
from .diagnostics import decay_fit, diagnostics_report, sobolev_estimate, sobolev_radial
from .grid import Grid, ScalarField
from .oracles import gradient_check_suite, poisson_oracle_suite
from .semiclassical import eps_sweep, locate_peak, uniform_bound_probe, write_sweep_csv
from .solvers.mountain_pass import mountain_pass_solve, mu_continuation, radial_seed
from .solvers.nehari import ground_state_nehari
from .solvers.radial import radial_limit_ground_state, write_golden
from .solvers.records import SolutionRecord

__all__ = ["RunResult", "run_experiment", "build_seed", "dump_json", "main"]

SWEEP_MU_COLUMNS = ["mu", "energy", "residual_l2", "nehari_residual", "pohozaev_residual",
                    "iterations", "converged"]


@dataclass
class RunResult:
    status: int
    failures: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)


# ------------------------------------------------------------- formatting

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return format(v, ".17g") if math.isfinite(v) else "null"
    if v is None:
        return "null"
    return json.dumps(str(v))


def _encode(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v, indent + 1) for v in obj) + "]"
    return _fmt(obj)


def dump_json(path, obj) -> None:
    """JSON with every float written to 17 significant digits."""
    Path(path).write_text(_encode(obj) + "\n")


def _csv_cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return v


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_csv_cell(v) for v in row])


def _write_profile(path, u: ScalarField, center, meta: dict) -> None:
    """Shell-averaged radial profile of ``u`` about ``center``."""
    g = u.grid
    x, y, z = g.coords
    r = np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2)
    bins = np.floor(r / g.h).astype(int).ravel()
    nb = int(g.L / g.h)
    keep = bins < nb
    counts = np.bincount(bins[keep], minlength=nb)
    rsum = np.bincount(bins[keep], weights=r.ravel()[keep], minlength=nb)
    usum = np.bincount(bins[keep], weights=u.values.ravel()[keep], minlength=nb)
    ok = counts > 0
    head = " ".join(f"{k}={_fmt(v)}" for k, v in meta.items())
    lines = [f"# solution profile {head}", "# r value"]
    lines += [f"{a:.17g} {b:.17g}" for a, b in zip(rsum[ok] / counts[ok], usum[ok] / counts[ok])]
    Path(path).write_text("\n".join(lines) + "\n")


# ------------------------------------------------------------ pipelines

def build_seed(cfg: ExperimentConfig, grid: Grid) -> ScalarField:
    s = cfg.solver.seed
    pp = cfg.params
    c = grid.center if s.center is None else s.center
    if s.kind == "radial":
        f = radial_seed(grid, pp, center=c)
        return ScalarField(grid, s.amplitude * f.values)
    w = s.width * pp.eps
    x, y, z = grid.coords
    r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
    return ScalarField(grid, s.amplitude * np.exp(-r2 / (2.0 * w * w)))


def _solve(cfg: ExperimentConfig) -> SolutionRecord:
    grid = cfg.grid.build()
    cd = cfg.charge
    seed = build_seed(cfg, grid)
    sv = cfg.solver
    if sv.method == "nehari":
        return ground_state_nehari(cd, cfg.params, seed, tol=sv.tol, max_iter=sv.max_iter)
    return mountain_pass_solve(cd, cfg.params, seed, tol=sv.tol, max_iter=sv.max_iter)


class _Run:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = Path(cfg.output.directory)
        self.result = RunResult(0)

    def wants(self, fmt: str) -> bool:
        return fmt in self.cfg.output.formats

    def json(self, name: str, obj) -> None:
        if self.wants("json"):
            path = self.out / name
            dump_json(path, obj)
            self.result.artifacts.append(str(path))

    def csv(self, name: str, header, rows) -> None:
        if self.wants("csv"):
            path = self.out / name
            _write_csv(path, header, rows)
            self.result.artifacts.append(str(path))

    def fail(self, *items: str) -> None:
        self.result.failures.extend(items)

    def record_outputs(self, rec: SolutionRecord, report) -> None:
        self.json("solution.json", rec.summary())
        self.json("diagnostics.json", report.to_dict())
        self.csv("history.csv", ["iteration", "residual_l2"],
                 [(i + 1, h[-1] if isinstance(h, tuple) else h) for i, h in enumerate(rec.history)])
        x_peak, _ = locate_peak(rec.u)
        path = self.out / "profile.txt"
        _write_profile(path, rec.u, x_peak, {"p": rec.params.p, "energy": rec.energy.total})
        self.result.artifacts.append(str(path))
        self.fail(*report.failures)

    def radial_reference(self, cd, pp) -> None:
        """Ground state of the radial problem at infinity, as a golden table."""
        rho_inf = cd.metadata.rho_inf
        if math.isinf(rho_inf):
            return
        try:
            prof = radial_limit_ground_state(pp.p, lam=pp.lam, mu=pp.mu, rho_inf=rho_inf)
        except ValueError:
            return
        path = self.out / "radial_reference.txt"
        write_golden(path, prof)
        self.result.artifacts.append(str(path))


def _mode_solve(run: _Run, full: bool) -> None:
    cfg = run.cfg
    rec = _solve(cfg)
    cd = cfg.charge
    p = cfg.params.p
    sob = sobolev_radial(p) if 2 < p < 5 else None
    report = diagnostics_report(rec, cd, sobolev=sob)
    if full:
        x_peak, _ = locate_peak(rec.u)
        fit = decay_fit(rec.u, cd, center=tuple(x_peak))
        report.values.update({
            "decay_gamma_fit": fit.gamma_fit,
            "decay_alpha_fit": fit.alpha_fit,
            "decay_inequality_ok": fit.inequality_ok,
            "decay_charge_ok": fit.charge_ok,
        })
        if not fit.inequality_ok:
            report.failures.append("decay_inequality")
        if fit.charge_ok is False:
            report.failures.append("decay_charge")
    run.record_outputs(rec, report)
    run.radial_reference(cd, cfg.params)


def _mode_sweep_mu(run: _Run) -> None:
    cfg = run.cfg
    grid = cfg.grid.build()
    res = mu_continuation(cfg.charge, cfg.params, cfg.sweep.mu_values, build_seed(cfg, grid),
                          tol=cfg.solver.tol)
    rows = [(m, r.energy.total, r.residual_l2, r.nehari_residual, r.pohozaev_residual,
             r.iterations, r.converged) for m, r in zip(res.mu_values, res.records)]
    run.csv("sweep_mu.csv", SWEEP_MU_COLUMNS, rows)
    run.json("sweep_mu.json", {
        "mu_values": res.mu_values,
        "c_values": res.c_values,
        "monotone_ok": res.monotone_ok,
        "all_converged": res.all_converged,
    })
    if not res.all_converged:
        run.fail("not_converged")
    if not res.monotone_ok:
        run.fail("not_monotone")


def _mode_sweep_eps(run: _Run) -> None:
    cfg = run.cfg
    sw = cfg.sweep
    records, reports = eps_sweep(cfg.charge, cfg.params, sw.eps_values, n=cfg.grid.n,
                                 L_ref=sw.L_ref, center=cfg.grid.center, tol=cfg.solver.tol,
                                 recenter=sw.recenter)
    if run.wants("csv"):
        path = run.out / "sweep_eps.csv"
        write_sweep_csv(path, reports)
        run.result.artifacts.append(str(path))
    probe = uniform_bound_probe(records) if len(records) >= 3 else None
    run.json("sweep_eps.json", {
        "eps_values": [r.eps for r in reports],
        "peak_bound_ok": [r.peak_bound_ok for r in reports],
        "kwong_residual": [r.kwong_residual for r in reports],
        "uniform_bound_probe": probe,
    })
    if not all(r.converged for r in records):
        run.fail("not_converged")
    if not all(r.peak_bound_ok for r in reports):
        run.fail("peak_bound")


def _mode_oracle(run: _Run) -> None:
    cfg = run.cfg
    rng = np.random.default_rng(cfg.solver.rng_seed)
    t0 = time.perf_counter()
    poisson = poisson_oracle_suite(rng)
    t1 = time.perf_counter()
    grid = Grid(8, cfg.grid.L, cfg.grid.center)
    grad = gradient_check_suite(grid, cfg.charge, cfg.params, rng)
    t2 = time.perf_counter()
    run.json("oracle.json", {
        "poisson": dict(poisson.to_dict(), seconds=t1 - t0),
        "gradient": dict(grad.to_dict(), seconds=t2 - t1),
        "passed": poisson.passed and grad.passed,
    })
    if not poisson.passed:
        run.fail("poisson_oracle")
    if not grad.passed:
        run.fail("gradient_check")


def _mode_sobolev(run: _Run) -> None:
    cfg = run.cfg
    p = cfg.params.p
    est = sobolev_estimate(cfg.grid.build(), p)
    ref = sobolev_radial(p)
    rel = abs(est.S_hat - ref.S_hat) / ref.S_hat
    run.json("sobolev.json", {
        "p": p,
        "S_grid": est.S_hat,
        "S_radial": ref.S_hat,
        "relative_difference": rel,
        "iterations": est.iterations,
        "trial_value": est.trial_value,
    })
    if not rel < 1e-2:
        run.fail("sobolev_mismatch")


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Run the pipeline for ``cfg.mode`` and write its artifacts."""
    check_output_writable(cfg)
    run = _Run(cfg)
    mode = cfg.mode
    if mode in ("solve", "diagnose"):
        _mode_solve(run, full=mode == "diagnose")
    elif mode == "sweep_mu":
        _mode_sweep_mu(run)
    elif mode == "sweep_eps":
        _mode_sweep_eps(run)
    elif mode == "oracle":
        _mode_oracle(run)
    elif mode == "sobolev":
        _mode_sobolev(run)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if run.result.failures:
        run.result.status = 1
        path = run.out / "failures.json"
        dump_json(path, {"mode": mode, "failures": run.result.failures})
        run.result.artifacts.append(str(path))
    return run.result


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="spvar", description="Run one experiment.")
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", required=True, help="TOML experiment file")
    ap.add_argument("--out", help="output directory (overrides output.directory)")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config, args.mode)
        if args.out:
            cfg = cfg.with_output(args.out)
        result = run_experiment(cfg)
    except ConfigError as exc:
        print(json.dumps({"config_errors": exc.errors}, indent=2), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"config_errors": [str(exc)]}, indent=2), file=sys.stderr)
        return 2
    if result.failures:
        print(json.dumps({"failures": result.failures}, indent=2), file=sys.stderr)
    for a in result.artifacts:
        print(a)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
