"""Scenario configuration, run orchestration, sweeps and output files.

A scenario is one flat JSON object (see ``schemas.SCENARIO_SCHEMA``).  A run
writes three files into its output directory:

``timeseries.csv``
    one row per sample: ``t, mass, lp2, lp4, lq, min_u, max_u, min_v, max_v,
    grad_u_max, grad_v_l2sq, energy, dist_sup, l2sq_dev`` (energy is empty
    when undefined).
``ledger.csv``
    one row per checked inequality per sample: ``t, name, lhs, rhs, slack, pass``.
``summary.json``
    params, thresholds, outcome, tail statistics and decay rates.
"""
from __future__ import annotations

import concurrent.futures
import csv
import itertools
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import jsonschema
import numpy as np

from .constants import ThresholdReport, threshold_report
from .diagnostics import DiagnosticsOptions, DiagnosticsSample, fit_decay_rate, sample, tail_window
from .elliptic import EllipticConfig
from .errors import ChemoLabError, ConfigError, InsufficientData, IoError
from .grid import Grid, ScalarField
from .schemas import SCENARIO_SCHEMA, SUMMARY_SCHEMA, SWEEP_SCHEMA
from .stepper import Params, RunOutcome, Status, simulate

logger = logging.getLogger(__name__)

TIMESERIES_COLUMNS = ["t", "mass", "lp2", "lp4", "lq", "min_u", "max_u", "min_v", "max_v",
                      "grad_u_max", "grad_v_l2sq", "energy", "dist_sup", "l2sq_dev"]
LEDGER_COLUMNS = ["t", "name", "lhs", "rhs", "slack", "pass"]
SWEEP_AXES = ("mu", "chi", "lambda")
THREADS_ENV = "CHEMO_LAB_THREADS"


@dataclass(frozen=True)
class InitialData:
    kind: str  # constant | perturbed | random
    c: float
    amplitude: float = 0.0
    kx: int = 1
    ky: int = 0
    seed: Optional[int] = None

    def build(self, grid: Grid) -> ScalarField:
        if self.kind == "constant":
            return ScalarField.constant(grid, self.c)
        if self.kind == "perturbed":
            X, Y = grid.centers()
            mode = np.cos(self.kx * np.pi * X / grid.lx) * np.cos(self.ky * np.pi * Y / grid.ly)
            return ScalarField(grid, self.c + self.amplitude * mode)
        rng = np.random.default_rng(self.seed)
        noise = rng.uniform(-self.amplitude, self.amplitude, size=grid.shape)
        return ScalarField(grid, np.maximum(self.c + noise, 0.0))


@dataclass(frozen=True)
class ScenarioConfig:
    params: Params
    initial: InitialData
    n_dim: int = 2
    p_list: tuple[float, ...] = (2.0, 4.0)
    q: float = 0.5
    eta: float = 1.0
    sample_every: float = 0.1
    t_late: Optional[float] = None
    v_lower_check: Optional[bool] = None
    fit_t_min: float = 1.0
    fit_rel_floor: float = 1e-12
    output_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        try:
            jsonschema.validate(d, SCENARIO_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"invalid scenario config: {exc.message}") from None
        kind = d["initial_kind"]
        amp = d.get("initial_amplitude", 0.0)
        if kind == "perturbed" and amp > d["initial_c"]:
            raise ConfigError("perturbed initial data needs initial_amplitude <= initial_c")
        if kind == "random" and d.get("initial_seed") is None:
            raise ConfigError("random initial data needs initial_seed")
        dt_max = d.get("dt_max", 1e-2)
        try:
            params = Params(
                chi=d["chi"], r=d["r"], mu=d["mu"], alpha=d["alpha"], beta=d["beta"], lam=d["lambda"],
                grid=Grid(d["nx"], d["ny"], d.get("lx", 1.0), d.get("ly", 1.0)),
                dt_init=d.get("dt_init", dt_max), dt_min=d.get("dt_min", 1e-8), dt_max=dt_max,
                t_end=d["t_end"], cfl_safety=d.get("cfl_safety", 0.5),
                u_cap=d.get("u_cap", 1e8), v_floor=d.get("v_floor", 1e-12),
                elliptic=EllipticConfig(d.get("elliptic_rel_tol", 1e-10), d.get("elliptic_max_iter")),
            )
        except ChemoLabError as exc:
            raise ConfigError(str(exc)) from None
        t_late = d.get("t_late")
        return cls(
            params=params,
            initial=InitialData(kind, d["initial_c"], amp, d.get("initial_kx", 1), d.get("initial_ky", 0),
                                d.get("initial_seed")),
            n_dim=d.get("n_dim", 2),
            p_list=tuple(float(x) for x in d.get("p_list", (2, 4))),
            q=d.get("q", 0.5),
            eta=d.get("eta", 1.0),
            sample_every=d.get("sample_every", d["t_end"] / 100),
            t_late=0.5 * d["t_end"] if t_late is None else t_late,
            v_lower_check=d.get("v_lower_check"),
            fit_t_min=d.get("fit_t_min", 1.0),
            fit_rel_floor=d.get("fit_rel_floor", 1e-12),
            output_dir=d.get("output_dir"),
        )

    def to_dict(self) -> dict:
        p = self.params
        return {
            "chi": p.chi, "r": p.r, "mu": p.mu, "alpha": p.alpha, "beta": p.beta, "lambda": p.lam,
            "nx": p.grid.nx, "ny": p.grid.ny, "lx": p.grid.lx, "ly": p.grid.ly,
            "dt_init": p.dt_init, "dt_min": p.dt_min, "dt_max": p.dt_max, "cfl_safety": p.cfl_safety,
            "t_end": p.t_end, "u_cap": p.u_cap, "v_floor": p.v_floor,
            "elliptic_rel_tol": p.elliptic.rel_tol, "elliptic_max_iter": p.elliptic.max_iter,
            "n_dim": self.n_dim, "p_list": list(self.p_list), "q": self.q, "eta": self.eta,
            "initial_kind": self.initial.kind, "initial_c": self.initial.c,
            "initial_amplitude": self.initial.amplitude, "initial_kx": self.initial.kx,
            "initial_ky": self.initial.ky, "initial_seed": self.initial.seed,
            "sample_every": self.sample_every, "t_late": self.t_late,
            "v_lower_check": self.v_lower_check, "fit_t_min": self.fit_t_min,
            "fit_rel_floor": self.fit_rel_floor, "output_dir": self.output_dir,
        }

    def with_axis(self, name: str, value: float) -> "ScenarioConfig":
        d = self.to_dict()
        d[name] = value
        return ScenarioConfig.from_dict(d)

    def thresholds(self) -> ThresholdReport:
        p = self.params
        return threshold_report(chi=p.chi, r=p.r, mu=p.mu, alpha=p.alpha, beta=p.beta, lam=p.lam,
                                n_dim=self.n_dim, p_list=self.p_list, q=self.q, eta=self.eta,
                                area=p.grid.area, diam=p.grid.diam)


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _row(s: DiagnosticsSample) -> list:
    return [s.t, s.mass, s.lp[2.0], s.lp[4.0], s.lq, s.min_u, s.max_u, s.min_v, s.max_v,
            s.grad_u_max, s.grad_v_l2sq, s.energy, s.dist_sup, s.l2sq_dev]


def write_timeseries(path: Path, samples: Sequence[DiagnosticsSample]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMESERIES_COLUMNS)
        for s in samples:
            w.writerow([_fmt(x) for x in _row(s)])


def write_ledger(path: Path, samples: Sequence[DiagnosticsSample]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LEDGER_COLUMNS)
        for s in samples:
            for e in s.ledger:
                w.writerow([_fmt(s.t), e.name, _fmt(e.lhs), _fmt(e.rhs), _fmt(e.slack), _fmt(e.passed)])


def _fit(series: list[tuple[float, Optional[float]]], t_min: float, rel_floor: float) -> Optional[float]:
    pts = [(t, y) for t, y in series if t >= t_min and y is not None and y > 0]
    if not pts:
        return None
    hi = max(y for _, y in pts)
    try:
        return fit_decay_rate(pts, rel_floor * hi, hi)
    except InsufficientData:
        return None


def summarize(cfg: ScenarioConfig, outcome: RunOutcome, report: ThresholdReport,
              samples: Sequence[DiagnosticsSample]) -> dict:
    tail = tail_window(samples)
    fitted_l2 = _fit([(s.t, s.l2sq_dev) for s in samples], cfg.fit_t_min, cfg.fit_rel_floor)
    fitted_e = _fit([(s.t, s.energy) for s in samples], cfg.fit_t_min, cfg.fit_rel_floor)
    failed = sorted({e.name for s in samples for e in s.ledger if not e.passed})
    return {
        "params": cfg.to_dict(),
        "thresholds": report.to_json(),
        "outcome": outcome.to_json(),
        "tail": {
            "mass_min": min(s.mass for s in tail) if tail else None,
            "lp2_max": max(s.lp[2.0] for s in tail) if tail else None,
            "min_v_min": min(s.min_v for s in tail) if tail else None,
            "dist_sup_final": samples[-1].dist_sup if samples else None,
        },
        "rates": {
            "fitted_l2sq": fitted_l2,
            "fitted_energy": fitted_e,
            "predicted_energy": report.rate_energy,
            "predicted_sup": report.rate_sup,
        },
        "ledger": {
            "checks": sum(len(s.ledger) for s in samples),
            "all_pass": not failed,
            "failed_names": failed,
        },
        "n_samples": len(samples),
    }


@dataclass
class RunResult:
    outcome: RunOutcome
    summary: dict
    samples: list[DiagnosticsSample] = field(default_factory=list)
    u: Optional[ScalarField] = None
    v: Optional[ScalarField] = None


def execute(cfg: ScenarioConfig) -> RunResult:
    """Run a scenario in memory: simulate, sample diagnostics, summarize."""
    p = cfg.params
    report = cfg.thresholds()
    opts = DiagnosticsOptions(p_list=cfg.p_list, q=cfg.q, v_lower=cfg.v_lower_check, t_late=cfg.t_late)
    u0 = cfg.initial.build(p.grid)
    mass0 = float(np.sum(u0.values)) * p.grid.cell_area
    samples: list[DiagnosticsSample] = []

    def sampler(t, u, v):
        samples.append(sample(t, u, v, p, report, opts, mass0=mass0))

    u = v = None
    try:
        outcome, u, v = simulate(u0, p, sampler, every=cfg.sample_every)
    except ChemoLabError as exc:
        logger.warning("run failed: %s", exc)
        t_last = samples[-1].t if samples else 0.0
        outcome = RunOutcome(Status.SOLVER_FAILURE, str(exc), t_last)
    summary = summarize(cfg, outcome, report, samples)
    return RunResult(outcome, summary, samples, u, v)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _sanitize(o):
    # JSON has no inf/nan; encode them as null
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _sanitize(v) for k, v in o.items()}
    if isinstance(o, list):
        return [_sanitize(v) for v in o]
    return o


def write_outputs(out_dir, result: RunResult) -> None:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_timeseries(out / "timeseries.csv", result.samples)
        write_ledger(out / "ledger.csv", result.samples)
        with open(out / "summary.json", "w") as fh:
            json.dump(_sanitize(result.summary), fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write run output to {out}: {exc}") from exc


def validate_summary(summary: dict) -> None:
    jsonschema.validate(summary, SUMMARY_SCHEMA)


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> tuple[RunOutcome, dict]:
    """Execute a scenario and write timeseries.csv, ledger.csv and summary.json.

    Run failures (blow-up, solver errors) end up in the summary; only config
    and I/O problems raise.
    """
    out_dir = out_dir if out_dir is not None else cfg.output_dir
    if out_dir is None:
        raise ConfigError("no output directory given")
    result = execute(cfg)
    write_outputs(out_dir, result)
    logger.info("run finished: %s %s at t=%g", result.outcome.status.value,
                result.outcome.reason, result.outcome.t_final)
    return result.outcome, result.summary


# -- sweeps -----------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    base: ScenarioConfig
    axes: tuple[tuple[str, tuple[float, ...]], ...]
    parallelism: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        try:
            jsonschema.validate(d, SWEEP_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"invalid sweep config: {exc.message}") from None
        base = ScenarioConfig.from_dict(d["base"])
        axes = []
        seen = set()
        for ax in d["axes"]:
            name, values = ax["name"], tuple(float(x) for x in ax["values"])
            if name in seen:
                raise ConfigError(f"axis {name} given twice")
            seen.add(name)
            for x in values:
                if not math.isfinite(x) or (name == "mu" and x <= 0) or (name == "chi" and x < 0) \
                        or (name == "lambda" and not 0 < x < 1):
                    raise ConfigError(f"axis {name}: value {x} out of range")
            axes.append((name, tuple(sorted(values))))
        return cls(base, tuple(axes), d.get("parallelism", 1))

    def cells(self) -> list[dict[str, float]]:
        names = [n for n, _ in self.axes]
        return [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in self.axes))]


SWEEP_STAT_COLUMNS = ["status", "reason", "t_final", "mass_min", "lp2_max", "min_v_min", "dist_sup_final",
                      "fitted_l2sq", "fitted_energy", "predicted_energy", "predicted_sup"]
FLAG_COLUMNS = ["globally_bounded", "uniformly_persistent", "exponentially_stable"]


def _sweep_cell(job: tuple[int, dict, dict, str]) -> dict:
    index, base_dict, cell, out_root = job
    row: dict[str, Any] = {"run_id": f"run_{index:03d}", **cell}
    try:
        d = dict(base_dict)
        d.update(cell)
        cfg = ScenarioConfig.from_dict(d)
        flags = cfg.thresholds().flags
        for p, ok in flags["lp_bounded"].items():
            row[f"lp_bounded_p{p}"] = ok
        for k in FLAG_COLUMNS:
            row[k] = flags[k]
        outcome, summary = run_scenario(cfg, Path(out_root) / row["run_id"])
        row.update(summary["outcome"])
        row.update(summary["tail"])
        row.update(summary["rates"])
        row["error"] = ""
    except Exception as exc:  # crash isolation: one bad cell must not sink the sweep
        logger.exception("sweep cell %s failed", row["run_id"])
        row.setdefault("status", "Error")
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _worker_count(requested: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            requested = min(requested, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, requested)


def run_sweep(cfg: SweepConfig, out_dir, parallelism: Optional[int] = None) -> list[dict]:
    """Run the Cartesian product of the sweep axes and write ``sweep.csv``.

    Rows follow the sorted axis values (first axis slowest).  The
    ``persistence_flip`` column marks rows where the uniform-persistence
    condition differs from the previous row along the last axis.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc
    base_dict = cfg.base.to_dict()
    base_dict.pop("output_dir", None)
    jobs = [(i, base_dict, cell, str(out)) for i, cell in enumerate(cfg.cells())]
    workers = _worker_count(parallelism or cfg.parallelism)
    if workers == 1 or len(jobs) == 1:
        rows = [_sweep_cell(j) for j in jobs]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, jobs))

    outer = [n for n, _ in cfg.axes[:-1]]
    prev = None
    for row in rows:
        same_group = prev is not None and all(prev.get(n) == row.get(n) for n in outer)
        row["persistence_flip"] = bool(same_group and prev.get("uniformly_persistent") is not None
                                       and row.get("uniformly_persistent") is not None
                                       and prev["uniformly_persistent"] != row["uniformly_persistent"])
        prev = row

    lp_cols = sorted({k for r in rows for k in r if k.startswith("lp_bounded_p")})
    columns = (["run_id"] + list(SWEEP_AXES) + lp_cols + FLAG_COLUMNS + ["persistence_flip"]
               + SWEEP_STAT_COLUMNS + ["error"])
    base_vals = {"mu": cfg.base.params.mu, "chi": cfg.base.params.chi, "lambda": cfg.base.params.lam}
    try:
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(r.get(c, base_vals.get(c))) for c in columns])
    except OSError as exc:
        raise IoError(f"cannot write sweep table: {exc}") from exc
    for r in rows:
        for c in SWEEP_AXES:
            r.setdefault(c, base_vals[c])
    return rows


# -- thresholds ----------------------------------------------------------------

def report_thresholds(*, n_dim: int, p: float, q: float, lam: float, chi: float, alpha: float,
                      beta: float, r: float, mu: float, eta: float, lx: float, ly: float) -> ThresholdReport:
    """Validate inputs and evaluate the threshold report for a rectangle ``lx x ly``."""
    checks = [
        (n_dim >= 2 and int(n_dim) == n_dim, "ndim must be an integer >= 2"),
        (p >= 2, "p must be >= 2"),
        (0 < q < 1, "q must lie in (0, 1)"),
        (0 < lam < 1, "lambda must lie in (0, 1)"),
        (0 < eta <= 1, "eta must lie in (0, 1]"),
        (math.isfinite(chi) and chi >= 0, "chi must be nonnegative"),
    ] + [(math.isfinite(x) and x > 0, f"{name} must be positive") for name, x in
         [("alpha", alpha), ("beta", beta), ("r", r), ("mu", mu), ("lx", lx), ("ly", ly)]]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(msg)
    return threshold_report(chi=chi, r=r, mu=mu, alpha=alpha, beta=beta, lam=lam, n_dim=int(n_dim),
                            p_list=[p], q=q, eta=eta, area=lx * ly, diam=math.hypot(lx, ly))
