"""Convergence and cost studies on the mass-spring chain."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .multirate import (
    CostReport,
    MultirateConfig,
    cost_report,
    integrate,
    integrate_singlerate,
    step_count,
)
from .problems import MassSpringChain, build_chain_ivp, modal_solution, to_blocks
from .rk_core import IntegrationError, get_tableau

ROUNDOFF_FLOOR = 1e-13

CSV_HEADER = ["H", "h", "error_slow", "error_fast", "slow_calls", "fast_calls", "scalar_total", "wall_ms"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StudyConfig:
    n: int = 10
    m1: float = 1.0
    m2: float = 20.0
    k1: float = 20.0
    k2: float = 1.0
    x1_0: float = -0.005
    xi_0: float = 0.1
    v1_0: float = 0.0
    vi_0: float = 0.0
    scheme: str = "rk4"
    mrfactor: int = 20
    Hmax: float = 0.25
    halvings: int = 6
    H: tuple[float, ...] | None = None
    tend: float = 40.0
    norm: str = "euclid"
    mode: str = "multirate"
    out: str = "results"

    @property
    def H_values(self) -> list[float]:
        hs = list(self.H) if self.H else [self.Hmax / 2**k for k in range(self.halvings + 1)]
        return sorted(hs, reverse=True)

    @property
    def schemes(self) -> list[str]:
        return ["multirate", "singlerate"] if self.mode == "both" else [self.mode]

    def chain(self) -> MassSpringChain:
        x0 = np.full(self.n, self.xi_0)
        v0 = np.full(self.n, self.vi_0)
        x0[0], v0[0] = self.x1_0, self.v1_0
        return MassSpringChain(self.n, self.m1, self.m2, self.k1, self.k2, x0, v0)


_INT_KEYS = {"n", "mrfactor", "halvings"}
_STR_KEYS = {"scheme", "norm", "mode", "out"}
KEYS = {f.name for f in fields(StudyConfig)}


def _coerce(key: str, raw):
    if key not in KEYS:
        raise ConfigError(f"unknown key {key!r}")
    if raw is None:
        return None
    if key in _STR_KEYS:
        return str(raw).strip()
    try:
        if key == "H":
            if isinstance(raw, (list, tuple)):
                return tuple(float(x) for x in raw)
            return tuple(float(x) for x in str(raw).replace(",", " ").split())
        if key in _INT_KEYS:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r} for key {key!r}") from None


def norm_function(spec: str):
    """``euclid``, ``max`` or ``component:i`` (i-th entry of each block)."""
    if spec in ("euclid", "euclidean"):
        return lambda e: float(np.linalg.norm(e))
    if spec == "max":
        return lambda e: float(np.max(np.abs(e)))
    if spec.startswith("component:"):
        try:
            i = int(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad component index in norm {spec!r}") from None
        if i < 0:
            raise ConfigError(f"bad component index in norm {spec!r}")
        return lambda e: float(abs(e[i]))
    raise ConfigError(f"unknown norm {spec!r}; use euclid, max or component:<index>")


def validate(cfg: StudyConfig) -> StudyConfig:
    def bad(key, why):
        raise ConfigError(f"{key}: {why}")

    if cfg.n < 2:
        bad("n", "need at least 2 masses")
    for key in ("m1", "m2", "k1", "k2", "tend", "Hmax"):
        if not getattr(cfg, key) > 0:
            bad(key, "must be positive")
    if cfg.mrfactor < 1:
        bad("mrfactor", "must be a positive integer")
    if cfg.halvings < 0:
        bad("halvings", "must be >= 0")
    if cfg.mode not in ("multirate", "singlerate", "both"):
        bad("mode", f"unknown mode {cfg.mode!r}")
    try:
        get_tableau(cfg.scheme)
    except KeyError as err:
        bad("scheme", err.args[0])
    norm_function(cfg.norm)
    if cfg.norm.startswith("component:") and int(cfg.norm.split(":")[1]) >= 2:
        bad("norm", "component index must address both blocks (the fast block has 2 entries)")
    for H in cfg.H_values:
        if not H > 0:
            bad("H", f"step {H!r} must be positive")
        try:
            step_count(cfg.tend, H)
        except ValueError:
            key = "H" if cfg.H else "Hmax"
            bad(key, f"{H!r} does not divide tend = {cfg.tend!r} into whole steps")
    return cfg


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        values[key] = _coerce(key, raw)
    return values


def parse_config(text: str = "", overrides: dict | None = None) -> StudyConfig:
    """Resolve a config from file contents plus flag overrides (flags win)."""
    values = parse_config_text(text)
    for key, raw in (overrides or {}).items():
        if raw is not None:
            values[key] = _coerce(key, raw)
    return validate(replace(StudyConfig(), **values))


@dataclass(frozen=True)
class ReportRow:
    H: float
    h: float
    error_slow: float
    error_fast: float
    slow_calls: int
    fast_calls: int
    scalar_total: int
    wall_ms: float


@dataclass
class ConvergenceReport:
    scheme: str
    rows: list[ReportRow]
    slope_slow: float | None = None
    slope_fast: float | None = None
    notes: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def ratios(self, block: str) -> list[float]:
        errs = [getattr(r, f"error_{block}") for r in self.rows]
        return [a / b if b else math.inf for a, b in zip(errs, errs[1:])]


def fit_order(H, errors, floor: float = ROUNDOFF_FLOOR) -> float | None:
    """Least-squares slope of log2(error) against log2(H), over errors above ``floor``."""
    pts = [(math.log2(x), math.log2(e)) for x, e in zip(H, errors) if e > floor]
    if len(pts) < 2:
        return None
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def _study_row(cfg: StudyConfig, H: float, scheme: str) -> ReportRow:
    chain = cfg.chain()
    ivp = build_chain_ivp(chain, 0.0, cfg.tend)
    tab = get_tableau(cfg.scheme)
    h = H / cfg.mrfactor
    start = time.perf_counter()
    try:
        if scheme == "multirate":
            run = integrate(ivp, MultirateConfig(tab, H, cfg.mrfactor))
            ys, yf, counter = run.final_slow, run.final_fast, run.stage_counter
        else:
            run = integrate_singlerate(ivp, tab, h)
            ys, yf, counter = run.final_slow, run.final_fast, run.counter
    except IntegrationError as err:
        raise err.with_context(H=H) from err
    wall_ms = (time.perf_counter() - start) * 1e3
    es, ef = to_blocks(*modal_solution(chain)(cfg.tend))
    norm = norm_function(cfg.norm)
    return ReportRow(
        H, h, norm(ys - es), norm(yf - ef),
        counter.slow_calls, counter.fast_calls, counter.scalar_total, wall_ms,
    )


def run_study(cfg: StudyConfig, scheme: str | None = None, jobs: int = 1) -> ConvergenceReport:
    """Error at ``tend`` against the exact solution for every H, plus fitted orders.

    Sweep entries are independent; ``jobs > 1`` runs them in worker processes.
    """
    scheme = scheme or cfg.schemes[0]
    Hs = cfg.H_values
    if jobs > 1 and len(Hs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            # longest runs first
            futures = {H: pool.submit(_study_row, cfg, H, scheme) for H in sorted(Hs)}
            rows = [futures[H].result() for H in Hs]
    else:
        rows = [_study_row(cfg, H, scheme) for H in Hs]

    report = ConvergenceReport(scheme, rows, meta={"config": cfg})
    report.slope_slow = fit_order([r.H for r in rows], [r.error_slow for r in rows])
    report.slope_fast = fit_order([r.H for r in rows], [r.error_fast for r in rows])
    if report.slope_slow is None or report.slope_fast is None:
        report.notes.append("below round-off floor, no slope fitted")
    return report


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.16e}"


def emit_csv(report: ConvergenceReport, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in report.rows:
            w.writerow([_fmt(getattr(r, k)) for k in CSV_HEADER])
    return path


def read_csv(path) -> list[ReportRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    ints = {"slow_calls", "fast_calls", "scalar_total"}
    return [ReportRow(**{k: (int(v) if k in ints else float(v)) for k, v in r.items()}) for r in rows]


def emit_plot_data(report: ConvergenceReport, out_dir, stem: str = "convergence") -> list[Path]:
    """Two-column ``log2(H) log2(error)`` files per block, and a slope-4 reference line.

    The reference file has columns ``log2(H)``, then the line anchored at
    the largest-H error of the slow block and of the fast block.
    """
    if not report.rows:
        raise ValueError("nothing to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    lg = [math.log2(r.H) for r in report.rows]
    anchors = {}
    for block in ("slow", "fast"):
        pts = [(x, math.log2(getattr(r, f"error_{block}")))
               for x, r in zip(lg, report.rows) if getattr(r, f"error_{block}") > 0]
        anchors[block] = pts[0] if pts else None
        p = out_dir / f"{stem}_{block}.dat"
        p.write_text("".join(f"{x:.16e} {y:.16e}\n" for x, y in pts), encoding="utf-8")
        paths.append(p)
    if anchors["slow"] is None and anchors["fast"] is None:
        raise ValueError("nothing to plot: all errors are zero")
    ref = out_dir / f"{stem}_ref4.dat"
    lines = []
    for x in lg:
        cols = [x]
        for block in ("slow", "fast"):
            a = anchors[block]
            cols.append(a[1] + 4.0 * (x - a[0]) if a else math.nan)
        lines.append(" ".join(f"{c:.16e}" for c in cols) + "\n")
    ref.write_text("".join(lines), encoding="utf-8")
    paths.append(ref)
    return paths


def compare_costs(cfg: StudyConfig, H: float | None = None) -> CostReport:
    """Singlerate (step h) vs multirate (macro step H) evaluation counts on the chain."""
    H = cfg.H_values[0] if H is None else H
    ivp = build_chain_ivp(cfg.chain(), 0.0, cfg.tend)
    tab = get_tableau(cfg.scheme)
    mr_cfg = MultirateConfig(tab, H, cfg.mrfactor)
    return cost_report(integrate(ivp, mr_cfg), integrate_singlerate(ivp, tab, mr_cfg.h))


def format_cost_table(c: CostReport) -> str:
    lines = [
        f"m = {c.m}, s = {c.s}, macro steps = {c.n_macro}",
        f"{'':40s} {'singlerate':>12s} {'multirate':>12s}",
    ]
    lines += [f"{label:40s} {a:12d} {b:12d}" for label, a, b in c.rows()]
    lines.append(f"{'multirate bootstrap window':40s} {'':12s} {c.multirate_bootstrap:12d}")
    lines.append(f"{'multirate spline end-slope calls':40s} {'':12s} {c.spline_derivative_total:12d}")
    return "\n".join(lines)


def emit_cost_csv(c: CostReport, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", "singlerate", "multirate"])
        for label, a, b in c.rows():
            w.writerow([label, a, b])
        w.writerow(["multirate bootstrap window", "", c.multirate_bootstrap])
        w.writerow(["multirate spline end-slope calls", "", c.spline_derivative_total])
    return path
