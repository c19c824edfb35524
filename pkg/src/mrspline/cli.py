"""Command line entry point: ``mrspline {converge,cost,run}``.

Exit codes: 0 success, 1 config error, 2 integration failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from .multirate import MultirateConfig, integrate, integrate_singlerate
from .problems import build_chain_ivp, from_blocks
from .rk_core import IntegrationError, get_tableau
from .study import (
    ConfigError,
    StudyConfig,
    compare_costs,
    emit_cost_csv,
    emit_csv,
    emit_plot_data,
    format_cost_table,
    parse_config,
    run_study,
)

log = logging.getLogger("mrspline")

EXIT_OK, EXIT_CONFIG, EXIT_INTEGRATION, EXIT_IO = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--n", help="number of masses")
    common.add_argument("--m1", help="light mass")
    common.add_argument("--m2", help="heavy masses")
    common.add_argument("--k1", help="stiff spring constant")
    common.add_argument("--k2", help="soft spring constant")
    common.add_argument("--mrfactor", "--m", dest="mrfactor", help="micro steps per macro step")
    common.add_argument("--Hmax", help="largest macro step")
    common.add_argument("--halvings", help="number of times Hmax is halved")
    common.add_argument("--tend", help="final time")
    common.add_argument("--norm", help="euclid, max or component:<index>")
    common.add_argument("--mode", choices=["multirate", "singlerate", "both"])
    common.add_argument("--scheme", help="tableau label (default rk4)")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for a sweep")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mrspline", description="Multirate RK with spline coupling on the mass-spring chain.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("converge", parents=[common], help="convergence sweep over H; CSV and plot data")
    sub.add_parser("cost", parents=[common], help="singlerate vs multirate evaluation counts")
    sub.add_parser("run", parents=[common], help="single integration at Hmax; trajectory CSV")
    return p


_CONFIG_FLAGS = ("n", "m1", "m2", "k1", "k2", "mrfactor", "Hmax", "halvings", "tend", "norm", "mode", "scheme", "out")


def load_config(args) -> StudyConfig:
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as err:
            raise ConfigError(f"cannot read config file: {err}") from err
    return parse_config(text, {k: getattr(args, k) for k in _CONFIG_FLAGS})


def cmd_converge(cfg: StudyConfig, out: Path, jobs: int) -> None:
    reports = [run_study(cfg, scheme, jobs=jobs) for scheme in cfg.schemes]
    # files are written only once every run has finished
    for report in reports:
        scheme = report.scheme
        emit_csv(report, out / f"convergence_{scheme}.csv")
        if any(r.error_slow > 0 or r.error_fast > 0 for r in report.rows):
            emit_plot_data(report, out, stem=f"convergence_{scheme}")
        print(f"[{scheme}] {'H':>12s} {'error_slow':>12s} {'error_fast':>12s}")
        for r in report.rows:
            print(f"[{scheme}] {r.H:12.6g} {r.error_slow:12.4e} {r.error_fast:12.4e}")
        for note in report.notes:
            print(f"[{scheme}] note: {note}")
        if report.slope_slow is not None and report.slope_fast is not None:
            print(f"[{scheme}] fitted order: slow {report.slope_slow:.3f}, fast {report.slope_fast:.3f}")


def cmd_cost(cfg: StudyConfig, out: Path) -> None:
    c = compare_costs(cfg)
    print(format_cost_table(c))
    emit_cost_csv(c, out / "cost.csv")


def cmd_run(cfg: StudyConfig, out: Path) -> None:
    chain = cfg.chain()
    ivp = build_chain_ivp(chain, 0.0, cfg.tend)
    tab = get_tableau(cfg.scheme)
    H = cfg.H_values[0]
    header = ["t"] + [f"x_{i}" for i in range(1, cfg.n + 1)] + [f"v_{i}" for i in range(1, cfg.n + 1)]
    for scheme in cfg.schemes:
        if scheme == "multirate":
            run = integrate(ivp, MultirateConfig(tab, H, cfg.mrfactor))
            records = zip(run.macro_times, run.macro_slow, run.macro_fast)
        else:
            run = integrate_singlerate(ivp, tab, H / cfg.mrfactor, record=True)
            records = ((t, y[: ivp.d_slow], y[ivp.d_slow :]) for t, y in zip(run.times, run.states))
        path = out / f"trajectory_{scheme}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for t, ys, yf in records:
                x, v = from_blocks(ys, yf)
                w.writerow([f"{t:.16e}"] + [f"{q:.16e}" for q in (*x, *v)])
        print(f"wrote {path}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        jobs = args.jobs if args.jobs > 0 else (os.cpu_count() or 1)
        if args.command == "converge":
            cmd_converge(cfg, out, jobs)
        elif args.command == "cost":
            cmd_cost(cfg, out)
        else:
            cmd_run(cfg, out)
    except IntegrationError as err:
        print(f"integration failure: {err}", file=sys.stderr)
        return EXIT_INTEGRATION
    except OSError as err:
        print(f"I/O failure: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
