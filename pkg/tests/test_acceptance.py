"""Acceptance criteria, each run at its stated tolerance.

Every test records a verdict line through ``acceptance_log``; the lines are
printed together in the "acceptance criteria" section of the pytest summary.
"""

import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrspline.multirate import (
    MultirateConfig,
    extrapolate_fast,
    first_macro_step,
    integrate,
    macro_step,
)
from mrspline.partition import PartitionedIVP
from mrspline.problems import build_stiffness, energy, to_blocks
from mrspline.rk_core import RK4, singlerate_final
from mrspline.spline import build_clamped_spline
from mrspline.study import ROUNDOFF_FLOOR, compare_costs, emit_csv, fit_order, parse_config, run_study

pytestmark = pytest.mark.slow


def verdict(log, criterion, ok, detail):
    log.append((criterion, bool(ok), detail))
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


@pytest.fixture(scope="module")
def defaults():
    return parse_config("")


@pytest.fixture(scope="module")
def multirate_sweep(defaults):
    start = time.perf_counter()
    report = run_study(defaults, "multirate")
    return report, time.perf_counter() - start


@pytest.fixture(scope="module")
def singlerate_sweep(defaults):
    return run_study(defaults, "singlerate")


# -- 1: convergence order ----------------------------------------------------------


def test_criterion_1_convergence_order(multirate_sweep, acceptance_log):
    report, wall = multirate_sweep
    s, f = report.slope_slow, report.slope_fast
    ok = s is not None and f is not None and 3.7 <= s <= 4.3 and 3.7 <= f <= 4.3
    verdict(acceptance_log, "1", ok,
            f"fitted order slow {s:.3f}, fast {f:.3f} (band [3.7, 4.3]); sweep wall time {wall:.1f} s")
    assert ok


def test_sweep_csv_has_seven_rows(multirate_sweep, tmp_path):
    report, _ = multirate_sweep
    assert [r.H for r in report.rows] == [0.25 / 2**k for k in range(7)]
    lines = emit_csv(report, tmp_path / "c.csv").read_text().splitlines()
    assert len(lines) == 8


def test_plot_data_collinear_with_slope_4(multirate_sweep):
    # residual of the log2-log2 linear fit, over rows above the round-off floor
    report, _ = multirate_sweep
    worst = {}
    for block in ("slow", "fast"):
        pts = [(math.log2(r.H), math.log2(getattr(r, f"error_{block}")))
               for r in report.rows if getattr(r, f"error_{block}") > ROUNDOFF_FLOOR]
        x, y = np.array(pts).T
        worst[block] = float(np.max(np.abs(y - np.polyval(np.polyfit(x, y, 1), x))))
    assert max(worst.values()) < 0.15, worst


# -- 2: error magnitude and successive ratios ------------------------------------------


def test_criterion_2a_error_magnitude(multirate_sweep, acceptance_log):
    report, _ = multirate_sweep
    r = report.rows[0]
    assert r.H == 0.25
    ok = 1.3e-7 <= r.error_slow <= 1.3e-5 and 1.1e-7 <= r.error_fast <= 1.1e-5
    verdict(acceptance_log, "2a", ok,
            f"H = 0.25: error_slow {r.error_slow:.3e} in [1.3e-7, 1.3e-5], "
            f"error_fast {r.error_fast:.3e} in [1.1e-7, 1.1e-5]")
    assert ok


def test_criterion_2b_successive_ratios(multirate_sweep, acceptance_log):
    report, _ = multirate_sweep
    rs, rf = report.ratios("slow"), report.ratios("fast")
    ok = all(12 <= q <= 18 for q in rs + rf)
    fmt = lambda qs: ", ".join(f"{q:.2f}" for q in qs)  # noqa: E731
    verdict(acceptance_log, "2b", ok, f"ratios slow [{fmt(rs)}], fast [{fmt(rf)}] (band [12, 18])")
    assert ok


# -- 3: cost accounting ---------------------------------------------------------------


def test_criterion_3_cost_accounting(defaults, acceptance_log):
    c = compare_costs(defaults)
    ok = (c.singlerate_per_macro, c.multirate_per_macro) == (800, 116) and (
        c.formula_singlerate, c.formula_multirate) == (800, 116)
    verdict(acceptance_log, "3", ok,
            f"per macro step {c.singlerate_per_macro} vs {c.multirate_per_macro} (expected 800 vs 116); "
            f"whole run {c.singlerate_total} vs {c.multirate_total}, formula "
            f"{c.formula_singlerate_total} vs {c.formula_multirate_total}")
    assert ok


# -- 4: spline property suite -------------------------------------------------------------


@st.composite
def grids(draw):
    n = draw(st.integers(1, 12))
    gaps = draw(st.lists(st.floats(0.05, 2.0), min_size=n, max_size=n))
    return draw(st.floats(-5, 5)) + np.concatenate(([0.0], np.cumsum(gaps)))


coef = st.floats(-10, 10, allow_nan=False)


def test_criterion_4_spline_properties(acceptance_log):
    counts = {"reproduction": 0, "c2": 0}
    worst = {"reproduction": 0.0, "c2": 0.0}

    @settings(max_examples=200, deadline=None, database=None)
    @given(grids(), st.tuples(coef, coef, coef, coef))
    def reproduction(ts, c):
        a, b, q2, q3 = c
        q = lambda t: a + b * t + q2 * t**2 + q3 * t**3  # noqa: E731
        dq = lambda t: b + 2 * q2 * t + 3 * q3 * t**2  # noqa: E731
        s = build_clamped_spline(ts, q(ts), dq(ts[0]), dq(ts[-1]))
        last = ts[-1] - ts[-2]
        t = np.concatenate((np.linspace(ts[0], ts[-1], 97), ts[-1] + last * np.linspace(0, 1, 9)))
        exact = q(t)
        rel = np.max(np.abs(s.evaluate(t, extrapolate=True) - exact)) / (1 + np.max(np.abs(exact)))
        counts["reproduction"] += 1
        worst["reproduction"] = max(worst["reproduction"], rel)
        assert rel <= 1e-12

    @settings(max_examples=200, deadline=None, database=None)
    @given(grids(), st.data())
    def c2(ts, data):
        n = len(ts)
        ys = np.array(data.draw(st.lists(st.floats(-100, 100), min_size=n, max_size=n)))
        s = build_clamped_spline(ts, ys, data.draw(st.floats(-100, 100)), data.draw(st.floats(-100, 100)))
        ends = np.concatenate((ts, ts[1:] - 1e-9 * np.diff(ts)))
        scale = 1 + np.max(np.abs(s.evaluate(ends, 2)))
        jumps = s.second_derivative_jumps()
        rel = float(jumps.max()) / scale if jumps.size else 0.0
        counts["c2"] += 1
        worst["c2"] = max(worst["c2"], rel)
        assert rel <= 1e-10

    failures = []
    for prop in (reproduction, c2):
        try:
            prop()
        except AssertionError as err:
            failures.append(f"{prop.__name__}: {err}")

    errs = []
    for N in (4, 8, 16, 32, 64):
        ts = np.linspace(0, 1, N + 1)
        s = build_clamped_spline(ts, np.sin(ts), 1.0, math.cos(1.0))
        t = np.linspace(0, 1, 4001)
        errs.append(np.max(np.abs(s(t) - np.sin(t))))
    order = min(math.log2(a / b) for a, b in zip(errs, errs[1:]))

    ok = not failures and order >= 3.8 and min(counts.values()) >= 200
    verdict(acceptance_log, "4", ok,
            f"{counts['reproduction']} + {counts['c2']} random instances; worst reproduction "
            f"{worst['reproduction']:.1e} (tol 1e-12), worst C2 jump {worst['c2']:.1e} (tol 1e-10); "
            f"min interpolation order on sin {order:.2f} (>= 3.8)")
    assert ok, failures


# -- 5: decoupled equivalence ----------------------------------------------------------


def _rk4(lam, y, h, steps):
    """Classic RK4 on y' = lam * y, written out independently of the tableau machinery."""
    for _ in range(steps):
        k1 = lam * y
        k2 = lam * (y + 0.5 * h * k1)
        k3 = lam * (y + 0.5 * h * k2)
        k4 = lam * (y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def test_criterion_5_decoupled_equivalence(acceptance_log):
    rng = np.random.default_rng(20240601)
    worst = 0.0
    n_sys = 24
    for _ in range(n_sys):
        ds, df = rng.integers(1, 6), rng.integers(1, 4)
        a = rng.uniform(-1.0, 0.5, ds)
        b = rng.uniform(-20.0, -1.0, df)
        m = int(rng.integers(1, 11))
        H = float(rng.choice([0.05, 0.1, 0.125, 0.2]))
        n_macro = int(rng.integers(2, 13))
        ivp = PartitionedIVP(
            lambda t, s, f, a=a: a * s, lambda t, s, f, b=b: b * f,
            rng.normal(size=ds), rng.normal(size=df), 0.0, H * n_macro,
        )
        run = integrate(ivp, MultirateConfig(RK4, H, m))
        h = H / m
        # slow block: the bootstrap window takes m micro steps, later windows one step of H
        ys, yf = ivp.y0_slow, ivp.y0_fast
        for n in range(1, n_macro + 1):
            ys = _rk4(a, ys, h, m) if n == 1 else _rk4(a, ys, H, 1)
            yf = _rk4(b, yf, h, m)
            worst = max(
                worst,
                np.linalg.norm(run.macro_slow[n] - ys) / np.linalg.norm(ys),
                np.linalg.norm(run.macro_fast[n] - yf) / np.linalg.norm(yf),
            )
    ok = worst <= 1e-13
    verdict(acceptance_log, "5", ok, f"{n_sys} random diagonal systems; worst relative deviation {worst:.1e} (tol 1e-13)")
    assert ok


# -- 6: waveform accuracy orders -----------------------------------------------------------


def _waveform_errors(ivp, exact, H, t_window=2.0, m=20):
    cfg = MultirateConfig(RK4, H, m)
    st_ = first_macro_step(ivp, cfg)
    while st_.t < t_window - 1e-12:
        st_ = macro_step(ivp, cfg, st_)
    nxt = macro_step(ivp, cfg, st_)
    ts = np.linspace(st_.t, nxt.t, 41)
    ex = [to_blocks(*exact(t)) for t in ts]
    ex_s = np.array([e[0] for e in ex])
    ex_f = np.array([e[1] for e in ex])
    err_f = np.max(np.linalg.norm(extrapolate_fast(st_, ts) - ex_f, axis=1))
    err_s = np.max(np.linalg.norm(nxt.slow_interp(ts) - ex_s, axis=1))
    return err_f, err_s


def test_criterion_6_waveform_orders(chain_ivp, chain_exact, acceptance_log):
    Hs = [0.25 / 2**k for k in range(6)]
    errs = np.array([_waveform_errors(chain_ivp, chain_exact, H) for H in Hs])
    order_f = fit_order(Hs, errs[:, 0])
    order_s = fit_order(Hs, errs[:, 1])
    ok = order_f >= 3.7 and order_s >= 3.7
    verdict(acceptance_log, "6", ok,
            f"window at t = 2, H = 0.25 .. {Hs[-1]}: fitted order of fast extrapolant {order_f:.2f}, "
            f"slow interpolant {order_s:.2f} (>= 3.7)")
    assert ok


# -- 7: oracle self-check --------------------------------------------------------------------


def test_criterion_7_oracle_self_check(chain, chain_exact, acceptance_log):
    A = build_stiffness(chain).A
    n = chain.n

    def f(t, y):
        return np.concatenate((y[n:], A @ y[:n]))

    _, y = singlerate_final(RK4, f, 0.0, np.concatenate((chain.x0, chain.v0)), 1e-4, 400_000)
    x, v = chain_exact(40.0)
    dev = float(np.linalg.norm(y - np.concatenate((x, v))))
    e0 = energy(chain, chain.x0, chain.v0)
    drift = max(abs(energy(chain, *chain_exact(t)) - e0) / e0 for t in np.linspace(0, 40, 401))
    ok = dev <= 1e-8 and drift <= 1e-10
    verdict(acceptance_log, "7", ok,
            f"fine RK4 (h = 1e-4) vs exact at t = 40: {dev:.1e} (tol 1e-8); energy drift {drift:.1e} (tol 1e-10)")
    assert ok


# -- 8: singlerate baseline order ------------------------------------------------------------


def test_criterion_8_singlerate_order(singlerate_sweep, acceptance_log):
    s, f = singlerate_sweep.slope_slow, singlerate_sweep.slope_fast
    ok = s is not None and f is not None and 3.8 <= s <= 4.2 and 3.8 <= f <= 4.2
    verdict(acceptance_log, "8", ok, f"singlerate RK4 (h = H/20) fitted order slow {s:.3f}, fast {f:.3f} (band [3.8, 4.2])")
    assert ok
