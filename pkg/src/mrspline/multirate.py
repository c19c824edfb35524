"""Decoupled slowest-first multirate RK scheme with clamped cubic spline coupling.

One macro step of size H advances the slow block with a single RK step,
reading the fast block from the previous window's fast spline (extrapolated
past its last node). The slow block is then represented on the window by a
Hermite cubic, and the fast block takes m micro steps of size h = H/m,
reading the slow block from that cubic. A clamped spline through the new
fast micro values closes the window.

The first window has no fast spline yet, so it is bootstrapped with m
singlerate micro steps of the coupled system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .partition import CountedRHS, EvalCounter, PartitionedIVP, concat, couple, split
from .rk_core import ButcherTableau, IntegrationError, rk_step, rk_step_with_stages, validate_tableau
from .spline import (
    ClampedCubicSpline,
    Extrapolation,
    WaveformWindow,
    build_clamped_spline,
    build_hermite_cubic,
)

_STEP_COUNT_RTOL = 1e-9


def step_count(span: float, step: float) -> int:
    """Number of ``step``-sized steps in ``span``; raises if it is not an integer."""
    q = span / step
    n = round(q)
    if n < 1 or abs(q - n) > _STEP_COUNT_RTOL * max(1.0, q):
        raise ValueError(f"step {step!r} does not divide the interval length {span!r} (ratio {q!r})")
    return int(n)


@dataclass(frozen=True)
class MultirateConfig:
    tableau: ButcherTableau
    H: float
    m: int

    def __post_init__(self):
        if not self.H > 0:
            raise ValueError(f"macro step H must be positive, got {self.H!r}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"multirate factor m must be a positive integer, got {self.m!r}")
        problems = validate_tableau(self.tableau)
        if problems:
            raise ValueError(f"invalid tableau {self.tableau.name!r}: " + "; ".join(problems))

    @property
    def h(self) -> float:
        return self.H / self.m

    def n_macro(self, ivp: PartitionedIVP) -> int:
        return step_count(ivp.t_end - ivp.t0, self.H)


@dataclass(frozen=True, eq=False)
class MultirateState:
    """Solution at macro node ``t`` plus the fast spline of the window ending there."""

    n: int
    t: float
    y_slow: np.ndarray
    y_fast: np.ndarray
    fast_spline: ClampedCubicSpline
    micro_times: np.ndarray
    micro_values: np.ndarray
    # Hermite cubic used for the slow block on the window ending at t (None after the bootstrap)
    slow_interp: ClampedCubicSpline | None = None

    def fast_waveform(self) -> WaveformWindow:
        """Extrapolated fast waveform, readable on [t_n, t_n + H]."""
        span = self.fast_spline.t_end - self.fast_spline.t_start
        return WaveformWindow(self.fast_spline, self.t, self.t + span, Extrapolation.LAST_SEGMENT)


def extrapolate_fast(state: MultirateState, t):
    """Fast block at ``t`` in [t_n, t_n + H] from the last piece of the fast spline."""
    return state.fast_waveform()(t)


def _checked(value, what: str, t: float) -> np.ndarray:
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise IntegrationError(f"non-finite {what}", t=t)
    return value


def _micro_grid(t_start: float, t_stop: float, h: float, m: int) -> np.ndarray:
    ts = t_start + h * np.arange(m + 1)
    ts[-1] = t_stop
    return ts


def first_macro_step(
    ivp: PartitionedIVP,
    cfg: MultirateConfig,
    stage_counter: EvalCounter | None = None,
    deriv_counter: EvalCounter | None = None,
) -> MultirateState:
    """Bootstrap window: m singlerate steps of the coupled system, then the fast spline."""
    tab, m, h = cfg.tableau, cfg.m, cfg.h
    t0 = ivp.t0
    t1 = t0 + cfg.H
    if t1 > ivp.t_end * (1 + _STEP_COUNT_RTOL) + _STEP_COUNT_RTOL:
        raise ValueError("first macro step overruns the time span")
    f = couple(ivp, stage_counter)
    drhs = CountedRHS(ivp, deriv_counter)

    ts = _micro_grid(t0, t1, h, m)
    fast_vals = np.empty((m + 1, ivp.d_fast))
    fast_vals[0] = ivp.y0_fast
    y = ivp.y0
    d_start = None
    try:
        for lam in range(m):
            y, k = rk_step_with_stages(tab, f, t0 + lam * h, y, h)
            if lam == 0 and tab.c[0] == 0.0:
                d_start = split(k[0], ivp)[1]
            fast_vals[lam + 1] = y[ivp.d_slow :]
    except IntegrationError as err:
        raise err.with_context(phase="bootstrap", macro=0) from err

    ys1, yf1 = split(y, ivp)
    if d_start is None:
        d_start = _checked(drhs.fast(t0, ivp.y0_slow, ivp.y0_fast), "fast end slope", t0)
    d_end = _checked(drhs.fast(t1, ys1, yf1), "fast end slope", t1)
    spline = build_clamped_spline(ts, fast_vals, d_start, d_end)
    return MultirateState(1, t1, ys1.copy(), yf1.copy(), spline, ts, fast_vals)


def macro_step(
    ivp: PartitionedIVP,
    cfg: MultirateConfig,
    state: MultirateState,
    stage_counter: EvalCounter | None = None,
    deriv_counter: EvalCounter | None = None,
) -> MultirateState:
    """Advance from macro node n >= 1 to n + 1.

    RK stage calls are tallied on ``stage_counter`` (s slow calls and s*m
    fast calls per step). End-slope evaluations that cannot be taken from an
    already computed first stage go to ``deriv_counter``.
    """
    if state.n < 1:
        raise ValueError("macro_step needs a state produced by first_macro_step")
    tab, H, m, h = cfg.tableau, cfg.H, cfg.m, cfg.h
    n, tn = state.n, state.t
    t_next = ivp.t0 + (n + 1) * H
    rhs = CountedRHS(ivp, stage_counter)
    drhs = CountedRHS(ivp, deriv_counter)
    ys_n, yf_n = state.y_slow, state.y_fast

    # (i) slow macro step on the extrapolated fast waveform
    fast_wave = state.fast_waveform()
    try:
        yf_stage = fast_wave(tn + tab.c * H)
        ys_next, k_slow = rk_step_with_stages(
            tab, lambda t, ys, yf: rhs.slow(t, ys, yf), tn, ys_n, H, stage_inputs=yf_stage
        )
    except IntegrationError as err:
        raise err.with_context(phase="i", macro=n) from err

    # (ii) slow Hermite cubic on [t_n, t_{n+1}]
    try:
        if tab.c[0] == 0.0 and np.array_equal(yf_stage[0], yf_n):
            ds_n = k_slow[0]
        else:
            ds_n = _checked(drhs.slow(tn, ys_n, yf_n), "slow end slope", tn)
        ds_next = _checked(drhs.slow(t_next, ys_next, fast_wave(t_next)), "slow end slope", t_next)
    except IntegrationError as err:
        raise err.with_context(phase="ii", macro=n) from err
    slow_interp = build_hermite_cubic(tn, t_next, ys_n, ys_next, ds_n, ds_next)
    slow_wave = WaveformWindow(slow_interp, tn, t_next, Extrapolation.FORBIDDEN)

    # (iii) m fast micro steps on the interpolated slow waveform
    micro_starts = tn + h * np.arange(m)
    stage_times = micro_starts[:, None] + tab.c[None, :] * h
    ys_stage = slow_wave(stage_times.ravel()).reshape(m, tab.s, ivp.d_slow)
    fast_f = lambda t, yf, ys: rhs.fast(t, ys, yf)  # noqa: E731
    fast_vals = np.empty((m + 1, ivp.d_fast))
    fast_vals[0] = yf_n
    yf = yf_n
    df_n = None
    try:
        for lam in range(m):
            yf, k_fast = rk_step_with_stages(tab, fast_f, micro_starts[lam], yf, h, ys_stage[lam])
            if lam == 0 and tab.c[0] == 0.0 and np.array_equal(ys_stage[0, 0], ys_n):
                df_n = k_fast[0]
            fast_vals[lam + 1] = yf
    except IntegrationError as err:
        raise err.with_context(phase="iii", macro=n) from err

    # (iv) clamped fast spline through the new micro values
    try:
        if df_n is None:
            df_n = _checked(drhs.fast(tn, ys_n, yf_n), "fast end slope", tn)
        df_next = _checked(drhs.fast(t_next, ys_next, yf), "fast end slope", t_next)
    except IntegrationError as err:
        raise err.with_context(phase="iv", macro=n) from err
    ts = _micro_grid(tn, t_next, h, m)
    spline = build_clamped_spline(ts, fast_vals, df_n, df_next)
    return MultirateState(n + 1, t_next, ys_next, yf, spline, ts, fast_vals, slow_interp)


@dataclass(eq=False)
class MultirateRun:
    """Everything recorded by :func:`integrate`."""

    ivp: PartitionedIVP
    config: MultirateConfig
    macro_times: np.ndarray
    macro_slow: np.ndarray
    macro_fast: np.ndarray
    micro_times: np.ndarray
    micro_fast: np.ndarray
    stage_counter: EvalCounter
    deriv_counter: EvalCounter
    # (slow_calls, fast_calls) spent on RK stages in each macro step
    step_calls: list[tuple[int, int]] = field(default_factory=list)
    states: list[MultirateState] | None = None

    @property
    def n_macro(self) -> int:
        return len(self.macro_times) - 1

    @property
    def final_slow(self) -> np.ndarray:
        return self.macro_slow[-1]

    @property
    def final_fast(self) -> np.ndarray:
        return self.macro_fast[-1]


def integrate(ivp: PartitionedIVP, cfg: MultirateConfig, keep_states: bool = False) -> MultirateRun:
    """Bootstrap window followed by macro steps until ``ivp.t_end``."""
    n_macro = cfg.n_macro(ivp)
    m = cfg.m
    stage = EvalCounter.for_problem(ivp)
    deriv = EvalCounter.for_problem(ivp)

    macro_times = ivp.t0 + cfg.H * np.arange(n_macro + 1)
    macro_times[-1] = ivp.t_end
    macro_slow = np.empty((n_macro + 1, ivp.d_slow))
    macro_fast = np.empty((n_macro + 1, ivp.d_fast))
    micro_times = np.empty(n_macro * m + 1)
    micro_fast = np.empty((n_macro * m + 1, ivp.d_fast))
    macro_slow[0], macro_fast[0] = ivp.y0_slow, ivp.y0_fast
    step_calls = []
    states = [] if keep_states else None

    state = None
    for n in range(n_macro):
        before = stage.snapshot()
        if state is None:
            state = first_macro_step(ivp, cfg, stage, deriv)
        else:
            state = macro_step(ivp, cfg, state, stage, deriv)
        after = stage.snapshot()
        step_calls.append((after[0] - before[0], after[1] - before[1]))
        macro_slow[n + 1], macro_fast[n + 1] = state.y_slow, state.y_fast
        micro_times[n * m : (n + 1) * m + 1] = state.micro_times
        micro_fast[n * m : (n + 1) * m + 1] = state.micro_values
        if keep_states:
            states.append(state)

    return MultirateRun(
        ivp, cfg, macro_times, macro_slow, macro_fast, micro_times, micro_fast,
        stage, deriv, step_calls, states,
    )


@dataclass(eq=False)
class SinglerateRun:
    ivp: PartitionedIVP
    tableau: ButcherTableau
    h: float
    steps: int
    final_slow: np.ndarray
    final_fast: np.ndarray
    counter: EvalCounter
    times: np.ndarray | None = None
    states: np.ndarray | None = None


def integrate_singlerate(
    ivp: PartitionedIVP, tableau: ButcherTableau, h: float, record: bool = False
) -> SinglerateRun:
    """Plain fixed-step RK on the coupled system, with the same call accounting."""
    steps = step_count(ivp.t_end - ivp.t0, h)
    counter = EvalCounter.for_problem(ivp)
    f = couple(ivp, counter)
    y = ivp.y0
    times = states = None
    if record:
        times = ivp.t0 + h * np.arange(steps + 1)
        states = np.empty((steps + 1, len(y)))
        states[0] = y
    for j in range(steps):
        try:
            y = rk_step(tableau, f, ivp.t0 + j * h, y, h)
        except IntegrationError as err:
            raise err.with_context(step=j + 1) from err
        if record:
            states[j + 1] = y
    ys, yf = split(y, ivp)
    return SinglerateRun(ivp, tableau, h, steps, ys.copy(), yf.copy(), counter, times, states)


@dataclass(frozen=True)
class CostReport:
    """Scalar right-hand side evaluation counts, singlerate vs multirate.

    ``*_per_macro`` are measured over one macro step (for the multirate
    scheme, a regular step after the bootstrap window). ``formula_*`` are the
    closed-form counts s*m*(w_S + w_F) and s*(m*w_F + w_S).
    """

    m: int
    s: int
    n_macro: int
    singlerate_per_macro: int
    multirate_per_macro: int
    singlerate_total: int
    multirate_total: int
    multirate_bootstrap: int
    spline_derivative_total: int
    formula_singlerate: int
    formula_multirate: int

    @property
    def formula_singlerate_total(self) -> int:
        return self.formula_singlerate * self.n_macro

    @property
    def formula_multirate_total(self) -> int:
        return self.formula_multirate * self.n_macro

    def rows(self) -> list[tuple[str, int, int]]:
        return [
            ("per macro step (measured)", self.singlerate_per_macro, self.multirate_per_macro),
            ("per macro step (formula)", self.formula_singlerate, self.formula_multirate),
            ("whole run (formula x macro steps)", self.formula_singlerate_total, self.formula_multirate_total),
            ("whole run (measured, incl. bootstrap)", self.singlerate_total, self.multirate_total),
        ]


def cost_report(run: MultirateRun, comparison: SinglerateRun) -> CostReport:
    a, b = run.ivp, comparison.ivp
    same = a is b or (
        a.d_slow == b.d_slow and a.d_fast == b.d_fast and a.t0 == b.t0 and a.t_end == b.t_end
        and a.weight_slow == b.weight_slow and a.weight_fast == b.weight_fast
    )
    if not same:
        raise ValueError("runs were made on different problems")
    cfg = run.config
    if not np.isclose(comparison.h, cfg.h, rtol=1e-12, atol=0.0):
        raise ValueError(f"singlerate step {comparison.h!r} differs from micro step {cfg.h!r}")

    ws, wf = a.weight_slow, a.weight_fast
    s, m, n_macro = cfg.tableau.s, cfg.m, run.n_macro
    sc = comparison.counter
    sr_total = sc.scalar_total
    if sr_total % n_macro:
        raise ValueError("singlerate call count is not a whole number of macro steps")
    regular = run.step_calls[1] if n_macro > 1 else run.step_calls[0]
    boot = run.step_calls[0]
    return CostReport(
        m=m,
        s=s,
        n_macro=n_macro,
        singlerate_per_macro=sr_total // n_macro,
        multirate_per_macro=regular[0] * ws + regular[1] * wf,
        singlerate_total=sr_total,
        multirate_total=run.stage_counter.scalar_total,
        multirate_bootstrap=boot[0] * ws + boot[1] * wf,
        spline_derivative_total=run.deriv_counter.scalar_total,
        formula_singlerate=s * m * (ws + wf),
        formula_multirate=s * (m * wf + ws),
    )
