"""Clamped cubic splines and the waveform windows built on them.

Splines are stored in Hermite form: breakpoint values and first derivatives.
Interior slopes of a clamped spline come from the usual strictly diagonally
dominant tridiagonal system, solved with a Thomas sweep.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class SplineError(ValueError):
    pass


class ExtrapolationError(SplineError):
    """Evaluation requested outside the window a waveform may be read on."""


# relative slack for boundary times that differ from a breakpoint by rounding
_EDGE_SLACK = 1e-12


def _as_data(v, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1)
    if a.ndim != 1:
        raise SplineError(f"{name} must be a vector, got shape {a.shape}")
    return a


def _hermite_basis(s):
    s2 = s * s
    s3 = s2 * s
    return 2 * s3 - 3 * s2 + 1, -2 * s3 + 3 * s2, s3 - 2 * s2 + s, s3 - s2


def _hermite_basis_d1(s):
    s2 = s * s
    return 6 * s2 - 6 * s, -6 * s2 + 6 * s, 3 * s2 - 4 * s + 1, 3 * s2 - 2 * s


def _hermite_basis_d2(s):
    return 12 * s - 6, -12 * s + 6, 6 * s - 4, 6 * s - 2


@dataclass(frozen=True, eq=False)
class ClampedCubicSpline:
    """Piecewise cubic in Hermite form.

    ``values`` and ``slopes`` have shape ``(N + 1, d)``. ``scalar`` records
    whether the data were given as plain numbers, in which case evaluation
    returns numbers rather than length-1 vectors.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    scalar: bool = False

    @property
    def n_intervals(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def t_start(self) -> float:
        return float(self.breakpoints[0])

    @property
    def t_end(self) -> float:
        return float(self.breakpoints[-1])

    def _locate(self, t: np.ndarray, extrapolate: bool) -> np.ndarray:
        ts = self.breakpoints
        span = ts[-1] - ts[0]
        slack = _EDGE_SLACK * (abs(ts[0]) + abs(ts[-1]) + span)
        if np.any(t < ts[0] - slack):
            raise ExtrapolationError(f"t = {t.min()!r} before first breakpoint {ts[0]!r}")
        if not extrapolate and np.any(t > ts[-1] + slack):
            raise ExtrapolationError(f"t = {t.max()!r} past last breakpoint {ts[-1]!r}")
        return np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2)

    def evaluate(self, t, order: int = 0, extrapolate: bool = False):
        """Value (``order=0``) or derivative (1, 2) at ``t``.

        With ``extrapolate`` the cubic of the last interval is continued past
        the final breakpoint.
        """
        if order not in (0, 1, 2):
            raise SplineError(f"derivative order must be 0, 1 or 2, got {order}")
        tt = np.asarray(t, dtype=float)
        scalar_t = tt.ndim == 0
        tt = np.atleast_1d(tt)
        idx = self._locate(tt, extrapolate)

        t0 = self.breakpoints[idx]
        w = self.breakpoints[idx + 1] - t0
        s = ((tt - t0) / w)[:, None]
        w = w[:, None]
        y0, y1 = self.values[idx], self.values[idx + 1]
        d0, d1 = self.slopes[idx], self.slopes[idx + 1]
        if order == 0:
            h00, h01, h10, h11 = _hermite_basis(s)
            out = h00 * y0 + h01 * y1 + w * (h10 * d0 + h11 * d1)
            beyond = np.flatnonzero(s[:, 0] > 1.0)
            if len(beyond):
                # Taylor form about the right node is far better conditioned
                # than the Hermite basis once s grows past 1
                b = beyond
                wb = w[b]
                tau = tt[b, None] - self.breakpoints[idx[b] + 1][:, None]
                delta = (y1[b] - y0[b]) / wb
                c2 = (d0[b] + 2 * d1[b] - 3 * delta) / wb
                c3 = (d0[b] + d1[b] - 2 * delta) / (wb * wb)
                out[b] = y1[b] + tau * (d1[b] + tau * (c2 + tau * c3))
        elif order == 1:
            g00, g01, g10, g11 = _hermite_basis_d1(s)
            out = (g00 * y0 + g01 * y1) / w + g10 * d0 + g11 * d1
        else:
            g00, g01, g10, g11 = _hermite_basis_d2(s)
            out = (g00 * y0 + g01 * y1) / (w * w) + (g10 * d0 + g11 * d1) / w

        if self.scalar:
            out = out[:, 0]
        return out[0] if scalar_t else out

    __call__ = evaluate

    def second_derivative_jumps(self) -> np.ndarray:
        """|S''(t_i-) - S''(t_i+)| at the interior breakpoints, per component."""
        if self.n_intervals < 2:
            return np.zeros((0, self.dim))
        ts, y, d = self.breakpoints, self.values, self.slopes
        w = np.diff(ts)[:, None]
        delta = np.diff(y, axis=0) / w
        left_end = (2 * d[:-1] + 4 * d[1:] - 6 * delta) / w  # S'' at right end of each piece
        right_start = (-4 * d[:-1] - 2 * d[1:] + 6 * delta) / w  # S'' at left end of each piece
        return np.abs(left_end[:-1] - right_start[1:])


def build_hermite_cubic(t0, t1, y0, y1, d0, d1) -> ClampedCubicSpline:
    """The cubic matching values and first derivatives at ``t0`` and ``t1``."""
    if not t1 > t0:
        raise SplineError(f"need t1 > t0, got t0={t0!r}, t1={t1!r}")
    scalar = np.ndim(y0) == 0
    cols = [_as_data(v, n) for v, n in ((y0, "y0"), (y1, "y1"), (d0, "d0"), (d1, "d1"))]
    if len({c.shape for c in cols}) != 1:
        raise SplineError(f"dimension mismatch: {[c.shape[0] for c in cols]}")
    return ClampedCubicSpline(
        np.array([t0, t1], dtype=float),
        np.vstack(cols[:2]),
        np.vstack(cols[2:]),
        scalar,
    )


def _thomas(lower, diag, upper, rhs):
    """Solve a tridiagonal system, several right-hand sides at once.

    ``lower[i]`` couples row ``i`` to ``i-1`` and ``upper[i]`` to ``i+1``;
    ``rhs`` has shape ``(n, d)``. No pivoting: callers pass diagonally
    dominant systems.
    """
    lower, diag, upper = lower.tolist(), diag.tolist(), upper.tolist()
    n = len(diag)
    # eliminate on the matrix in plain floats, then sweep the right-hand sides
    cp = [0.0] * n
    inv = [0.0] * n
    inv[0] = 1.0 / diag[0]
    cp[0] = upper[0] * inv[0]
    for i in range(1, n):
        inv[i] = 1.0 / (diag[i] - lower[i] * cp[i - 1])
        cp[i] = upper[i] * inv[i]
    x = np.empty_like(rhs)
    prev = x[0] = rhs[0] * inv[0]
    for i in range(1, n):
        prev = x[i] = (rhs[i] - lower[i] * prev) * inv[i]
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return x


def build_clamped_spline(ts, ys, d_start, d_end) -> ClampedCubicSpline:
    """Clamped C2 cubic spline through ``(ts, ys)``.

    ``ys`` is a sequence of N+1 values (numbers or equal-length vectors);
    ``d_start`` and ``d_end`` are the prescribed end slopes.
    """
    ts = np.asarray(ts, dtype=float)
    if ts.ndim != 1 or len(ts) < 2:
        raise SplineError("need at least two breakpoints")
    w = np.diff(ts)
    if np.any(w <= 0):
        raise SplineError("breakpoints must be strictly increasing")

    ys_arr = np.asarray(ys, dtype=float)
    scalar = ys_arr.ndim == 1
    Y = ys_arr[:, None] if scalar else ys_arr
    if Y.ndim != 2 or Y.shape[0] != len(ts):
        raise SplineError(f"expected {len(ts)} values, got array of shape {ys_arr.shape}")
    ds = _as_data(d_start, "d_start")
    de = _as_data(d_end, "d_end")
    if ds.shape[0] != Y.shape[1] or de.shape[0] != Y.shape[1]:
        raise SplineError(
            f"dimension mismatch: values have {Y.shape[1]} components, "
            f"end slopes have {ds.shape[0]} and {de.shape[0]}"
        )

    D = np.empty_like(Y)
    D[0] = ds
    D[-1] = de
    n = len(ts) - 1
    if n > 1:
        # row i: w_i d_{i-1} + 2 (w_{i-1} + w_i) d_i + w_{i-1} d_{i+1}
        #        = 3 (w_i delta_{i-1} + w_{i-1} delta_i)
        delta = np.diff(Y, axis=0) / w[:, None]
        wl, wr = w[:-1], w[1:]
        rhs = 3.0 * (wr[:, None] * delta[:-1] + wl[:, None] * delta[1:])
        rhs[0] -= wr[0] * ds
        rhs[-1] -= wl[-1] * de
        D[1:-1] = _thomas(wr, 2.0 * (wl + wr), wl, rhs)
    return ClampedCubicSpline(ts, Y, D, scalar)


class Extrapolation(Enum):
    FORBIDDEN = "forbidden"
    LAST_SEGMENT = "last-segment"


@dataclass(frozen=True, eq=False)
class WaveformWindow:
    """A spline restricted to the interval on which a coupling may read it."""

    spline: ClampedCubicSpline
    t_a: float
    t_b: float
    mode: Extrapolation = Extrapolation.FORBIDDEN

    def __post_init__(self):
        if self.t_a < self.spline.t_start:
            raise SplineError("window starts before the spline's first breakpoint")
        if self.t_b < self.t_a:
            raise SplineError("window end precedes its start")
        if self.mode is Extrapolation.FORBIDDEN and self.t_b > self.spline.t_end:
            raise SplineError("window reaches past the spline but extrapolation is forbidden")

    def _check(self, t):
        tt = np.asarray(t, dtype=float)
        slack = _EDGE_SLACK * (abs(self.t_a) + abs(self.t_b) + (self.t_b - self.t_a))
        if np.any(tt < self.t_a - slack) or np.any(tt > self.t_b + slack):
            raise ExtrapolationError(
                f"t outside the waveform window [{self.t_a!r}, {self.t_b!r}]: "
                f"{tt.min()!r} .. {tt.max()!r}"
            )

    def __call__(self, t):
        self._check(t)
        return self.spline.evaluate(t, extrapolate=self.mode is Extrapolation.LAST_SEGMENT)

    def derivative(self, t, order: int = 1):
        if order not in (1, 2):
            raise SplineError(f"derivative order must be 1 or 2, got {order}")
        self._check(t)
        return self.spline.evaluate(t, order, extrapolate=self.mode is Extrapolation.LAST_SEGMENT)


def evaluate(w: WaveformWindow, t):
    return w(t)


def evaluate_derivative(w: WaveformWindow, t, order: int = 1):
    return w.derivative(t, order)
