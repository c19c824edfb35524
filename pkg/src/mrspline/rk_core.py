"""Explicit Runge-Kutta machinery shared by the singlerate and multirate drivers."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

RHS = Callable[..., np.ndarray]

_TOL = 1e-14


class IntegrationError(ArithmeticError):
    """A right-hand side produced a non-finite value.

    The context fields are filled in as the error travels up through the
    drivers: ``stage`` and ``t`` by :func:`rk_step`, ``step`` by the
    singlerate loop, ``phase`` and ``macro`` by the multirate driver.
    """

    def __init__(self, message: str, **context):
        self.message = message
        self.context = {k: v for k, v in context.items() if v is not None}
        super().__init__(self._render())

    def _render(self) -> str:
        if not self.context:
            return self.message
        ctx = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} ({ctx})"

    def __getattr__(self, name):
        try:
            return self.__dict__["context"][name]
        except KeyError:
            raise AttributeError(name) from None

    def with_context(self, **context) -> "IntegrationError":
        merged = {**self.context, **{k: v for k, v in context.items() if v is not None}}
        return IntegrationError(self.message, **merged)


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients (A, b, c) of an explicit Runge-Kutta scheme."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    name: str = "custom"
    # plain-float copies of the coefficients for the stage loop
    _rows: tuple = field(init=False, repr=False, compare=False)
    _b: tuple = field(init=False, repr=False, compare=False)
    _c: tuple = field(init=False, repr=False, compare=False)
    _zero_b: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float)
        c = np.array(self.c, dtype=float)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        rows = tuple(
            tuple((j, float(A[i, j])) for j in range(i) if A[i, j] != 0.0)
            for i in range(len(b))
        ) if A.ndim == 2 and A.shape[0] == len(b) else ()
        object.__setattr__(self, "_rows", rows)
        object.__setattr__(self, "_b", tuple(float(x) for x in b))
        object.__setattr__(self, "_c", tuple(float(x) for x in c))
        object.__setattr__(self, "_zero_b", tuple(i for i, x in enumerate(b) if x == 0.0))

    @property
    def s(self) -> int:
        return len(self.b)

    def is_valid(self) -> bool:
        return not validate_tableau(self)


def validate_tableau(t: ButcherTableau) -> list[str]:
    """Check the tableau invariants.

    Returns an empty list when the tableau is a valid explicit scheme,
    otherwise one message per violated invariant.
    """
    problems = []
    s = len(t.b)
    if s < 1:
        return ["stage count must be positive"]
    if t.A.shape != (s, s):
        problems.append(f"A has shape {t.A.shape}, expected ({s}, {s})")
    if t.c.shape != (s,):
        problems.append(f"c has shape {t.c.shape}, expected ({s},)")
    if problems:
        return problems

    upper = np.triu(t.A)
    if np.any(upper != 0.0):
        i, j = np.argwhere(upper != 0.0)[0]
        problems.append(f"not explicit: a[{i + 1},{j + 1}] = {t.A[i, j]!r} on or above the diagonal")
    wsum = math.fsum(t.b)
    if abs(wsum - 1.0) > _TOL:
        problems.append(f"not consistent: weights sum to {wsum!r}")
    for i in range(s):
        rsum = math.fsum(t.A[i])
        if abs(t.c[i] - rsum) > _TOL:
            problems.append(f"row-sum condition fails at stage {i + 1}: c = {t.c[i]!r}, sum(a) = {rsum!r}")
    if np.any(t.c < 0.0) or np.any(t.c > 1.0):
        problems.append(f"nodes outside [0, 1]: c = {t.c.tolist()}")
    return problems


def _tableau(name, A, b, c) -> ButcherTableau:
    return ButcherTableau(np.array(A, float), np.array(b, float), np.array(c, float), name)


RK4 = _tableau(
    "rk4",
    [[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1, 0]],
    [1 / 6, 1 / 3, 1 / 3, 1 / 6],
    [0, 0.5, 0.5, 1],
)

RK38 = _tableau(
    "rk38",
    [[0, 0, 0, 0], [1 / 3, 0, 0, 0], [-1 / 3, 1, 0, 0], [1, -1, 1, 0]],
    [1 / 8, 3 / 8, 3 / 8, 1 / 8],
    [0, 1 / 3, 2 / 3, 1],
)

SSPRK3 = _tableau(
    "ssprk3",
    [[0, 0, 0], [1, 0, 0], [0.25, 0.25, 0]],
    [1 / 6, 1 / 6, 2 / 3],
    [0, 1, 0.5],
)

HEUN = _tableau("heun", [[0, 0], [1, 0]], [0.5, 0.5], [0, 1])

EULER = _tableau("euler", [[0]], [1], [0])

TABLEAUX = {t.name: t for t in (RK4, RK38, SSPRK3, HEUN, EULER)}


def get_tableau(name: str) -> ButcherTableau:
    try:
        return TABLEAUX[name.lower()]
    except KeyError:
        raise KeyError(f"unknown scheme {name!r}; known: {', '.join(TABLEAUX)}") from None


def rk_step_with_stages(
    t: ButcherTableau,
    f: RHS,
    t_cur: float,
    y: np.ndarray,
    h: float,
    stage_inputs: Sequence | None = None,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """:func:`rk_step` that also hands back the stage slopes ``k_1 .. k_s``."""
    k = []
    for i, (ci, row) in enumerate(zip(t._c, t._rows)):
        yi = y
        for j, a in row:
            yi = yi + (h * a) * k[j]
        ti = t_cur + ci * h
        k.append(np.asarray(f(ti, yi) if stage_inputs is None else f(ti, yi, stage_inputs[i]), dtype=float))
    y_new = y + (h * t._b[0]) * k[0]
    for bi, ki in zip(t._b[1:], k[1:]):
        y_new = y_new + (h * bi) * ki
    # a non-finite stage reaches y_new unless its weight is zero; those are checked directly
    if not np.isfinite(y_new).all() or any(not np.isfinite(k[i]).all() for i in t._zero_b):
        for i, ki in enumerate(k):
            if not np.isfinite(ki).all():
                raise IntegrationError("non-finite right-hand side value", stage=i + 1, t=t_cur + t._c[i] * h)
        raise IntegrationError("non-finite step result", t=t_cur)
    return y_new, k


def rk_step(
    t: ButcherTableau,
    f: RHS,
    t_cur: float,
    y: np.ndarray,
    h: float,
    stage_inputs: Sequence | None = None,
) -> np.ndarray:
    """Advance ``y`` by one explicit RK step of size ``h``.

    Parameters
    ----------
    t : ButcherTableau
        Explicit scheme.
    f : callable
        Right-hand side ``f(time, state)``. When ``stage_inputs`` is given it
        is called as ``f(time, state, stage_inputs[i])`` for stage ``i``; the
        multirate driver uses this to hand each stage its coupling waveform
        value.
    t_cur, y, h : float, ndarray, float
        Current time, state and step size.

    Returns
    -------
    ndarray
        The new state. ``f`` is called exactly ``t.s`` times.
    """
    return rk_step_with_stages(t, f, t_cur, y, h, stage_inputs)[0]


def iter_singlerate(
    t: ButcherTableau, f: RHS, t0: float, y0, h: float, steps: int
) -> Iterator[tuple[float, np.ndarray]]:
    """Yield ``(time, state)`` for ``steps`` fixed steps, starting with ``(t0, y0)``."""
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    y = np.asarray(y0, dtype=float)
    yield t0, y
    for j in range(1, steps + 1):
        # times from the grid index, never accumulated
        tc = t0 + (j - 1) * h
        try:
            y = rk_step(t, f, tc, y, h)
        except IntegrationError as err:
            raise err.with_context(step=j) from err
        yield t0 + j * h, y


def singlerate_integrate(
    t: ButcherTableau, f: RHS, t0: float, y0, h: float, steps: int
) -> list[tuple[float, np.ndarray]]:
    """Fixed-step integration; returns all ``steps + 1`` (time, state) pairs."""
    return list(iter_singlerate(t, f, t0, y0, h, steps))


def singlerate_final(t: ButcherTableau, f: RHS, t0: float, y0, h: float, steps: int):
    """Like :func:`singlerate_integrate` but keeps only the last (time, state)."""
    return deque(iter_singlerate(t, f, t0, y0, h, steps), maxlen=1)[0]
