"""Component-wise partitioned initial value problems (slow block, fast block)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

BlockRHS = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class PartitionedIVP:
    """ydot_slow = f_slow(t, y_slow, y_fast), ydot_fast = f_fast(t, y_slow, y_fast).

    ``weight_slow`` / ``weight_fast`` say how many scalar function
    evaluations one call of the block right-hand side stands for; they
    default to the block dimensions.
    """

    f_slow: BlockRHS
    f_fast: BlockRHS
    y0_slow: np.ndarray
    y0_fast: np.ndarray
    t0: float
    t_end: float
    weight_slow: int | None = None
    weight_fast: int | None = None
    name: str = ""

    def __post_init__(self):
        ys = np.atleast_1d(np.asarray(self.y0_slow, dtype=float))
        yf = np.atleast_1d(np.asarray(self.y0_fast, dtype=float))
        object.__setattr__(self, "y0_slow", ys)
        object.__setattr__(self, "y0_fast", yf)
        if ys.ndim != 1 or yf.ndim != 1 or len(ys) < 1 or len(yf) < 1:
            raise ValueError("both blocks need at least one component")
        if not self.t_end > self.t0:
            raise ValueError(f"need t_end > t0, got [{self.t0}, {self.t_end}]")
        if self.weight_slow is None:
            object.__setattr__(self, "weight_slow", len(ys))
        if self.weight_fast is None:
            object.__setattr__(self, "weight_fast", len(yf))
        if self.weight_slow < 1 or self.weight_fast < 1:
            raise ValueError("scalar weights must be >= 1")

    @property
    def d_slow(self) -> int:
        return len(self.y0_slow)

    @property
    def d_fast(self) -> int:
        return len(self.y0_fast)

    @property
    def y0(self) -> np.ndarray:
        return concat(self.y0_slow, self.y0_fast)

    def check_dimensions(self) -> None:
        """Call both right-hand sides once at the initial state and check shapes."""
        gs = np.asarray(self.f_slow(self.t0, self.y0_slow, self.y0_fast))
        gf = np.asarray(self.f_fast(self.t0, self.y0_slow, self.y0_fast))
        if gs.shape != (self.d_slow,):
            raise ValueError(f"f_slow returned shape {gs.shape}, expected ({self.d_slow},)")
        if gf.shape != (self.d_fast,):
            raise ValueError(f"f_fast returned shape {gf.shape}, expected ({self.d_fast},)")


@dataclass
class EvalCounter:
    """Right-hand side call tally, with its scalar-evaluation equivalent."""

    weight_slow: int = 1
    weight_fast: int = 1
    slow_calls: int = 0
    fast_calls: int = 0

    @classmethod
    def for_problem(cls, ivp: PartitionedIVP) -> "EvalCounter":
        return cls(ivp.weight_slow, ivp.weight_fast)

    @property
    def scalar_total(self) -> int:
        return self.slow_calls * self.weight_slow + self.fast_calls * self.weight_fast

    def snapshot(self) -> tuple[int, int]:
        return self.slow_calls, self.fast_calls


class CountedRHS:
    """Block right-hand sides that tally every call on ``counter``."""

    __slots__ = ("slow", "fast")

    def __init__(self, ivp: PartitionedIVP, counter: EvalCounter | None = None):
        f_slow, f_fast = ivp.f_slow, ivp.f_fast
        if counter is None:
            self.slow, self.fast = f_slow, f_fast
            return

        def slow(t, ys, yf):
            counter.slow_calls += 1
            return f_slow(t, ys, yf)

        def fast(t, ys, yf):
            counter.fast_calls += 1
            return f_fast(t, ys, yf)

        self.slow, self.fast = slow, fast


def concat(y_slow, y_fast) -> np.ndarray:
    return np.concatenate((y_slow, y_fast))


def split(y, ivp: PartitionedIVP) -> tuple[np.ndarray, np.ndarray]:
    """Slow block first, fast block last."""
    y = np.asarray(y, dtype=float)
    if y.shape != (ivp.d_slow + ivp.d_fast,):
        raise ValueError(f"state has shape {y.shape}, expected ({ivp.d_slow + ivp.d_fast},)")
    return y[: ivp.d_slow], y[ivp.d_slow :]


def couple(ivp: PartitionedIVP, counter: EvalCounter | None = None):
    """Monolithic right-hand side ``f(t, y)`` over the concatenated state."""
    rhs = CountedRHS(ivp, counter)

    def f(t, y):
        ys, yf = split(y, ivp)
        return np.concatenate((rhs.slow(t, ys, yf), rhs.fast(t, ys, yf)))

    return f
