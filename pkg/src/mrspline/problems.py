"""Linear mass-spring chain between two walls, and its exact solution.

Mass 1 (light, on the stiff spring k1) forms the fast block, masses 2..n
the slow block. Within each block positions come first, then velocities::

    slow = [x_2 .. x_n, v_2 .. v_n]     fast = [x_1, v_1]
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .partition import PartitionedIVP


@dataclass(frozen=True, eq=False)
class MassSpringChain:
    n: int = 10
    m1: float = 1.0
    m2: float = 20.0
    k1: float = 20.0
    k2: float = 1.0
    x0: np.ndarray = field(default=None)
    v0: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need at least one mass, got n={self.n}")
        if min(self.m1, self.m2, self.k1, self.k2) <= 0:
            raise ValueError("masses and spring constants must be positive")
        x0 = np.zeros(self.n) if self.x0 is None else np.asarray(self.x0, dtype=float)
        v0 = np.zeros(self.n) if self.v0 is None else np.asarray(self.v0, dtype=float)
        if x0.shape != (self.n,) or v0.shape != (self.n,):
            raise ValueError(f"initial positions/velocities must have length {self.n}")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "v0", v0)

    @classmethod
    def reference(cls, n: int = 10, x1: float = -0.005, xi: float = 0.1, **params) -> "MassSpringChain":
        """Benchmark setup: light mass displaced to ``x1``, the rest to ``xi``, all at rest."""
        x0 = np.full(n, xi)
        x0[0] = x1
        return cls(n=n, x0=x0, v0=np.zeros(n), **params)

    @property
    def masses(self) -> np.ndarray:
        m = np.full(self.n, self.m2)
        m[0] = self.m1
        return m


@dataclass(frozen=True, eq=False)
class StiffnessSystem:
    """``A`` with xddot = A x, and the mass vector."""

    A: np.ndarray
    masses: np.ndarray

    @property
    def MA(self) -> np.ndarray:
        return self.masses[:, None] * self.A


def build_stiffness(c: MassSpringChain) -> StiffnessSystem:
    n = c.n
    K = np.zeros((n, n))  # MA, i.e. minus the stiffness matrix
    K[0, 0] = -(c.k1 + c.k2)
    for i in range(1, n):
        K[i, i] = -2 * c.k2
        K[i, i - 1] = K[i - 1, i] = c.k2
    masses = c.masses
    return StiffnessSystem(K / masses[:, None], masses)


def build_chain_ivp(c: MassSpringChain, t0: float = 0.0, t_end: float = 40.0) -> PartitionedIVP:
    if c.n < 2:
        raise ValueError("the slow block needs at least two masses (n >= 2)")
    n, m1, m2, k1, k2 = c.n, c.m1, c.m2, c.k1, c.k2
    ns = n - 1

    def f_slow(t, ys, yf):
        x = ys[:ns]
        left = np.empty(ns)
        left[0] = yf[0]
        left[1:] = x[:-1]
        right = np.zeros(ns)
        right[:-1] = x[1:]
        acc = (k2 * left - 2 * k2 * x + k2 * right) / m2
        return np.concatenate((ys[ns:], acc))

    def f_fast(t, ys, yf):
        x1, v1 = yf
        return np.array([v1, (-(k1 + k2) * x1 + k2 * ys[0]) / m1])

    y0_slow = np.concatenate((c.x0[1:], c.v0[1:]))
    y0_fast = np.array([c.x0[0], c.v0[0]])
    return PartitionedIVP(
        f_slow, f_fast, y0_slow, y0_fast, t0, t_end,
        weight_slow=n - 1, weight_fast=1, name=f"{n}-mass chain",
    )


def to_blocks(x, v) -> tuple[np.ndarray, np.ndarray]:
    """Chain positions/velocities -> (slow, fast) block vectors."""
    x, v = np.asarray(x), np.asarray(v)
    return np.concatenate((x[1:], v[1:])), np.array([x[0], v[0]])


def from_blocks(y_slow, y_fast) -> tuple[np.ndarray, np.ndarray]:
    ns = len(y_slow) // 2
    x = np.concatenate(([y_fast[0]], y_slow[:ns]))
    v = np.concatenate(([y_fast[1]], y_slow[ns:]))
    return x, v


@dataclass(frozen=True, eq=False)
class ModalSolution:
    """Exact solution x(t) = D^-1 U (alpha cos wt + beta sin wt), D = diag(sqrt(m))."""

    omega: np.ndarray
    modes: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    sqrt_m: np.ndarray

    def __call__(self, t) -> tuple[np.ndarray, np.ndarray]:
        wt = self.omega * t
        cs, sn = np.cos(wt), np.sin(wt)
        q = self.alpha * cs + self.beta * sn
        qd = self.omega * (self.beta * cs - self.alpha * sn)
        return self.modes @ q / self.sqrt_m, self.modes @ qd / self.sqrt_m


def modal_solution(c: MassSpringChain) -> ModalSolution:
    """Diagonalise the chain once; the result evaluates the exact solution at any t."""
    sys_ = build_stiffness(c)
    d = np.sqrt(sys_.masses)
    # -D A D^-1 is symmetric positive definite and tridiagonal
    B = -(d[:, None] * sys_.A / d[None, :])
    diag = np.diag(B).copy()
    off = np.diag(B, 1).copy()
    try:
        w2, U = eigh_tridiagonal(diag, off)
    except np.linalg.LinAlgError as err:
        raise ArithmeticError(f"eigensolver failed for the chain: {err}") from err
    if np.any(w2 <= 0):
        raise ArithmeticError("chain spectrum is not positive; ill-conditioned parameters")
    omega = np.sqrt(w2)
    alpha = U.T @ (d * c.x0)
    beta = (U.T @ (d * c.v0)) / omega
    return ModalSolution(omega, U, alpha, beta, d)


def exact_solution(c: MassSpringChain, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Positions and velocities at time ``t`` (starting from t = 0)."""
    if t == 0:
        return c.x0.copy(), c.v0.copy()
    return modal_solution(c)(t)


def eigenfrequencies(c: MassSpringChain) -> np.ndarray:
    return modal_solution(c).omega


def energy(c: MassSpringChain, x, v) -> float:
    """Kinetic plus spring potential energy."""
    x, v = np.asarray(x), np.asarray(v)
    stiffness = -build_stiffness(c).MA
    return 0.5 * float(v @ (c.masses * v)) + 0.5 * float(x @ stiffness @ x)
