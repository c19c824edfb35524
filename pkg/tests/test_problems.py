import math

import numpy as np
import pytest

from mrspline.partition import couple, split
from mrspline.problems import (
    MassSpringChain,
    build_chain_ivp,
    build_stiffness,
    eigenfrequencies,
    energy,
    exact_solution,
    from_blocks,
    modal_solution,
    to_blocks,
)


def test_stiffness_two_masses():
    c = MassSpringChain(2, 1.5, 3.0, 7.0, 2.0)
    A = build_stiffness(c).A
    assert np.allclose(A, [[-(7 + 2) / 1.5, 2 / 1.5], [2 / 3.0, -4 / 3.0]], rtol=0, atol=1e-15)


def test_stiffness_reference_entries(chain):
    s = build_stiffness(chain)
    assert s.A[0, 0] == -21 and s.A[0, 1] == 1 and s.A[1, 1] == pytest.approx(-0.1, abs=1e-16)
    assert np.count_nonzero(np.triu(s.A, 2)) == 0 and np.count_nonzero(np.tril(s.A, -2)) == 0
    assert np.max(np.abs(s.MA - s.MA.T)) <= 1e-14


def test_invalid_chain():
    with pytest.raises(ValueError):
        MassSpringChain(0)
    with pytest.raises(ValueError):
        MassSpringChain(3, m1=-1.0)
    with pytest.raises(ValueError):
        MassSpringChain(3, x0=[0.0, 1.0])
    with pytest.raises(ValueError):
        build_chain_ivp(MassSpringChain(1))


def test_rhs_matches_matrix_action(chain, chain_ivp):
    A = build_stiffness(chain).A
    f = couple(chain_ivp)
    rng = np.random.default_rng(11)
    for _ in range(50):
        x, v = rng.normal(size=10), rng.normal(size=10)
        ys, yf = to_blocks(x, v)
        ds, df = split(f(0.0, np.concatenate((ys, yf))), chain_ivp)
        xd, vd = from_blocks(ds, df)
        assert np.max(np.abs(xd - v)) <= 1e-15
        assert np.max(np.abs(vd - A @ x)) <= 1e-15


def test_block_helpers_round_trip():
    x, v = np.arange(5.0), -np.arange(5.0)
    xb, vb = from_blocks(*to_blocks(x, v))
    assert np.array_equal(xb, x) and np.array_equal(vb, v)


def test_exact_at_zero(chain):
    x, v = exact_solution(chain, 0.0)
    assert np.array_equal(x, chain.x0) and np.array_equal(v, chain.v0)
    x, v = modal_solution(chain)(0.0)
    assert np.allclose(x, chain.x0, atol=1e-15) and np.allclose(v, chain.v0, atol=1e-15)


def test_single_mass_closed_form():
    c = MassSpringChain(1, m1=1.0, k1=20.0, k2=1.0, x0=[0.3], v0=[-0.7])
    w = math.sqrt(21.0)
    assert eigenfrequencies(c)[0] == pytest.approx(w, rel=1e-14)
    for t in (0.1, 1.7, 12.5, 40.0):
        x, v = exact_solution(c, t)
        assert x[0] == pytest.approx(0.3 * math.cos(w * t) + (-0.7 / w) * math.sin(w * t), abs=1e-14)
        assert v[0] == pytest.approx(-0.3 * w * math.sin(w * t) - 0.7 * math.cos(w * t), abs=1e-13)


def test_energy_conserved(chain, chain_exact):
    e0 = energy(chain, chain.x0, chain.v0)
    for t in np.linspace(0, 40, 81):
        assert abs(energy(chain, *chain_exact(t)) - e0) <= 1e-10 * e0


def test_exact_solution_satisfies_ode(chain, chain_exact):
    A = build_stiffness(chain).A
    d = 1e-4
    for t in (0.5, 7.3, 22.0, 39.0):
        xm, _ = chain_exact(t - d)
        x0, v0 = chain_exact(t)
        xp, _ = chain_exact(t + d)
        fd = (xp - 2 * x0 + xm) / d**2
        acc = A @ x0
        assert np.max(np.abs(fd - acc)) <= 1e-6 * max(np.max(np.abs(acc)), 1e-3)
        assert np.max(np.abs((xp - xm) / (2 * d) - v0)) <= 1e-6


def test_frequency_separation(chain):
    w = np.sort(eigenfrequencies(chain))
    assert w[-1] > 4 * w[-2]
