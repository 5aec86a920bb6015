import math

import numpy as np
import pytest

from strictweak.moments import q_moment_contour
from strictweak.qtasep import (
    QTasepState,
    ScalingParams,
    _JumpLaw,
    eq_laplace_mc,
    fluctuation,
    gamma_limit_test,
    jump_pmf,
    q_moment_mc,
    simulate_positions,
    step,
)
from strictweak.specfun import QParams


def test_pmf_normalization_random_triples():
    rng = np.random.default_rng(0)
    for _ in range(200):
        q, alpha = rng.uniform(0.05, 0.95, 2)
        m = int(rng.integers(0, 40))
        qp = QParams(q, alpha)
        total = sum(jump_pmf(j, m, qp) for j in range(m + 1))
        assert abs(total - 1) < 1e-12


def test_pmf_infinite_gap_normalized():
    qp = QParams(0.8, 0.6)
    assert abs(sum(jump_pmf(j, math.inf, qp) for j in range(500)) - 1) < 1e-12
    # large finite gaps approach the infinite-gap law
    assert abs(jump_pmf(3, 5000, qp) - jump_pmf(3, math.inf, qp)) < 1e-12


def test_pmf_special_cases():
    qp = QParams(0.5, 0.3)
    assert jump_pmf(0, 0, qp) == 1.0
    assert jump_pmf(2, 1, qp) == 0.0
    assert jump_pmf(-1, 3, qp) == 0.0
    with pytest.raises(ValueError):
        jump_pmf(0, -2, qp)


def test_log_pmf_large_gap_finite():
    sp = ScalingParams(0.02, 1.0, 1.0)
    law = _JumpLaw(sp.qparams)
    m = np.array([10_000, 5_000, -1])
    j = np.array([50, 400, 30])
    vals = law.log_pmf(j, m)
    assert np.all(np.isfinite(vals))
    lp = law.log_pmf(np.arange(10_001), np.full(10_001, 10_000))
    assert not np.any(np.isnan(lp))
    assert abs(np.exp(lp).sum() - 1) < 1e-10


def test_ordering_preserved():
    qp = QParams(0.7, 0.4)
    hist = simulate_positions(qp, 25, 6, 300, seed=1)
    assert np.all(np.diff(hist, axis=2) < 0)
    assert np.all(np.diff(hist, axis=1) >= 0)
    np.testing.assert_array_equal(hist[:, 0], np.broadcast_to(-np.arange(1, 7), (300, 6)))


def test_single_particle_and_zero_gap():
    rng = np.random.default_rng(0)
    qp = QParams(0.6, 0.5)
    state = QTasepState.step_initial(1)
    for _ in range(10):
        state = step(state, qp, rng)
    assert state.time == 10 and state.positions[0] >= -1
    # particles with zero gap cannot move
    s = QTasepState(np.array([5, 4, 3]))
    np.testing.assert_array_equal(s.gaps, [-1, 0, 0])
    after = step(s, qp, rng)
    np.testing.assert_array_equal(after.positions[1:], [4, 3])
    with pytest.raises(ValueError):
        QTasepState(np.array([1, 1]))


def test_seed_determinism():
    qp = QParams(0.7, 0.4)
    a = simulate_positions(qp, 5, 3, 50, seed=3)
    b = simulate_positions(qp, 5, 3, 50, seed=3, threads=4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, simulate_positions(qp, 5, 3, 50, seed=4))


def test_fluctuation_at_time_zero():
    sp = ScalingParams(0.05, 1.0, 1.0)
    hist = simulate_positions(sp.qparams, 0, 3, 4, seed=0)
    for n in (1, 2, 3):
        np.testing.assert_allclose(fluctuation(hist, sp, 0, n), (1 - n) * math.log(20.0))


def test_eq_laplace_trivial_and_limit():
    qp = QParams(0.6, 0.5)
    assert eq_laplace_mc(qp, 3, 2, 0.0, 10, seed=0) == (1.0, 0.0)
    with pytest.raises(ValueError):
        eq_laplace_mc(qp, 3, 2, 0.5, 10, seed=0)
    # zeta q^(X+1) = -(1-q) u Z turns the q-exponential into exp(-u Z), Z ~ Gamma(k, theta)
    theta, m1, u = 1.0, 1.0, 0.7
    sp = ScalingParams(0.05, theta, m1)
    zeta = -(1 - sp.q) * u / sp.epsilon
    mean, se = eq_laplace_mc(sp.qparams, 1, 1, zeta, 20_000, seed=1)
    exact = (1 + theta * u) ** (-sp.k)
    assert abs(mean - exact) < 4 * se + 0.02


def test_q_moment_mc_matches_contour():
    qp = QParams(0.6, 0.5)
    for t, nvec in [(2, (1,)), (3, (2,)), (3, (2, 1))]:
        mean, se = q_moment_mc(qp, t, nvec, 40_000, seed=7)
        assert abs(mean - q_moment_contour(qp, t, nvec)) < 4 * se


def test_gamma_limit_small():
    stat, p = gamma_limit_test(1.0, 1.0, 0.1, 2000, seed=0)
    assert 0 <= stat <= 1 and 0 <= p <= 1


def test_scaling_params():
    sp = ScalingParams(0.1, 2.0, 1.0)
    assert sp.k == 0.5
    assert math.isclose(sp.q, math.exp(-0.2))
    with pytest.raises(ValueError):
        ScalingParams(0.0, 1.0, 1.0)
