import math

import numpy as np
import pytest
from scipy import stats

from strictweak.asymptotics import stationary_lln
from strictweak.stationary import (
    StationaryConfig,
    beta_gamma_fixed_point_test,
    beta_gamma_update,
    build_stationary_field,
    bulk_partition,
    decomposition_check,
    field_from_boundary,
    lln_tolerance,
    shift_invariance_test,
    stationary_free_energy,
)
from strictweak.specfun import GammaParams

CONFIG = StationaryConfig(0.8, GammaParams(1.2, 0.9))


def _enumerate_star(h, v, bulk, t, n):
    """Brute-force Z*(t, n) summed over all up-right/diagonal paths from (0, 1)."""
    if t == 0:
        return float(np.prod(v[: n - 1]))
    if n == 1:
        return float(np.prod(h[:t]))
    return bulk[t, n - 1] * _enumerate_star(h, v, bulk, t - 1, n) + _enumerate_star(h, v, bulk, t - 1, n - 1)


def test_field_matches_enumeration_and_ratios():
    rng = np.random.default_rng(0)
    t_max, n_max = 6, 5
    h, v = CONFIG.draw_boundary(rng, (t_max, n_max - 1))
    bulk = np.ones((t_max + 1, n_max))
    bulk[1:, 1:] = rng.gamma(1.2, 0.9, (t_max, n_max - 1))
    field = field_from_boundary(h, v, bulk)
    for t in range(t_max + 1):
        for n in range(1, n_max + 1):
            ref = _enumerate_star(h, v, bulk, t, n)
            assert abs(math.exp(field.log_z[t, n - 1]) - ref) <= 1e-12 * ref
    assert field.cell_residual() < 1e-12
    assert field.ratio_mismatch() < 1e-12


def test_batched_field_consistent():
    field = build_stationary_field(CONFIG, 5, 4, np.random.default_rng(1), samples=50)
    assert field.log_z.shape == (50, 6, 4)
    assert field.cell_residual() < 1e-12
    assert field.ratio_mismatch() < 1e-12
    with pytest.raises(ValueError):
        build_stationary_field(CONFIG, 0, 4, np.random.default_rng(1))


def test_beta_gamma_update_identities():
    rng = np.random.default_rng(2)
    u, v, y = rng.gamma(2.0, 1.0, (3, 100))
    u2, v2, y2 = beta_gamma_update(u, v, y)
    # cell closure and involution
    np.testing.assert_allclose(u * v2, v * u2, rtol=1e-13)
    back = beta_gamma_update(u2, v2, y2)
    for a, b in zip(back, (u, v, y)):
        np.testing.assert_allclose(a, b, rtol=1e-12)
    with pytest.raises(ValueError):
        beta_gamma_update(1.0, -1.0, 1.0)


def test_bulk_partition_small():
    bulk = np.array([[1.0, 1.0, 1.0], [1.0, 2.0, 3.0], [1.0, 5.0, 7.0]])
    assert bulk_partition(bulk, (0, 2), (0, 2)) == 1.0
    assert bulk_partition(bulk, (0, 2), (2, 2)) == 2.0 * 5.0
    assert bulk_partition(bulk, (0, 2), (2, 3)) == 7.0 + 2.0
    assert bulk_partition(bulk, (1, 2), (0, 2)) == 0.0


@pytest.mark.parametrize("t, n", [(0, 1), (4, 1), (0, 4), (3, 2), (5, 3), (6, 5), (4, 5)])
def test_decomposition(t, n):
    rng = np.random.default_rng(3)
    h, v = CONFIG.draw_boundary(rng, (6, 4))
    bulk = np.ones((7, 5))
    bulk[1:, 1:] = rng.gamma(1.2, 0.9, (6, 4))
    assert decomposition_check(h, v, bulk, t, n) < 1e-12


def test_shift_invariance_moderate():
    res = shift_invariance_test(CONFIG, (6, 5), [(0, 0), (2, 1), (4, 3)], 20_000, np.random.default_rng(4))
    assert res["all_pass"]
    assert len(res["rows"]) == 6
    assert all(j["z"] < 4 for j in res["joint"])
    with pytest.raises(ValueError):
        shift_invariance_test(CONFIG, (3, 3), [(5, 0)], 10, np.random.default_rng(0))


def test_interior_ks_has_power():
    rng = np.random.default_rng(5)
    field = build_stationary_field(CONFIG, 4, 4, rng, samples=20_000)
    h = field.horiz[:, 3, 2]
    bad_law = stats.gamma(0.8 + 2.4, scale=0.9)
    assert stats.kstest(h, bad_law.cdf).pvalue < 1e-6


def test_fixed_point():
    res = beta_gamma_fixed_point_test(CONFIG, 20_000, np.random.default_rng(6))
    assert res["all_pass"]
    assert abs(res["corr_uv"]) < res["corr_bound"]
    assert len(res["pvalues"]) == 9


def test_free_energy_routes_agree_and_lln():
    rng = np.random.default_rng(7)
    out = stationary_free_energy(CONFIG, 500, rng)
    assert abs(out["recursion"] - out["ratios"]) < 1e-10
    exact = stationary_lln(CONFIG.gamma_params, CONFIG.beta, 500, 500) / 500
    assert abs(out["recursion"] - exact) < lln_tolerance(CONFIG, 500)


def test_config_validation():
    with pytest.raises(ValueError):
        StationaryConfig(0.0, GammaParams(1.0, 1.0))
