"""Stationary polymer with Gamma/inverse-Gamma boundary weights.

Paths start at (0, 1).  Bottom-row edges ((i-1, 1), (i, 1)) carry
tau ~ Gamma(beta + k, theta); left-column edges ((0, j-1), (0, j)) carry tau
with 1/tau ~ Gamma(beta, theta).  In the bulk (t >= 1, n >= 2)

    Z*(t, n) = Y(t, n) Z*(t-1, n) + Z*(t-1, n-1),

where Y(t, n) ~ Gamma(k, theta) weighs the horizontal edge ending at (t, n).
Edge ratios tau = Z*(head)/Z*(tail) are stationary under lattice shifts.

Arrays use ``[..., t, n-1]`` indexing.  ``horiz[t, n-1]`` is the ratio on the
edge ending at (t, n) from the left (defined for t >= 1) and ``vert[t, n-1]``
the ratio on the edge ending at (t, n) from below (defined for n >= 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .specfun import GammaParams, polygamma

__all__ = [
    "StationaryConfig",
    "RatioField",
    "build_stationary_field",
    "field_from_boundary",
    "beta_gamma_update",
    "bulk_partition",
    "decomposition_check",
    "shift_invariance_test",
    "beta_gamma_fixed_point_test",
    "stationary_free_energy",
    "lln_tolerance",
]


@dataclass(frozen=True)
class StationaryConfig:
    beta: float
    gamma_params: GammaParams

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def horizontal_law(self):
        return stats.gamma(self.beta + self.gamma_params.shape, scale=self.gamma_params.scale)

    @property
    def inverse_vertical_law(self):
        return stats.gamma(self.beta, scale=self.gamma_params.scale)

    def draw_boundary(self, rng, size):
        """(horizontal taus, vertical taus) with the given shapes."""
        h_size, v_size = size
        theta = self.gamma_params.scale
        h = rng.gamma(self.beta + self.gamma_params.shape, theta, size=h_size)
        v = 1.0 / rng.gamma(self.beta, theta, size=v_size)
        return h, v


@dataclass
class RatioField:
    """Ratios and log Z* on {0..t_max} x {1..n_max}, with an optional batch axis."""

    horiz: np.ndarray
    vert: np.ndarray
    log_z: np.ndarray

    @property
    def t_max(self) -> int:
        return self.log_z.shape[-2] - 1

    @property
    def n_max(self) -> int:
        return self.log_z.shape[-1]

    def cell_residual(self) -> float:
        """Largest |log(tau_h tau_v') - log(tau_v tau_h')| over unit cells."""
        lh, lv = np.log(self.horiz), np.log(self.vert)
        # cell with lower-left corner (t, n): bottom, right, left, top edges
        bottom = lh[..., 1:, :-1]
        right = lv[..., 1:, 1:]
        left = lv[..., :-1, 1:]
        top = lh[..., 1:, 1:]
        return float(np.max(np.abs(bottom + right - left - top)))

    def ratio_mismatch(self) -> float:
        """Largest relative gap between the induced ratios and Z* quotients."""
        h = np.exp(self.log_z[..., 1:, :] - self.log_z[..., :-1, :])
        v = np.exp(self.log_z[..., :, 1:] - self.log_z[..., :, :-1])
        eh = np.abs(h / self.horiz[..., 1:, :] - 1.0)
        ev = np.abs(v / self.vert[..., :, 1:] - 1.0)
        return float(max(eh.max(), ev.max()))


def beta_gamma_update(u, v, y):
    """(U', V', Y') = (Y + 1/V, (YV + 1)/U, UVY/(YV + 1))."""
    u, v, y = (np.asarray(a, dtype=float) for a in (u, v, y))
    if np.any(u <= 0) or np.any(v <= 0) or np.any(y <= 0):
        raise ValueError("beta_gamma_update needs positive inputs")
    yv1 = y * v + 1.0
    return y + 1.0 / v, yv1 / u, u * v * y / yv1


def field_from_boundary(h_boundary, v_boundary, bulk) -> RatioField:
    """Ratios by induction and log Z* by the recursion, from frozen weights.

    ``h_boundary[..., i-1]`` is tau on ((i-1, 1), (i, 1)) for i = 1..t_max,
    ``v_boundary[..., j-2]`` is tau on ((0, j-1), (0, j)) for j = 2..n_max and
    ``bulk[..., t, n-1]`` is Y(t, n); only entries with t >= 1, n >= 2 are used.
    """
    h_boundary = np.asarray(h_boundary, dtype=float)
    v_boundary = np.asarray(v_boundary, dtype=float)
    bulk = np.asarray(bulk, dtype=float)
    t_max = h_boundary.shape[-1]
    n_max = v_boundary.shape[-1] + 1
    batch = bulk.shape[:-2]
    shape = batch + (t_max + 1, n_max)
    horiz = np.full(shape, np.nan)
    vert = np.full(shape, np.nan)
    log_z = np.empty(shape)

    horiz[..., 1:, 0] = h_boundary
    vert[..., 0, 1:] = v_boundary
    log_z[..., 0, 0] = 0.0
    log_z[..., 1:, 0] = np.cumsum(np.log(h_boundary), axis=-1)
    log_z[..., 0, 1:] = np.cumsum(np.log(v_boundary), axis=-1)
    log_y = np.log(bulk)
    for t in range(1, t_max + 1):
        y = bulk[..., t, 1:]
        horiz[..., t, 1:] = y + 1.0 / vert[..., t - 1, 1:]
        # U is the horizontal ratio just below in the current column
        vert[..., t, 1:] = (y * vert[..., t - 1, 1:] + 1.0) / horiz[..., t, :-1]
        log_z[..., t, 1:] = np.logaddexp(
            log_y[..., t, 1:] + log_z[..., t - 1, 1:], log_z[..., t - 1, :-1]
        )
    return RatioField(horiz, vert, log_z)


def build_stationary_field(
    config: StationaryConfig, t_max: int, n_max: int, rng: np.random.Generator, samples: int | None = None
) -> RatioField:
    """Sample boundary and bulk weights and build the field.

    With ``samples`` set, returns a batch with a leading axis of that length.
    """
    if t_max < 1 or n_max < 2:
        raise ValueError("window must be at least 2 x 2")
    batch = () if samples is None else (int(samples),)
    h, v = config.draw_boundary(rng, (batch + (t_max,), batch + (n_max - 1,)))
    gp = config.gamma_params
    bulk = np.ones(batch + (t_max + 1, n_max))
    bulk[..., 1:, 1:] = rng.gamma(gp.shape, gp.scale, size=batch + (t_max, n_max - 1))
    return field_from_boundary(h, v, bulk)


def bulk_partition(bulk: np.ndarray, start: tuple[int, int], target: tuple[int, int]) -> float:
    """Z_start(target): bulk polymer from ``start`` with the same Y weights.

    A horizontal step into (s, m) carries Y(s, m); diagonal steps carry 1.
    """
    t0, n0 = start
    t1, n1 = target
    if t1 < t0 or n1 < n0 or n1 - n0 > t1 - t0:
        return 0.0
    z = np.zeros(n1 - n0 + 1)
    z[0] = 1.0
    for s in range(t0 + 1, t1 + 1):
        new = bulk[s, n0 - 1 : n1] * z
        new[1:] += z[:-1]
        z = new
    return float(z[-1])


def decomposition_check(h_boundary, v_boundary, bulk, t: int, n: int) -> float:
    """Relative residual of the boundary-exit decomposition of Z*(t, n).

    Every path's last boundary vertex is either (k-1, 1), left by a diagonal
    step into (k, 2) for k = 1..t-n+2, or (0, l) for l = 2..n, left into the
    bulk.  Targets on the boundary are pure boundary products.
    """
    field = field_from_boundary(h_boundary, v_boundary, bulk)
    lhs = math.exp(field.log_z[t, n - 1])
    z_h = np.exp(field.log_z[:, 0])
    z_v = np.exp(field.log_z[0, :])
    if n == 1 or t == 0:
        rhs = z_h[t] if n == 1 else z_v[n - 1]
        return abs(lhs - rhs) / lhs
    rhs = 0.0
    for k in range(1, t - n + 3):
        rhs += z_h[k - 1] * bulk_partition(bulk, (k, 2), (t, n))
    for ell in range(2, n + 1):
        rhs += z_v[ell - 1] * bulk_partition(bulk, (0, ell), (t, n))
    return abs(lhs - rhs) / lhs


@dataclass(frozen=True)
class KSRow:
    label: str
    shift: tuple
    orientation: str
    statistic: float
    pvalue: float
    two_sample_distance: float


def shift_invariance_test(
    config: StationaryConfig,
    window: tuple[int, int],
    shifts,
    samples: int,
    rng: np.random.Generator,
) -> dict:
    """KS table for edge marginals at shifted positions.

    For each shift a, the horizontal ratio on the edge ending at (1, 1) + a is
    tested against Gamma(beta + k, theta), and the reciprocal vertical ratio on
    the edge ending at (0, 2) + a against Gamma(beta, theta).  Each is also
    compared with its unshifted counterpart by a two-sample KS distance.  As a
    pairwise joint check, the correlation of log tau_h and log tau_v at the
    corner (1, 2) + a is compared with the same correlation at a = 0 by
    Fisher's z.
    """
    t_max, n_max = window
    field = build_stationary_field(config, t_max, n_max, rng, samples=samples)
    h_law, v_law = config.horizontal_law, config.inverse_vertical_law
    base_h = field.horiz[:, 1, 0]
    base_v = 1.0 / field.vert[:, 0, 1]
    base_corr = _corner_corr(field, 1, 2)
    rows, joints = [], []
    for a in shifts:
        a1, a2 = a
        if 1 + a1 > t_max or 2 + a2 > n_max:
            raise ValueError(f"shift {a} leaves the {window} window")
        h = field.horiz[:, 1 + a1, a2]
        v = 1.0 / field.vert[:, a1, 1 + a2]
        for orient, x, base, law in (("horizontal", h, base_h, h_law), ("vertical", v, base_v, v_law)):
            res = stats.kstest(x, law.cdf)
            d2 = 0.0 if a == (0, 0) else float(stats.ks_2samp(x, base).statistic)
            rows.append(KSRow(f"{orient}@{a}", tuple(a), orient, float(res.statistic), float(res.pvalue), d2))
        if 2 + a2 <= n_max and 1 + a1 <= t_max:
            r = _corner_corr(field, 1 + a1, 2 + a2)
            z = abs(math.atanh(r) - math.atanh(base_corr)) / math.sqrt(2.0 / (samples - 3))
            joints.append({"shift": tuple(a), "corr": r, "z": z})
    m = len(rows)
    corrected = [min(1.0, m * r.pvalue) for r in rows]
    return {
        "rows": rows,
        "bonferroni_p": corrected,
        "all_pass": all(p > 1e-3 for p in corrected),
        "base_corr": base_corr,
        "joint": joints,
    }


def _corner_corr(field: RatioField, t: int, n: int) -> float:
    """corr(log tau on the edge into (t, n) from the left, log tau from below)."""
    return float(np.corrcoef(np.log(field.horiz[:, t, n - 1]), np.log(field.vert[:, t, n - 1]))[0, 1])


def beta_gamma_fixed_point_test(
    config: StationaryConfig, samples: int, rng: np.random.Generator, iterations: int = 3
) -> dict:
    """Iterate the beta-gamma map and KS-test U, 1/V and Y after each pass.

    The map is an involution, so each pass feeds (U', V') forward with a
    fresh Y.  Also reports corr(U', V') after the first pass as an
    independence check.
    """
    gp = config.gamma_params
    u = rng.gamma(config.beta + gp.shape, gp.scale, samples)
    v = 1.0 / rng.gamma(config.beta, gp.scale, samples)
    y = rng.gamma(gp.shape, gp.scale, samples)
    laws = {
        "U": config.horizontal_law,
        "1/V": config.inverse_vertical_law,
        "Y": stats.gamma(gp.shape, scale=gp.scale),
    }
    pvals, corr = [], None
    for it in range(iterations):
        if it:
            y = rng.gamma(gp.shape, gp.scale, samples)
        u, v, y = beta_gamma_update(u, v, y)
        if it == 0:
            corr = float(np.corrcoef(u, v)[0, 1])
        for name, x in (("U", u), ("1/V", 1.0 / v), ("Y", y)):
            pvals.append((it + 1, name, float(stats.kstest(x, laws[name].cdf).pvalue)))
    m = len(pvals)
    return {
        "pvalues": pvals,
        "all_pass": all(min(1.0, m * p) > 1e-3 for _, _, p in pvals),
        "corr_uv": corr,
        "corr_bound": 4.0 / math.sqrt(samples),
    }


def stationary_free_energy(config: StationaryConfig, size: int, rng: np.random.Generator) -> dict:
    """log Z*(N, N) / N for one trajectory, by two routes.

    ``recursion`` runs the log-space recursion column by column; ``ratios``
    sums log tau along the bottom row and then up column N, with the ratios
    produced by the induction.  Both use the same weights.
    """
    n_max = size
    gp = config.gamma_params
    h_b, v_b = config.draw_boundary(rng, (size, n_max - 1))
    log_z = np.concatenate(([0.0], np.cumsum(np.log(v_b))))
    vert = np.concatenate(([np.nan], v_b))
    for t in range(1, size + 1):
        y = rng.gamma(gp.shape, gp.scale, n_max - 1)
        new = np.empty(n_max)
        new[0] = log_z[0] + math.log(h_b[t - 1])
        new[1:] = np.logaddexp(np.log(y) + log_z[1:], log_z[:-1])
        log_z = new
        horiz = np.empty(n_max)
        horiz[0] = h_b[t - 1]
        horiz[1:] = y + 1.0 / vert[1:]
        new_vert = np.empty(n_max)
        new_vert[0] = np.nan
        new_vert[1:] = (y * vert[1:] + 1.0) / horiz[:-1]
        vert = new_vert
    via_ratios = float(np.sum(np.log(h_b)) + np.sum(np.log(vert[1:])))
    return {"recursion": float(log_z[-1]) / size, "ratios": via_ratios / size}


def lln_tolerance(config: StationaryConfig, size: int) -> float:
    """5/sqrt(N) times the summed standard deviations of the two log-ratio sums."""
    k = config.gamma_params.shape
    sd = math.sqrt(polygamma(1, config.beta + k)) + math.sqrt(polygamma(1, config.beta))
    return 5.0 * sd / math.sqrt(size)
