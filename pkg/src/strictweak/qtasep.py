"""Discrete-time geometric q-TASEP with parallel update.

Particles X_1 > X_2 > ... > X_N start from the step configuration X_n(0) = -n.
At each time step every particle n jumps j_n ~ p_alpha(. | gap_n) with
gap_n = X_{n-1} - X_n - 1 read from the current configuration (gap_1 = inf):

    p_alpha(j | m)   = alpha^j (alpha;q)_{m-j} (q;q)_m / ((q;q)_{m-j} (q;q)_j),
    p_alpha(j | inf) = alpha^j (alpha;q)_inf / (q;q)_j.

Under q = exp(-eps theta), alpha = exp(-eps m1) the rescaled positions
F^eps(t, n) = (t - n + 1) log(1/eps) - eps theta (X_n(t) + n) approach
log Z(t, n) of the polymer with Gamma(m1/theta, theta) weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .polymer import sample_log_partition
from .specfun import GammaParams, QParams, log_q_pochhammer_inf, log_q_pochhammer_table
from .streams import map_blocks

__all__ = [
    "ScalingParams",
    "QTasepState",
    "jump_pmf",
    "step",
    "simulate_positions",
    "fluctuation",
    "eq_laplace_mc",
    "q_moment_mc",
    "convergence_experiment",
    "gamma_limit_test",
    "TRAJECTORY_CSV_HEADER",
]

TRAJECTORY_CSV_HEADER = ("replica", "t", "n", "X")

_TAIL = 1e-15
_LOST_MASS_TOL = 1e-12
_CHUNK_CELLS = 2048 * 2048


@dataclass(frozen=True)
class ScalingParams:
    """eps -> 0 scaling with q = exp(-eps theta) and alpha = exp(-eps m1)."""

    epsilon: float
    theta: float
    m1: float

    def __post_init__(self):
        for name in ("epsilon", "theta", "m1"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def q(self) -> float:
        return math.exp(-self.theta * self.epsilon)

    @property
    def alpha(self) -> float:
        return math.exp(-self.m1 * self.epsilon)

    @property
    def k(self) -> float:
        return self.m1 / self.theta

    @property
    def qparams(self) -> QParams:
        return QParams(self.q, self.alpha)

    @property
    def gamma_params(self) -> GammaParams:
        return GammaParams(self.k, self.theta)


@dataclass
class QTasepState:
    positions: np.ndarray
    time: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.int64)
        if np.any(np.diff(self.positions) >= 0):
            raise ValueError("positions must be strictly decreasing")

    @classmethod
    def step_initial(cls, particles: int) -> "QTasepState":
        return cls(-np.arange(1, particles + 1, dtype=np.int64), 0)

    @property
    def gaps(self) -> np.ndarray:
        """gap_n = X_{n-1} - X_n - 1, with -1 standing for gap_1 = inf."""
        g = np.empty_like(self.positions)
        g[0] = -1
        g[1:] = self.positions[:-1] - self.positions[1:] - 1
        return g


class _JumpLaw:
    """Log-space tables for p_alpha(. | m), shared across replicas and steps."""

    def __init__(self, qp: QParams):
        self.qp = qp
        self.log_alpha = math.log(qp.alpha)
        self.log_alpha_inf = log_q_pochhammer_inf(qp.alpha, qp.q)
        self.cap = self._infinite_support()
        self._grow(self.cap)

    def _grow(self, m_max: int):
        self.m_max = m_max
        self.lq = log_q_pochhammer_table(self.qp.q, self.qp.q, m_max)
        self.la = log_q_pochhammer_table(self.qp.alpha, self.qp.q, m_max)

    def _infinite_support(self) -> int:
        size = 1024
        while True:
            j = np.arange(size)
            lq = log_q_pochhammer_table(self.qp.q, self.qp.q, size - 1)
            p = np.exp(j * self.log_alpha + self.log_alpha_inf - lq)
            tail = np.cumsum(p[::-1])[::-1]
            ok = np.nonzero(tail < _TAIL)[0]
            if ok.size and p[-1] < 1e-30:
                return int(ok[0])
            size *= 2

    def log_pmf(self, j, m):
        """log p(j | m); ``m < 0`` encodes m = inf; j > m gives -inf."""
        j = np.asarray(j, dtype=np.int64)
        m = np.asarray(m, dtype=np.int64)
        need = int(max(np.max(m, initial=0), np.max(j, initial=0)))
        if need > self.m_max:
            self._grow(max(need, 2 * self.m_max))
        jj = np.clip(j, 0, self.m_max)
        inf_case = j * self.log_alpha + self.log_alpha_inf - self.lq[jj]
        mm = np.clip(m, 0, self.m_max)
        diff = np.clip(mm - jj, 0, self.m_max)
        fin_case = j * self.log_alpha + self.la[diff] + self.lq[mm] - self.lq[diff] - self.lq[jj]
        out = np.where(m < 0, inf_case, fin_case)
        return np.where((j < 0) | ((m >= 0) & (j > m)), -np.inf, out)

    def sample(self, m: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
        """Inverse-CDF draws for a vector of gaps (negative = inf)."""
        m = np.asarray(m, dtype=np.int64)
        out = np.zeros(m.shape, dtype=np.int64)
        movable = m != 0
        if not np.any(movable):
            return out
        idx = np.nonzero(movable)[0]
        width = int(min(self.cap, np.max(np.where(m[idx] < 0, self.cap, m[idx])))) + 1
        rows = max(1, _CHUNK_CELLS // width)
        j = np.arange(width)
        for start in range(0, idx.size, rows):
            sel = idx[start : start + rows]
            logp = self.log_pmf(j[None, :], m[sel, None])
            cdf = np.cumsum(np.exp(logp), axis=1)
            lost = 1.0 - cdf[:, -1]
            if np.any(lost > _LOST_MASS_TOL):
                raise ArithmeticError(f"jump law truncation lost mass {lost.max():.2e}")
            draw = np.sum(cdf < uniforms[sel, None], axis=1)
            limit = np.where(m[sel] < 0, width - 1, np.minimum(m[sel], width - 1))
            out[sel] = np.minimum(draw, limit)
        return out


def jump_pmf(j: int, m, qp: QParams) -> float:
    """p_alpha(j | m) for integer ``m >= 0`` or ``m = math.inf``."""
    if j < 0:
        return 0.0
    if m != math.inf:
        m = int(m)
        if m < 0:
            raise ValueError("gap must be non-negative")
        if j > m:
            return 0.0
    lq = log_q_pochhammer_table(qp.q, qp.q, max(j, 0 if m == math.inf else m))
    if m == math.inf:
        return math.exp(j * math.log(qp.alpha) + log_q_pochhammer_inf(qp.alpha, qp.q) - lq[j])
    la = log_q_pochhammer_table(qp.alpha, qp.q, m)
    return math.exp(j * math.log(qp.alpha) + la[m - j] + lq[m] - lq[m - j] - lq[j])


def step(state: QTasepState, qp: QParams, rng: np.random.Generator, law: _JumpLaw | None = None) -> QTasepState:
    """One parallel update: every particle jumps using the time-t gaps."""
    law = law or _JumpLaw(qp)
    jumps = law.sample(state.gaps, rng.random(state.positions.size))
    new = QTasepState(state.positions + jumps, state.time + 1)
    return new


def _history_block(law: _JumpLaw, t_max: int, particles: int, size: int, rng) -> np.ndarray:
    x = np.broadcast_to(-np.arange(1, particles + 1, dtype=np.int64), (size, particles)).copy()
    hist = np.empty((size, t_max + 1, particles), dtype=np.int64)
    hist[:, 0] = x
    for s in range(t_max):
        gaps = np.empty_like(x)
        gaps[:, 0] = -1
        gaps[:, 1:] = x[:, :-1] - x[:, 1:] - 1
        u = rng.random((size, particles))
        x = x + law.sample(gaps.ravel(), u.ravel()).reshape(size, particles)
        hist[:, s + 1] = x
    return hist


def simulate_positions(
    qp: QParams, t_max: int, particles: int, replicas: int, seed: int, threads: int = 1, tag: int = 3
) -> np.ndarray:
    """Trajectories X_n(s) for s <= t_max; shape (replicas, t_max + 1, particles)."""
    if t_max < 0 or particles < 1 or replicas < 1:
        raise ValueError("need t_max >= 0, particles >= 1, replicas >= 1")
    law = _JumpLaw(qp)
    return map_blocks(
        lambda size, rng: _history_block(law, t_max, particles, size, rng),
        replicas,
        seed,
        tag=tag,
        threads=1,  # the shared jump table grows lazily and is not thread safe
    )


def fluctuation(history: np.ndarray, sp: ScalingParams, t: int, n: int) -> np.ndarray:
    """F^eps(t, n) = (t - n + 1) log(1/eps) - eps theta (X_n(t) + n)."""
    x = np.asarray(history)[..., t, n - 1]
    return (t - n + 1) * math.log(1.0 / sp.epsilon) - sp.epsilon * sp.theta * (x + n)


def eq_laplace_mc(
    qp: QParams, t: int, n: int, zeta: float, replicas: int, seed: int, threads: int = 1
) -> tuple[float, float]:
    """Mean and standard error of 1/((zeta q^(X_n(t)+n); q)_inf)."""
    if zeta > 0:
        raise ValueError("zeta must be <= 0")
    hist = simulate_positions(qp, t, n, replicas, seed, threads, tag=4)
    shifted = hist[:, t, n - 1] + n
    if zeta == 0:
        return 1.0, 0.0
    values, inverse = np.unique(shifted, return_inverse=True)
    obs = np.array([math.exp(-log_q_pochhammer_inf(zeta * qp.q ** int(v), qp.q)) for v in values])
    x = obs[inverse]
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def q_moment_mc(
    qp: QParams, t: int, nvec, replicas: int, seed: int, threads: int = 1
) -> tuple[float, float]:
    """Mean and standard error of prod_i q^(X_{n_i}(t) + n_i)."""
    nvec = tuple(int(n) for n in nvec)
    hist = simulate_positions(qp, t, max(nvec), replicas, seed, threads, tag=5)
    expo = sum(hist[:, t, n - 1] + n for n in nvec)
    x = qp.q ** expo.astype(float)
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


def convergence_experiment(
    theta: float,
    m1: float,
    epsilons=(0.1, 0.05, 0.02),
    points=((1, 1), (2, 2), (3, 2)),
    replicas: int = 100_000,
    seed: int = 0,
    threads: int = 1,
) -> dict:
    """Two-sample KS distances between exp(F^eps(t, n)) and Z(t, n).

    Returns {(t, n): [ks for each eps]} together with the polymer samples'
    seed tag; comparing log values is equivalent since KS is invariant under
    monotone maps.
    """
    params = GammaParams(m1 / theta, theta)
    t_max = max(t for t, _ in points)
    n_max = max(n for _, n in points)
    poly = sample_log_partition(params, t_max, n_max, replicas, seed, threads=threads, tag=6)
    # the polymer column only gives Z(t_max, .); earlier times need their own draws
    columns = {t_max: poly}
    for t in {t for t, _ in points} - {t_max}:
        columns[t] = sample_log_partition(params, t, n_max, replicas, seed, threads=threads, tag=6 + 10 * t)
    table = {}
    for eps in epsilons:
        sp = ScalingParams(eps, theta, m1)
        hist = simulate_positions(sp.qparams, t_max, n_max, replicas, seed, threads, tag=7)
        for t, n in points:
            f = fluctuation(hist, sp, t, n)
            ks = stats.ks_2samp(f, columns[t][:, n - 1]).statistic
            table.setdefault((t, n), []).append(float(ks))
    return table


def gamma_limit_test(
    theta: float, m1: float, epsilon: float, replicas: int, seed: int, threads: int = 1
) -> tuple[float, float]:
    """One-sample KS of exp(F^eps(1, 1)) against Gamma(m1/theta, theta).

    Returns (statistic, p-value).
    """
    sp = ScalingParams(epsilon, theta, m1)
    hist = simulate_positions(sp.qparams, 1, 1, replicas, seed, threads, tag=8)
    sample = np.exp(fluctuation(hist, sp, 1, 1))
    res = stats.kstest(sample, stats.gamma(sp.k, scale=theta).cdf)
    return float(res.statistic), float(res.pvalue)
