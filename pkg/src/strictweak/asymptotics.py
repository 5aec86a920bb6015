"""Critical point, free energy and fluctuation experiments.

The centring constants come from the double critical point of

    G(z) = log Gamma(z) - kappa log Gamma(k + z) + (f - (kappa - 1) log theta) z,

where t_bar solves psi'(t) = kappa psi'(k + t) on (0, 1/2) and f is chosen so
that G'(t_bar) = 0 too.  Then g_bar = -G'''(t_bar).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .fredholm import tw_cdf
from .polymer import sample_free_energy
from .specfun import GammaParams, log_gamma_complex, polygamma

__all__ = [
    "CriticalData",
    "solve_critical_point",
    "critical_data",
    "f_bar",
    "g_bar",
    "G",
    "G_derivative",
    "VariationalResult",
    "variational_free_energy",
    "operational_kappa_star",
    "LLNRow",
    "lln_experiment",
    "TWResult",
    "tw_experiment",
    "stationary_lln",
]

_T_LO, _T_HI = 1e-12, 0.5
_RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class CriticalData:
    kappa: float
    k: float
    theta: float
    t_bar: float
    f_bar: float
    g_bar: float
    residual: float
    multiple_roots: bool = False


def _h(t, k, kappa):
    return polygamma(1, t) - kappa * polygamma(1, k + t)


def _dh(t, k, kappa):
    return polygamma(2, t) - kappa * polygamma(2, k + t)


def solve_critical_point(k: float, kappa: float) -> float | None:
    """Root of psi'(t) - kappa psi'(k + t) in (0, 1/2), or None if there is none.

    The function tends to +inf at 0+, so a root exists exactly when it is
    negative at 1/2.  Bisection brackets the root and Newton polishes it.
    """
    if not k > 0:
        raise ValueError("k must be positive")
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    t_bar, _ = _solve(k, kappa)
    return t_bar


def _solve(k, kappa):
    if _h(_T_HI, k, kappa) >= 0:
        return None, False
    grid = np.geomspace(_T_LO, _T_HI, 400)
    signs = np.sign(_h(grid, k, kappa))
    changes = np.nonzero(np.diff(signs) != 0)[0]
    # report the smallest root if the scan ever finds several
    lo, hi = grid[changes[0]], grid[changes[0] + 1]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _h(mid, k, kappa) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    t = 0.5 * (lo + hi)
    for _ in range(5):
        step = _h(t, k, kappa) / _dh(t, k, kappa)
        if not lo <= t - step <= hi:
            break
        t -= step
        if abs(step) <= 1e-16 * t:
            break
    return float(t), len(changes) > 1


def f_bar(crit_or_t: CriticalData | float, k: float | None = None, kappa: float | None = None,
          theta: float = 1.0) -> float:
    """-psi(t) + kappa psi(k + t) + (kappa - 1) log theta at t = t_bar."""
    if isinstance(crit_or_t, CriticalData):
        return crit_or_t.f_bar
    t = crit_or_t
    return -polygamma(0, t) + kappa * polygamma(0, k + t) + (kappa - 1) * math.log(theta)


def g_bar(crit_or_t: CriticalData | float, k: float | None = None, kappa: float | None = None) -> float:
    """-psi''(t) + kappa psi''(k + t) at t = t_bar; free of theta."""
    if isinstance(crit_or_t, CriticalData):
        return crit_or_t.g_bar
    t = crit_or_t
    return -polygamma(2, t) + kappa * polygamma(2, k + t)


def critical_data(params: GammaParams, kappa: float) -> CriticalData | None:
    """t_bar, f_bar, g_bar for the given model, or None below the threshold."""
    k = params.shape
    t, multiple = _solve(k, kappa)
    if t is None:
        return None
    residual = abs(_h(t, k, kappa))
    if residual > _RESIDUAL_TOL * max(1.0, polygamma(1, t)):
        raise ArithmeticError(f"critical point residual {residual:.2e} too large")
    f = f_bar(t, k, kappa, params.scale)
    g = g_bar(t, k, kappa)
    crit = CriticalData(kappa, k, params.scale, t, f, g, residual, multiple)
    for order in (1, 2):
        val = G_derivative(order, t, crit)
        assert abs(val) < 1e-8 * max(1.0, polygamma(order, t)), (order, val)
    return crit


def G(z, crit: CriticalData):
    """The steepest-descent phase function, for real or complex ``z``."""
    z = np.asarray(z)
    lin = crit.f_bar - (crit.kappa - 1) * math.log(crit.theta)
    if np.iscomplexobj(z):
        return log_gamma_complex(z) - crit.kappa * log_gamma_complex(crit.k + z) + lin * z
    from scipy.special import gammaln

    return gammaln(z) - crit.kappa * gammaln(crit.k + z) + lin * z


def G_derivative(order: int, x, crit: CriticalData):
    """d^order G / dz^order at real ``x > 0``, order 1..4."""
    if not 1 <= order <= 4:
        raise ValueError("order must be 1..4")
    out = polygamma(order - 1, x) - crit.kappa * polygamma(order - 1, crit.k + np.asarray(x))
    if order == 1:
        out = out + crit.f_bar - (crit.kappa - 1) * math.log(crit.theta)
    return out


@dataclass(frozen=True)
class VariationalResult:
    value: float
    beta: float
    boundary: bool


def _objective(beta, k, kappa, theta):
    return -polygamma(0, beta) + kappa * polygamma(0, k + beta) + (kappa - 1) * math.log(theta)


def variational_free_energy(k: float, theta: float, kappa: float) -> VariationalResult:
    """inf over beta > 0 of -psi(beta) + kappa psi(k + beta) + (kappa - 1) log theta.

    A log-spaced scan brackets the minimiser, golden-section narrows it and
    Newton on the derivative finishes.  When the scan minimum sits at the
    right end of the range the infimum is approached as beta -> inf; for
    kappa = 1 that limit is exactly 0 and is returned with ``boundary``.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    grid = np.geomspace(1e-10, 1e6, 2000)
    vals = _objective(grid, k, kappa, theta)
    i = int(np.argmin(vals))
    if i == grid.size - 1:
        limit = (kappa - 1) * math.log(theta) if kappa == 1 else float(vals[-1])
        return VariationalResult(limit, math.inf, True)
    if i == 0:
        return VariationalResult(float(vals[0]), float(grid[0]), True)
    a, b = grid[i - 1], grid[i + 1]
    inv_phi = (math.sqrt(5) - 1) / 2
    c, d = b - inv_phi * (b - a), a + inv_phi * (b - a)
    fc, fd = _objective(c, k, kappa, theta), _objective(d, k, kappa, theta)
    for _ in range(60):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = _objective(c, k, kappa, theta)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = _objective(d, k, kappa, theta)
    beta = 0.5 * (a + b)
    # the derivative of the objective is -(psi'(beta) - kappa psi'(k + beta))
    for _ in range(8):
        step = _h(beta, k, kappa) / _dh(beta, k, kappa)
        beta -= step
        if abs(step) <= 1e-16 * beta:
            break
    return VariationalResult(float(_objective(beta, k, kappa, theta)), float(beta), False)


def operational_kappa_star(k: float, kappa_grid=(1, 2, 3, 5, 10, 15, 20, 50, 100)) -> float | None:
    """Smallest grid kappa for which the critical point exists."""
    for kappa in sorted(kappa_grid):
        if solve_critical_point(k, kappa) is not None:
            return float(kappa)
    return None


@dataclass(frozen=True)
class LLNRow:
    n: int
    mean_over_n: float
    stderr_over_n: float
    deviation: float


def _samples(params, kappa, n, replicas, seed, threads, samples):
    if samples is not None and n in samples:
        return samples[n]
    out = sample_free_energy(params, kappa, n, replicas, seed, threads=threads)
    if samples is not None:
        samples[n] = out
    return out


def lln_experiment(
    params: GammaParams,
    kappa: int,
    ns,
    replicas: int,
    seed: int,
    threads: int = 1,
    samples: dict | None = None,
) -> list[LLNRow]:
    """Empirical mean of log Z(kappa n, n)/n against f_bar for each n.

    ``samples`` is an optional cache {n: array} shared with :func:`tw_experiment`.
    """
    crit = critical_data(params, kappa)
    if crit is None:
        raise ValueError(f"no critical point for k={params.shape}, kappa={kappa}")
    rows = []
    for n in ns:
        x = _samples(params, kappa, n, replicas, seed, threads, samples) / n
        rows.append(
            LLNRow(int(n), float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)),
                   float(abs(x.mean() - crit.f_bar)))
        )
    return rows


@dataclass
class TWResult:
    n: int
    ks: float
    mean_rescaled: float
    stderr_rescaled: float
    tw_mean_scaled: float
    quantiles: dict = field(default_factory=dict)
    rescaled: np.ndarray | None = None


TW_MEAN = -1.7710868074


def tw_experiment(
    params: GammaParams,
    kappa: int,
    n: int,
    replicas: int,
    seed: int,
    threads: int = 1,
    samples: dict | None = None,
) -> TWResult:
    """KS distance between (log Z - n f_bar)/n^(1/3) and F_GUE((g_bar/2)^(-1/3) r)."""
    crit = critical_data(params, kappa)
    if crit is None:
        raise ValueError(f"no critical point for k={params.shape}, kappa={kappa}")
    logz = _samples(params, kappa, n, replicas, seed, threads, samples)
    chi = (logz - n * crit.f_bar) / n ** (1 / 3)
    scale = (crit.g_bar / 2) ** (1 / 3)
    cdf = tw_cdf()
    ks = stats.kstest(chi, lambda r: cdf(r / scale)).statistic
    qs = {f"q{int(p * 100):02d}": float(np.quantile(chi, p)) for p in (0.05, 0.25, 0.5, 0.75, 0.95)}
    return TWResult(
        n=int(n),
        ks=float(ks),
        mean_rescaled=float(chi.mean()),
        stderr_rescaled=float(chi.std(ddof=1) / math.sqrt(chi.size)),
        tw_mean_scaled=TW_MEAN * scale,
        quantiles=qs,
        rescaled=chi,
    )


def stationary_lln(params: GammaParams, beta: float, t: float, n: float) -> float:
    """Closed-form t psi(k + beta) - n psi(beta) + (t - n) log theta."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    k, theta = params.shape, params.scale
    return t * polygamma(0, k + beta) - n * polygamma(0, beta) + (t - n) * math.log(theta)
