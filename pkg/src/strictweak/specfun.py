"""Special functions shared by the rest of the package.

Log-gamma on the complex plane, real polygamma of orders 0-3, q-Pochhammer
symbols with the derived q-Gamma and q-exponential, and gamma sampling.
Everything here is vectorised over numpy arrays and free of global state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainError",
    "GammaParams",
    "QParams",
    "log_gamma_complex",
    "polygamma",
    "q_pochhammer",
    "log_q_pochhammer_table",
    "log_q_pochhammer_inf",
    "q_gamma",
    "q_exponential",
    "q_number",
    "sample_gamma",
    "EULER_GAMMA",
]

EULER_GAMMA = 0.57721566490153286061

# B_2 .. B_14
_BERNOULLI = np.array(
    [1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6], dtype=float
)
_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)
_SHIFT = 15.0
_QPROD_TOL = 1e-17
_QPROD_MAX_FACTORS = 10**6


class DomainError(ValueError):
    """Argument outside the domain of a special function (pole, bad q, ...)."""


@dataclass(frozen=True)
class GammaParams:
    """Shape ``k`` and scale ``theta`` of the Gamma(k, theta) bulk weights."""

    shape: float
    scale: float = 1.0

    def __post_init__(self):
        if not (self.shape > 0 and math.isfinite(self.shape)):
            raise DomainError(f"gamma shape must be positive, got {self.shape}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise DomainError(f"gamma scale must be positive, got {self.scale}")

    @property
    def k(self) -> float:
        return self.shape

    @property
    def theta(self) -> float:
        return self.scale

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    def moment(self, i: int) -> float:
        """E[Y^i] = theta^i k (k+1) ... (k+i-1), with the empty product for i=0."""
        out = 1.0
        for j in range(i):
            out *= self.scale * (self.shape + j)
        return out


@dataclass(frozen=True)
class QParams:
    """Geometric q-TASEP parameters: deformation ``q`` and jump parameter ``alpha``."""

    q: float
    alpha: float

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise DomainError(f"q must lie in (0, 1), got {self.q}")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")


def _stirling(z):
    """log Gamma(z) by the asymptotic series; valid for Re z >= 15."""
    zinv = 1.0 / z
    zinv2 = zinv * zinv
    series = np.zeros_like(z)
    power = zinv
    for j, b in enumerate(_BERNOULLI, start=1):
        series = series + b / (2 * j * (2 * j - 1)) * power
        power = power * zinv2
    return (z - 0.5) * np.log(z) - z + _HALF_LOG_2PI + series


def log_gamma_complex(z):
    """Principal branch of log Gamma(z) for complex ``z``.

    Shifts ``z`` right until ``Re z >= 15`` and applies Stirling's series with
    Bernoulli terms through B_14; the shift is undone by subtracting principal
    logarithms, which keeps the branch cut on the negative real axis.

    Raises
    ------
    DomainError
        If any entry is a non-positive integer.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    poles = (z.imag == 0) & (z.real <= 0) & (z.real == np.round(z.real))
    if np.any(poles):
        raise DomainError("log_gamma_complex: pole at a non-positive integer")
    shift = np.maximum(0, np.ceil(_SHIFT - z.real)).astype(int)
    acc = np.zeros_like(z)
    w = z.copy()
    for j in range(int(shift.max(initial=0))):
        active = shift > j
        acc[active] += np.log(w[active])
        w[active] += 1.0
    out = _stirling(w) - acc
    return out[0] if scalar else out


def _polygamma_asymptotic(order, x):
    """Asymptotic series of the polygamma function, for x >= 15."""
    xinv = 1.0 / x
    if order == 0:
        out = np.log(x) - 0.5 * xinv
        power = xinv * xinv
        for j, b in enumerate(_BERNOULLI, start=1):
            out = out - b / (2 * j) * power
            power = power * xinv * xinv
        return out
    m = order
    out = math.factorial(m - 1) * xinv**m + math.factorial(m) / 2 * xinv ** (m + 1)
    for j, b in enumerate(_BERNOULLI, start=1):
        coef = b * math.factorial(2 * j + m - 1) / math.factorial(2 * j)
        out = out + coef * xinv ** (2 * j + m)
    return (-1) ** (m + 1) * out


def polygamma(order: int, x):
    """Polygamma function psi^(order)(x) for real ``x > 0`` and order 0..3.

    ``order=0`` is the digamma function. Uses upward recurrence to ``x >= 15``
    followed by the asymptotic expansion.
    """
    if order not in (0, 1, 2, 3):
        raise DomainError(f"polygamma order must be 0..3, got {order}")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(~(x > 0)):
        raise DomainError("polygamma requires x > 0")
    shift = np.maximum(0, np.ceil(_SHIFT - x)).astype(int)
    acc = np.zeros_like(x)
    w = x.copy()
    sign_fact = (-1) ** order * math.factorial(order)
    for j in range(int(shift.max(initial=0))):
        active = shift > j
        acc[active] += sign_fact / w[active] ** (order + 1)
        w[active] += 1.0
    out = _polygamma_asymptotic(order, w) - acc
    return float(out[0]) if scalar else out


def _inf_factor_count(a_abs: float, q: float) -> int:
    """Number of factors of (a;q)_inf before |a q^i| drops below 1e-17."""
    if a_abs == 0.0:
        return 0
    n = math.ceil(math.log(_QPROD_TOL / a_abs) / math.log(q)) + 1
    return int(min(max(n, 1), _QPROD_MAX_FACTORS))


def q_pochhammer(a, q: float, m):
    """q-Pochhammer symbol (a;q)_m = prod_{i<m} (1 - a q^i).

    ``m`` may be a non-negative integer or ``math.inf``. ``a`` may be real or
    complex; the result has the same numeric kind. The infinite product is
    truncated once |a q^i| < 1e-17.
    """
    if m == math.inf:
        if not 0.0 <= q < 1.0:
            raise DomainError("(a;q)_inf requires 0 <= q < 1")
        m = _inf_factor_count(abs(a), q)
    else:
        m = int(m)
        if m < 0:
            raise DomainError("q_pochhammer: m must be non-negative")
    if m == 0:
        return type(a)(1) if isinstance(a, (int, float, complex)) else 1.0
    factors = 1.0 - a * q ** np.arange(m, dtype=float)
    if np.iscomplexobj(factors):
        return complex(np.prod(factors))
    return float(np.prod(factors))


def log_q_pochhammer_table(a: float, q: float, m_max: int) -> np.ndarray:
    """log (a;q)_j for j = 0..m_max, for real ``a`` with ``a q^i < 1``."""
    i = np.arange(m_max, dtype=float)
    terms = np.log1p(-a * q**i)
    return np.concatenate(([0.0], np.cumsum(terms)))


def log_q_pochhammer_inf(a: float, q: float) -> float:
    """log (a;q)_inf for real ``a < 1`` and ``0 < q < 1``."""
    if a >= 1.0:
        raise DomainError("log_q_pochhammer_inf requires a < 1")
    m = _inf_factor_count(abs(a), q)
    i = np.arange(m, dtype=float)
    return float(np.sum(np.log1p(-a * q**i)))


def _signed_log_qpoch_inf(a: float, q: float):
    """(sign, log|.|) of (a;q)_inf for real ``a``; raises at zeros."""
    m = _inf_factor_count(abs(a), q)
    factors = 1.0 - a * q ** np.arange(m, dtype=float)
    if np.any(factors == 0.0):
        raise DomainError("q-Pochhammer product vanishes (pole of the caller)")
    sign = -1.0 if np.count_nonzero(factors < 0) % 2 else 1.0
    return sign, float(np.sum(np.log(np.abs(factors))))


def q_number(x, q: float):
    """[x]_q = (1 - q^x) / (1 - q)."""
    return (1.0 - q ** np.asarray(x, dtype=float)) / (1.0 - q)


def q_gamma(x: float, q: float) -> float:
    """q-Gamma function (q;q)_inf / (q^x;q)_inf * (1-q)^(1-x) for real ``x``."""
    if not 0.0 < q < 1.0:
        raise DomainError("q_gamma requires 0 < q < 1")
    if x <= 0 and float(x).is_integer():
        raise DomainError("q_gamma has poles at non-positive integers")
    _, log_num = _signed_log_qpoch_inf(q, q)
    sign, log_den = _signed_log_qpoch_inf(q**x, q)
    return sign * math.exp(log_num - log_den + (1.0 - x) * math.log1p(-q))


def q_exponential(x, q: float):
    """q-exponential e_q(x) = 1 / ((1-q) x; q)_inf, real or complex ``x``."""
    if not 0.0 < q < 1.0:
        raise DomainError("q_exponential requires 0 < q < 1")
    a = (1.0 - q) * x
    if isinstance(a, complex) or np.iscomplexobj(a):
        m = _inf_factor_count(abs(a), q)
        factors = 1.0 - a * q ** np.arange(m, dtype=float)
        if np.any(factors == 0):
            raise DomainError("q_exponential pole")
        return complex(np.exp(-np.sum(np.log(factors))))
    sign, log_prod = _signed_log_qpoch_inf(float(a), q)
    return sign * math.exp(-log_prod)


def sample_gamma(params: GammaParams, rng: np.random.Generator, size=None):
    """Draw Gamma(k, theta) variates from ``rng``.

    Delegates to numpy's Marsaglia-Tsang sampler, which handles shapes below
    one by the usual ``U^(1/k)`` boost.
    """
    return rng.gamma(params.shape, params.scale, size=size)
