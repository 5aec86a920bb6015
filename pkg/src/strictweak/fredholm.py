"""Fredholm determinants by Nyström quadrature.

``laplace_transform`` evaluates E[exp(-u Z(kappa n, n))] as det(I + K_u) on a
small circle around the origin, where

    K_u(v, v') = 1/(2 pi i) int_{Re z = 1/2} pi / sin(pi (v - z))
                 * exp(n [l(v) - l(z)] + (z - v) c) / (z - v') dz,

with l(z) = log Gamma(z) - kappa log Gamma(k + z) and
c = log u + (kappa n - n + 1) log theta.  ``tracy_widom_gue`` evaluates the
GUE Tracy-Widom distribution as the Airy-kernel determinant det(I - K_Ai)
on (r, inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import airy

from .moments import NumericalFailure
from .specfun import GammaParams, log_gamma_complex

__all__ = [
    "ConfigurationError",
    "DiscretizedContour",
    "kernel_Ku",
    "kernel_matrix",
    "laplace_transform",
    "tracy_widom_gue",
    "tracy_widom_table",
    "tw_cdf",
    "TW_RANGE",
]

TW_RANGE = (-10.0, 6.0)
_LOG_CUTOFF = math.log(1e-16)
_DET_IMAG_TOL = 1e-8
_CONVERGENCE_TOL = 1e-7


class ConfigurationError(ValueError):
    """Contours collide with a pole of the integrand."""


@dataclass(frozen=True)
class DiscretizedContour:
    """Quadrature nodes and complex weights approximating int f(z) dz."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    @classmethod
    def circle(cls, center: complex, radius: float, count: int) -> "DiscretizedContour":
        if count < 16:
            raise ValueError("a discretized contour needs at least 16 nodes")
        phi = 2.0 * np.pi * np.arange(count) / count
        rim = radius * np.exp(1j * phi)
        return cls(center + rim, 1j * rim * (2.0 * np.pi / count), "circle")

    @classmethod
    def vertical_line(cls, re: float, step: float, half_height: float) -> "DiscretizedContour":
        """Trapezoid rule on re + iy, |y| <= half_height, oriented upward."""
        m = int(math.ceil(half_height / step))
        y = step * np.arange(-m, m + 1)
        if y.size < 16:
            raise ValueError("a discretized contour needs at least 16 nodes")
        return cls(re + 1j * y, np.full(y.size, 1j * step, dtype=complex), "vertical-line")


def _log_pi_over_sin(w):
    """log(pi / sin(pi w)) without overflow for large |Im w|."""
    w = np.asarray(w, dtype=complex)
    upper = w.imag >= 0
    # sin(pi w) = e^{-i pi w} (e^{2 i pi w} - 1) / (2i) for Im w >= 0, and the
    # mirror image below; the bracketed factor stays bounded.
    log_sin = np.where(
        upper,
        -1j * np.pi * w + np.log(np.expm1(2j * np.pi * np.where(upper, w, 1j))),
        1j * np.pi * w + np.log(-np.expm1(-2j * np.pi * np.where(upper, -1j, w))),
    ) - np.log(2j)
    return math.log(math.pi) - log_sin


def _ell(z, n: int, kappa: int, k: float):
    return n * (log_gamma_complex(z) - kappa * log_gamma_complex(k + z))


def _default_radius(k: float) -> float:
    return min(0.25, k / 2.0)


def _line_half_height(v: np.ndarray, n, kappa, k, c, start: float = 40.0) -> float:
    """Truncation height where the integrand falls below 1e-16 of its peak."""
    y = np.arange(0.0, 4000.0, 1.0)
    z = 0.5 + 1j * y
    logmag = (
        -_ell(z, n, kappa, k).real
        + (z * c).real
        + _log_pi_over_sin(v[:, None] - z[None, :]).real.max(axis=0)
    )
    peak = logmag.max()
    below = np.nonzero(logmag > peak + _LOG_CUTOFF)[0]
    height = float(y[below[-1]]) + 2.0 if below.size else start
    if height >= y[-1]:
        raise NumericalFailure("z-line integrand does not decay within |Im z| < 4000")
    return max(start, height)


def _check_geometry(v: np.ndarray, line: DiscretizedContour, k: float):
    if np.any(np.abs(v) < 1e-12) or np.any((v.real + k) <= 0):
        raise ConfigurationError("C_0 must enclose 0 and stay right of -k")
    w = v[:, None] - line.nodes[None, :]
    if np.any(np.abs(w - np.round(w.real)) < 1e-6):
        raise ConfigurationError("contour meets a pole of pi/sin(pi (v - z))")


def kernel_Ku(
    v: complex,
    vprime: complex,
    u: float,
    n: int,
    kappa: int,
    params: GammaParams,
    line: DiscretizedContour | None = None,
) -> complex:
    """Single kernel entry K_u(v, v') by quadrature along ``line``."""
    v_arr = np.atleast_1d(np.asarray(v, dtype=complex))
    c = math.log(u) + (kappa * n - n + 1) * math.log(params.scale)
    if line is None:
        half = _line_half_height(v_arr, n, kappa, params.shape, c)
        line = DiscretizedContour.vertical_line(0.5, 0.05, half)
    _check_geometry(v_arr, line, params.shape)
    if np.any(np.abs(line.nodes - vprime) < 1e-12):
        raise ConfigurationError("z-line passes through v'")
    z = line.nodes
    ell = _ell(np.concatenate([v_arr, z]), n, kappa, params.shape)
    log_f = _log_pi_over_sin(v - z) + ell[0] - ell[1:] + (z - v) * c
    return complex(np.sum(np.exp(log_f) / (z - vprime) * line.weights) / (2j * np.pi))


def kernel_matrix(
    u: float,
    n: int,
    kappa: int,
    params: GammaParams,
    circle: DiscretizedContour,
    line: DiscretizedContour,
) -> np.ndarray:
    """Nyström matrix M[i, j] = K_u(v_i, v_j) w_j / (2 pi i) on the circle.

    The line integral factors as A @ B with A holding the integrand at
    (v_i, z_m) and B[m, j] = 1/(z_m - v_j).
    """
    v, z = circle.nodes, line.nodes
    _check_geometry(v, line, params.shape)
    c = math.log(u) + (kappa * n - n + 1) * math.log(params.scale)
    ell = _ell(np.concatenate([v, z]), n, kappa, params.shape)
    ell_v, ell_z = ell[: v.size], ell[v.size :]
    log_a = (
        _log_pi_over_sin(v[:, None] - z[None, :])
        + ell_v[:, None]
        - ell_z[None, :]
        + (z[None, :] - v[:, None]) * c
    )
    a = np.exp(log_a) * (line.weights / (2j * np.pi))[None, :]
    b = 1.0 / (z[:, None] - v[None, :])
    return (a @ b) * (circle.weights / (2j * np.pi))[None, :]


def _determinant(u, n, kappa, params, nodes, step, radius, half):
    circle = DiscretizedContour.circle(0.0, radius, nodes)
    line = DiscretizedContour.vertical_line(0.5, step, half)
    m = kernel_matrix(u, n, kappa, params, circle, line)
    return complex(np.linalg.det(np.eye(nodes) + m))


def laplace_transform(
    u: float,
    n: int,
    kappa: int,
    params: GammaParams,
    nodes: int = 64,
    step: float = 0.05,
    radius: float | None = None,
) -> float:
    """E[exp(-u Z(kappa n, n))] as det(I + K_u).

    Circle nodes are doubled and the line step halved together until two
    successive determinants agree to 1e-7; at most two refinements.
    """
    if isinstance(u, complex) or np.iscomplexobj(u):
        raise ValueError("only real u > 0 is supported")
    if not u > 0:
        raise ValueError("u must be positive")
    if n < 1 or kappa < 1:
        raise ValueError("need n >= 1 and kappa >= 1")
    radius = _default_radius(params.shape) if radius is None else radius
    if not 0 < radius < min(0.5, params.shape):
        raise ConfigurationError("C_0 radius must lie in (0, min(1/2, k))")
    c = math.log(u) + (kappa * n - n + 1) * math.log(params.scale)
    probe = DiscretizedContour.circle(0.0, radius, 16).nodes
    half = _line_half_height(probe, n, kappa, params.shape, c)
    prev = _determinant(u, n, kappa, params, nodes, step, radius, half)
    for _ in range(2):
        nodes, step = 2 * nodes, step / 2
        cur = _determinant(u, n, kappa, params, nodes, step, radius, half)
        if abs(cur - prev) < _CONVERGENCE_TOL:
            if abs(cur.imag) > _DET_IMAG_TOL:
                raise NumericalFailure(
                    f"determinant has imaginary residual {cur.imag:.2e}"
                )
            return float(cur.real)
        prev = cur
    raise NumericalFailure("Fredholm determinant did not converge under node doubling")


def _airy_det(r: float, nodes: int) -> float:
    upper = max(r, 0.0) + 12.0
    x, w = np.polynomial.legendre.leggauss(nodes)
    x = r + (x + 1.0) * (upper - r) / 2.0
    w = w * (upper - r) / 2.0
    ai, aip, _, _ = airy(x)
    dx = x[:, None] - x[None, :]
    off = np.divide(
        ai[:, None] * aip[None, :] - aip[:, None] * ai[None, :],
        dx,
        out=np.zeros_like(dx),
        where=dx != 0,
    )
    np.fill_diagonal(off, aip * aip - x * ai * ai)
    sw = np.sqrt(w)
    return float(np.linalg.det(np.eye(nodes) - sw[:, None] * off * sw[None, :]))


def tracy_widom_gue(r: float) -> float:
    """F_GUE(r) as the Airy-kernel Fredholm determinant on (r, inf).

    Gauss-Legendre Nyström on (r, max(r, 0) + 12); the Airy kernel beyond
    that point contributes below 1e-16.  Outside [-10, 6] the value is
    saturated to 0 or 1 (true tails are below 1e-10 there).
    """
    r = float(r)
    lo, hi = TW_RANGE
    if r < lo:
        return 0.0
    if r > hi:
        return 1.0
    nodes = 120 if r > -4 else 200
    a = _airy_det(r, nodes)
    b = _airy_det(r, nodes + 60)
    if abs(a - b) > 1e-8:
        raise NumericalFailure(f"Airy determinant not converged at r={r}")
    return min(max(b, 0.0), 1.0)


@lru_cache(maxsize=4)
def tracy_widom_table(step: float = 0.02) -> tuple[np.ndarray, np.ndarray]:
    """F_GUE tabulated on TW_RANGE with spacing ``step``."""
    lo, hi = TW_RANGE
    grid = np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
    values = np.array([tracy_widom_gue(r) for r in grid])
    return grid, np.maximum.accumulate(values)


def tw_cdf(step: float = 0.02):
    """Vectorised monotone interpolant of F_GUE, saturated outside TW_RANGE."""
    grid, values = tracy_widom_table(step)
    interp = PchipInterpolator(grid, values, extrapolate=False)

    def cdf(r):
        r = np.asarray(r, dtype=float)
        out = interp(np.clip(r, grid[0], grid[-1]))
        out = np.where(r < grid[0], 0.0, np.where(r > grid[-1], 1.0, out))
        return np.clip(out, 0.0, 1.0)

    return cdf
