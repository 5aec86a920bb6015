"""Exact joint moments u(t, n) = E[prod_i Z(t, n_i)] of the polymer.

Two independent routes are provided: the true-evolution recursion (a
memoised dynamic program over weakly decreasing index tuples) and the
nested-contour integral formula evaluated by trapezoid sums on circles.  A
q-deformed contour formula gives the geometric q-TASEP moments
E[prod_i q^(X_{n_i}(t) + n_i)].
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .specfun import GammaParams, QParams

__all__ = [
    "MomentIndex",
    "NumericalFailure",
    "gamma_moments",
    "moment_recursion",
    "moment_recursion_subsets",
    "moment_contour",
    "contour_integral",
    "q_moment_contour",
    "boundary_condition_check",
    "weakly_decreasing_indices",
    "MAX_T",
]

MAX_T = 20
_IMAG_TOL = 1e-9
_CONVERGENCE_TOL = 1e-9
# values that vanish exactly (e.g. n_j = 0 entries) converge to rounding noise
_ABS_FLOOR = 1e-14


class NumericalFailure(RuntimeError):
    """A quadrature or root search did not reach its accuracy target."""


@dataclass(frozen=True)
class MomentIndex:
    """Weakly decreasing levels n_1 >= ... >= n_k >= 1."""

    levels: tuple

    def __post_init__(self):
        levels = tuple(int(n) for n in self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise ValueError("MomentIndex needs at least one level")
        if levels[-1] < 1:
            raise ValueError("levels must be >= 1")
        if any(a < b for a, b in zip(levels, levels[1:])):
            raise ValueError(f"levels must be weakly decreasing, got {levels}")

    @property
    def k(self) -> int:
        return len(self.levels)

    @property
    def clusters(self) -> list[tuple[int, int]]:
        """Runs of equal levels as (value, multiplicity)."""
        return [(v, len(list(g))) for v, g in itertools.groupby(self.levels)]


def _as_levels(nvec) -> tuple:
    if isinstance(nvec, MomentIndex):
        return nvec.levels
    return MomentIndex(tuple(nvec)).levels


def weakly_decreasing_indices(k: int, n_max: int):
    """All weakly decreasing k-tuples with entries in 1..n_max."""
    for combo in itertools.combinations_with_replacement(range(n_max, 0, -1), k):
        yield combo


def gamma_moments(params: GammaParams, kmax: int) -> np.ndarray:
    """m_0 = 1, m_1, ..., m_kmax of Gamma(k, theta)."""
    return np.array([params.moment(i) for i in range(kmax + 1)])


@lru_cache(maxsize=None)
def _recursion(shape: float, scale: float, t: int, levels: tuple) -> float:
    if any(n < 1 for n in levels):
        return 0.0
    if any(n > t + 1 for n in levels):
        return 0.0
    if t == 0:
        return 1.0 if all(n == 1 for n in levels) else 0.0
    params = GammaParams(shape, scale)
    clusters = [(v, len(list(g))) for v, g in itertools.groupby(levels)]
    total = 0.0
    # Summands depend on the subset A only through how many members of each
    # cluster it contains, so sum over those counts with binomial weights.
    for counts in itertools.product(*(range(c + 1) for _, c in clusters)):
        weight = 1.0
        shifted = []
        for (value, c), a in zip(clusters, counts):
            weight *= math.comb(c, a) * params.moment(a)
            shifted.extend([value] * a + [value - 1] * (c - a))
        total += weight * _recursion(shape, scale, t - 1, tuple(shifted))
    return total


def moment_recursion(params: GammaParams, t: int, nvec) -> float:
    """u(t, n) from the true evolution equation.

    Entries outside 1 <= n_j <= t+1 give zero; u(0, (1,...,1)) = 1.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if t > MAX_T:
        raise ValueError(f"moments overflow quickly; t is limited to {MAX_T}")
    return _recursion(params.shape, params.scale, int(t), _as_levels(nvec))


def moment_recursion_subsets(params: GammaParams, t: int, nvec) -> float:
    """Same recursion, summing literally over all 2^k subsets A.

    Kept as an independent reference for the cluster-count reduction used by
    :func:`moment_recursion`.
    """
    levels = _as_levels(nvec)

    @lru_cache(maxsize=None)
    def u(s: int, lv: tuple) -> float:
        if any(n < 1 or n > s + 1 for n in lv):
            return 0.0
        if s == 0:
            return 1.0 if all(n == 1 for n in lv) else 0.0
        k = len(lv)
        total = 0.0
        for mask in range(1 << k):
            in_a = [(mask >> i) & 1 == 1 for i in range(k)]
            # E over the shared Y(s-1, n) of each cluster
            weight = 1.0
            for value, group in itertools.groupby(range(k), key=lambda i: lv[i]):
                members = list(group)
                weight *= params.moment(sum(in_a[i] for i in members))
            shifted = tuple(sorted((lv[i] if in_a[i] else lv[i] - 1 for i in range(k)), reverse=True))
            total += weight * u(s - 1, shifted)
        return total

    return u(int(t), levels)


def _pairwise_sum(weights: Sequence[np.ndarray], pair) -> complex:
    """sum over node tuples of prod_j w_j(x_j) prod_{A<B} pair(A, B)[x_A, x_B].

    ``weights[j]`` is a vector over the nodes of contour j and ``pair(A, B)``
    returns the matrix of the two-body factor between contours A < B.
    Three or fewer contours are contracted with matrix products; more are
    reduced by looping over the outermost contour.
    """
    k = len(weights)
    if k == 1:
        return complex(np.sum(weights[0]))
    if k == 2:
        return complex(weights[0] @ pair(0, 1) @ weights[1])
    if k == 3:
        g01, g02, g12 = pair(0, 1), pair(0, 2), pair(1, 2)
        # inner[a, b] = sum_c g02[a, c] w2[c] g12[b, c]
        inner = (g02 * weights[2]) @ g12.T
        return complex(np.sum(weights[0][:, None] * weights[1][None, :] * g01 * inner))
    total = 0.0j
    g0 = [pair(0, b) for b in range(1, k)]
    for a in range(len(weights[0])):
        reduced = [weights[b] * g0[b - 1][a] for b in range(1, k)]
        total += weights[0][a] * _pairwise_sum(
            reduced, lambda i, j: pair(i + 1, j + 1)
        )
    return total


def _circle(center: complex, radius: float, nodes: int) -> np.ndarray:
    phi = 2.0 * np.pi * (np.arange(nodes) + 0.5) / nodes
    return center + radius * np.exp(1j * phi)


def contour_integral(params: GammaParams, t: int, levels: Sequence[int], nodes: int = 256) -> complex:
    """Raw nested-contour integral for arbitrary integer ``levels``.

    Contour j is the circle |z| = r_j with r_k = theta/4 and
    r_j = r_{j+1} + 3 theta / 2, so contour j encloses 0 and contour j+1
    shifted by theta.  With dz/(2 pi i z) each node carries weight 1/nodes.
    """
    theta = params.scale
    m1 = params.mean
    k = len(levels)
    radii = [theta / 4 + 1.5 * theta * (k - 1 - j) for j in range(k)]
    zs = [_circle(0.0, r, nodes) for r in radii]
    weights = [
        z ** (1 - n) * (m1 + z) ** t / nodes for z, n in zip(zs, levels)
    ]

    def pair(a, b):
        diff = zs[a][:, None] - zs[b][None, :]
        return diff / (diff - theta)

    return _pairwise_sum(weights, pair)


def _converged(evaluate, nodes: int, what: str) -> complex:
    prev = evaluate(nodes)
    for _ in range(2):
        nodes *= 2
        cur = evaluate(nodes)
        if abs(cur - prev) <= max(_CONVERGENCE_TOL * abs(cur), _ABS_FLOOR):
            return cur
        prev = cur
    raise NumericalFailure(f"{what}: no convergence under node doubling up to {nodes} nodes")


def _real_part(value: complex, what: str) -> float:
    if abs(value.imag) > _IMAG_TOL * max(1.0, abs(value.real)):
        raise NumericalFailure(
            f"{what}: imaginary residual {value.imag:.3e} exceeds tolerance"
        )
    return float(value.real)


def moment_contour(params: GammaParams, t: int, nvec, nodes: int = 256) -> float:
    """u(t, n) from the nested-contour moment formula."""
    levels = _as_levels(nvec)
    if len(levels) > 6:
        raise ValueError("contour evaluation supports at most 6 levels")
    if t < 0:
        raise ValueError("t must be non-negative")
    value = _converged(
        lambda m: contour_integral(params, t, levels, m), nodes, "moment_contour"
    )
    return _real_part(value, "moment_contour")


def _q_radii(q: float, k: int) -> list[float]:
    """Radii of circles centred at 1 for the q-moment contours (outermost first).

    Contour j must enclose 1 and q times contour j+1, and exclude 0.  Radii
    follow the (1-q)-scaled analogue of the real-z layout when that fits
    inside the unit disc, otherwise a geometric layout.
    """
    scaled = [(1 - q) * (0.25 + 1.5 * (k - 1 - j)) for j in range(k)]
    if scaled[0] < 0.9:
        return scaled
    gaps = [0.75]
    for _ in range(k - 1):
        gaps.append(0.5 * q * gaps[-1])
    radii = [1.0 - g for g in reversed(gaps)]
    return radii


def _q_contour_integral(qp: QParams, t: int, levels: Sequence[int], nodes: int) -> complex:
    q, alpha = qp.q, qp.alpha
    k = len(levels)
    radii = _q_radii(q, k)
    zs = [_circle(1.0, r, nodes) for r in radii]
    # dz/(2 pi i) on a circle around 1 equals (z - 1)/nodes per node
    weights = [
        -((1 - z) ** (1 - n)) * (1 - alpha * z) ** t / z / nodes for z, n in zip(zs, levels)
    ]

    def pair(a, b):
        return (zs[a][:, None] - zs[b][None, :]) / (zs[a][:, None] - q * zs[b][None, :])

    prefactor = (-1) ** k * q ** (k * (k - 1) / 2)
    return prefactor * _pairwise_sum(weights, pair)


def q_moment_contour(qp: QParams, t: int, nvec, nodes: int = 256) -> float:
    """E[prod_i q^(X_{n_i}(t) + n_i)] for geometric q-TASEP, step initial data."""
    levels = _as_levels(nvec)
    if len(levels) > 4:
        raise ValueError("q-moment contours support at most 4 levels")
    value = _converged(
        lambda m: _q_contour_integral(qp, t, levels, m), nodes, "q_moment_contour"
    )
    return _real_part(value, "q_moment_contour")


def boundary_condition_check(params: GammaParams, t: int, nvec, i: int | None = None) -> float:
    """Residual of the two-body boundary condition at a pair n_i = n_{i+1}.

    Evaluates (m_1^2 - m_2) u + m_1 (u(n - e_i) - u(n - e_{i+1})) with every
    u taken from the contour formula, scaled by the largest term.  ``i`` is
    zero-based; by default the first equal adjacent pair is used.
    """
    levels = list(_as_levels(nvec))
    if i is None:
        pairs = [j for j in range(len(levels) - 1) if levels[j] == levels[j + 1]]
        if not pairs:
            raise ValueError("nvec has no equal adjacent pair")
        i = pairs[0]
    if levels[i] != levels[i + 1]:
        raise ValueError("boundary condition applies only where n_i = n_{i+1}")
    m1, m2 = params.moment(1), params.moment(2)

    def u(lv):
        return _real_part(
            _converged(lambda m: contour_integral(params, t, lv, m), 256, "boundary"),
            "boundary",
        )

    down_i = levels.copy()
    down_i[i] -= 1
    down_j = levels.copy()
    down_j[i + 1] -= 1
    terms = [(m1 * m1 - m2) * u(levels), m1 * u(down_i), -m1 * u(down_j)]
    scale = max(abs(x) for x in terms) or 1.0
    return abs(sum(terms)) / scale
