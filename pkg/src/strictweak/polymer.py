"""Strict-weak lattice polymer with delta initial data.

Paths start at (0, 1) and take horizontal steps (t, n) -> (t+1, n), weighted
by i.i.d. Gamma(k, theta) variables ``Y(t, n)``, or diagonal steps
(t, n) -> (t+1, n+1) of weight one.  The partition function obeys

    Z(t+1, n) = Y(t, n) Z(t, n) + Z(t, n-1),   Z(0, n) = 1{n = 1}.

Weight tables are indexed ``weights[t, n-1] = Y(t, n)``, the weight of the
horizontal edge leaving (t, n).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .specfun import GammaParams
from .streams import map_blocks

__all__ = [
    "LatticePoint",
    "LogPartitionField",
    "field_from_weights",
    "simulate_field",
    "enumerate_paths_oracle",
    "sample_log_partition",
    "sample_free_energy",
    "FREE_ENERGY_CSV_HEADER",
]

FREE_ENERGY_CSV_HEADER = ("replica", "n", "kappa", "k", "theta", "log_Z")

# Renormalise the linear-scale columns this often; the log of the discarded
# scale is accumulated per replica.
_RENORM_EVERY = 8
_TINY = 1e-280


@dataclass(frozen=True)
class LatticePoint:
    t: int
    n: int

    def __post_init__(self):
        if self.t < 0 or self.n < 1:
            raise ValueError(f"lattice point needs t >= 0 and n >= 1, got {self}")

    @property
    def reachable(self) -> bool:
        return self.n <= self.t + 1


@dataclass
class LogPartitionField:
    """log Z(t, n) over {0..t_max} x {1..n_max}; ``-inf`` encodes Z = 0."""

    values: np.ndarray  # shape (t_max + 1, n_max), values[t, n-1]

    @property
    def t_max(self) -> int:
        return self.values.shape[0] - 1

    @property
    def n_max(self) -> int:
        return self.values.shape[1]

    def __getitem__(self, point) -> float:
        t, n = point
        return float(self.values[t, n - 1])

    def partition(self, t: int, n: int) -> float:
        return math.exp(self[t, n])


def field_from_weights(weights: np.ndarray, log_weights: bool = False) -> LogPartitionField:
    """Run the log-space recursion over a frozen table of horizontal weights.

    ``weights`` has shape (t_max, n_max); entry [t, n-1] weighs the edge
    (t, n) -> (t+1, n).
    """
    logw = np.asarray(weights, dtype=float)
    if not log_weights:
        with np.errstate(divide="ignore"):
            logw = np.log(logw)
    t_max, n_max = logw.shape
    out = np.full((t_max + 1, n_max), -np.inf)
    out[0, 0] = 0.0
    for t in range(t_max):
        prev = out[t]
        out[t + 1] = prev + logw[t]
        out[t + 1, 1:] = np.logaddexp(out[t + 1, 1:], prev[:-1])
    return LogPartitionField(out)


def simulate_field(
    params: GammaParams, t_max: int, n_max: int, rng: np.random.Generator
) -> LogPartitionField:
    """One joint sample of log Z over the window, with fresh Gamma weights."""
    if t_max < 0 or n_max < 1:
        raise ValueError("need t_max >= 0 and n_max >= 1")
    weights = rng.gamma(params.shape, params.scale, size=(t_max, n_max))
    return field_from_weights(weights)


def enumerate_paths_oracle(weights: np.ndarray, target: LatticePoint | tuple) -> float:
    """Z(t, n) by brute-force summation over all admissible paths.

    A path to (t, n) is a choice of which n-1 of its t steps are diagonal.
    Only meant for small lattices (t <= 12).
    """
    t, n = (target.t, target.n) if isinstance(target, LatticePoint) else target
    if n < 1 or n > t + 1:
        return 0.0
    weights = np.asarray(weights, dtype=float)
    total = 0.0
    for diagonal_steps in itertools.combinations(range(t), n - 1):
        level = 1
        prod = 1.0
        diag = set(diagonal_steps)
        for s in range(t):
            if s in diag:
                level += 1
            else:
                prod *= float(weights[s, level - 1])
        total += prod
    return total


def _log_column_block(shape: float, t: int, n_max: int, size: int, rng) -> np.ndarray:
    """log Z(t, 1..n_max) for ``size`` replicas with unit scale weights.

    Linear arithmetic on columns that are periodically rescaled by their
    per-replica maximum; cells are stored as rows so the diagonal shift is a
    contiguous slice.
    """
    z = np.zeros((n_max, size))
    z[0] = 1.0
    buf = np.zeros_like(z)
    logscale = np.zeros(size)
    for s in range(t):
        hi = min(s + 1, n_max - 1)  # last row that can be nonzero at time s+1
        rows = slice(0, hi + 1)
        if shape == 1.0:
            rng.standard_exponential(out=buf[rows])
        else:
            rng.standard_gamma(shape, out=buf[rows])
        buf[rows] *= z[rows]
        buf[1 : hi + 1] += z[0:hi]
        z, buf = buf, z
        if (s + 1) % _RENORM_EVERY == 0 or s + 1 == t:
            m = z[rows].max(axis=0)
            z[rows] /= m
            z[rows][z[rows] < _TINY] = 0.0
            logscale += np.log(m)
    with np.errstate(divide="ignore"):
        return (np.log(z) + logscale).T


def sample_log_partition(
    params: GammaParams,
    t: int,
    n_max: int,
    replicas: int,
    seed: int,
    threads: int = 1,
    tag: int = 1,
) -> np.ndarray:
    """i.i.d. samples of the column log Z(t, 1..n_max); shape (replicas, n_max).

    Each path to (t, n) has exactly t-n+1 horizontal edges, so the scale
    enters as the exact shift (t-n+1) log theta; the recursion itself runs
    with unit-scale weights.
    """
    if t < 0 or n_max < 1 or replicas < 1:
        raise ValueError("need t >= 0, n_max >= 1, replicas >= 1")
    logs = map_blocks(
        lambda size, rng: _log_column_block(params.shape, t, n_max, size, rng),
        replicas,
        seed,
        tag=tag,
        threads=threads,
    )
    horizontal = t - np.arange(n_max)  # t - (n-1) for n = 1..n_max
    return logs + horizontal * math.log(params.scale)


def sample_free_energy(
    params: GammaParams,
    kappa: int,
    n: int,
    replicas: int,
    seed: int,
    threads: int = 1,
) -> np.ndarray:
    """``replicas`` i.i.d. samples of log Z(kappa n, n)."""
    if kappa < 1 or n < 1:
        raise ValueError("need kappa >= 1 and n >= 1")
    t = int(kappa) * int(n)
    col = sample_log_partition(params, t, n, replicas, seed, threads=threads, tag=2)
    return col[:, n - 1]
