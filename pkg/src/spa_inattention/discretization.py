"""Finite state spaces: the income Markov chain and the asset and AIME grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .exceptions import DomainError


@dataclass(frozen=True)
class MarkovChain:
    nodes: np.ndarray
    transition: np.ndarray
    initial: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("chain nodes must be strictly increasing")
        if not np.allclose(self.transition.sum(axis=1), 1.0, atol=1e-12, rtol=0):
            raise ValueError("transition rows must sum to 1")

    @property
    def n(self) -> int:
        return len(self.nodes)

    def stationary(self) -> np.ndarray:
        vals, vecs = np.linalg.eig(self.transition.T)
        v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
        return v / v.sum()

    def to_rows(self):
        for i, node in enumerate(self.nodes):
            yield [i, node, self.initial[i], *self.transition[i]]


@dataclass(frozen=True)
class Grid:
    points: np.ndarray
    rule: str = "power"

    def __post_init__(self):
        if np.any(np.diff(self.points) <= 0):
            raise ValueError("grid points must be strictly increasing")

    def __len__(self):
        return len(self.points)

    @property
    def min(self) -> float:
        return float(self.points[0])

    @property
    def max(self) -> float:
        return float(self.points[-1])


def discretize_ar1(rho: float, sigma: float, n: int, sigma_init: float | None = None) -> MarkovChain:
    """Rouwenhorst chain for eps' = rho * eps + N(0, sigma**2).

    The chain matches the stationary variance sigma**2 / (1 - rho**2)
    exactly. ``initial`` bins N(0, sigma_init**2) onto the nodes (defaults
    to the chain's stationary law).
    """
    if n < 2:
        raise ValueError("need at least two nodes")
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")

    p = (1.0 + rho) / 2.0
    P = np.array([[p, 1.0 - p], [1.0 - p, p]])
    for m in range(3, n + 1):
        Q = np.zeros((m, m))
        Q[:-1, :-1] += p * P
        Q[:-1, 1:] += (1.0 - p) * P
        Q[1:, :-1] += (1.0 - p) * P
        Q[1:, 1:] += p * P
        Q[1:-1] /= 2.0
        P = Q
    psi = np.sqrt(n - 1) * sigma / np.sqrt(1.0 - rho**2)
    nodes = np.linspace(-psi, psi, n)

    chain = MarkovChain(nodes, P, np.full(n, 1.0 / n))
    if sigma_init is None:
        initial = chain.stationary()
    else:
        initial = normal_on_nodes(nodes, sigma_init)
    return MarkovChain(nodes, P, initial)


def normal_on_nodes(nodes: np.ndarray, sd: float) -> np.ndarray:
    """Probabilities of N(0, sd**2) on the bins around each node."""
    if sd == 0.0:
        w = np.zeros(len(nodes))
        dist = np.abs(nodes)
        closest = np.flatnonzero(np.isclose(dist, dist.min(), rtol=0, atol=1e-12))
        w[closest] = 1.0 / len(closest)
        return w
    cuts = (nodes[1:] + nodes[:-1]) / 2.0
    cdf = np.concatenate([[0.0], norm.cdf(cuts / sd), [1.0]])
    return np.diff(cdf)


def build_grid(lo: float, hi: float, n: int, curvature: float = 1.0) -> Grid:
    """Points lo + (hi - lo) * (i / (n - 1)) ** curvature."""
    if not lo < hi:
        raise ValueError("grid minimum must be below its maximum")
    if n < 2:
        raise ValueError("grid needs at least two points")
    if curvature < 1.0:
        raise ValueError("curvature must be >= 1")
    frac = (np.arange(n) / (n - 1)) ** curvature
    points = lo + (hi - lo) * frac
    points[-1] = hi
    return Grid(points, rule=f"power({curvature})")


def snap_down(value, grid: Grid):
    """Index of the largest grid point not exceeding ``value``."""
    value = np.asarray(value, dtype=float)
    if np.any(value < grid.points[0]):
        raise DomainError("value below the grid minimum")
    idx = np.searchsorted(grid.points, value, side="right") - 1
    return int(idx) if idx.ndim == 0 else idx


def interp_weights(values, points: np.ndarray):
    """Lower bracketing index and weight on the upper node, clamped to the grid."""
    values = np.clip(np.asarray(values, dtype=float), points[0], points[-1])
    lo = np.clip(np.searchsorted(points, values, side="right") - 1, 0, len(points) - 2)
    w = (values - points[lo]) / (points[lo + 1] - points[lo])
    return lo, w
