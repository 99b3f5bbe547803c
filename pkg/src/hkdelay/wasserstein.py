"""Exact Wasserstein distances between empirical measures.

Equal-size uniform clouds reduce to permutations: d_p is an optimal
assignment (Hungarian method) and d_inf a bottleneck assignment (threshold
search with maximum matching). Weighted clouds are handled exactly in one
dimension through the monotone coupling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _hot
from .errors import UnsupportedInputError
from .meanfield import EmpiricalMeasure

__all__ = [
    "TransportPlan",
    "cost_matrix",
    "distance_matrix",
    "assignment_cost",
    "dp_uniform",
    "dinf_uniform",
    "dp_1d",
    "wasserstein",
]


@dataclass(frozen=True)
class TransportPlan:
    pairs: tuple[tuple[int, int, float], ...]  # (source atom, target atom, mass)
    cost: float

    def marginals(self, n_source: int, n_target: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = np.zeros(n_source), np.zeros(n_target)
        for i, j, mass in self.pairs:
            a[i] += mass
            b[j] += mass
        return a, b


def distance_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    return np.sqrt(np.einsum("ijc,ijc->ij", diff, diff))


def cost_matrix(x: np.ndarray, y: np.ndarray, p: float) -> np.ndarray:
    """|x_i - y_j|^p; squared distances are formed directly for p = 2."""
    diff = x[:, None, :] - y[None, :, :]
    sq = np.einsum("ijc,ijc->ij", diff, diff)
    if p == 2:
        return sq
    dist = np.sqrt(sq)
    return dist if p == 1 else dist**p


def assignment_cost(cost: np.ndarray, perm) -> float:
    """Correctly rounded sum of ``cost[i, perm[i]]``, so the value does not depend on row order."""
    return math.fsum(cost[i, j] for i, j in enumerate(perm))


def _check_uniform_pair(a: EmpiricalMeasure, b: EmpiricalMeasure):
    if a.size != b.size:
        raise UnsupportedInputError(f"atom counts differ ({a.size} vs {b.size})")
    if a.dim != b.dim:
        raise UnsupportedInputError("measures live in different dimensions")
    if not (a.is_uniform and b.is_uniform):
        raise UnsupportedInputError("assignment formulation needs uniform weights")


def dp_uniform(a: EmpiricalMeasure, b: EmpiricalMeasure, p: float) -> tuple[float, TransportPlan]:
    """d_p between two uniform clouds of equal size, with the optimal permutation plan."""
    if not (p >= 1 and math.isfinite(p)):
        raise UnsupportedInputError(f"p must be finite and >= 1, got {p}")
    _check_uniform_pair(a, b)
    n = a.size
    cost = cost_matrix(a.atoms, b.atoms, p)
    perm = _hot.hungarian(np.ascontiguousarray(cost))
    total = assignment_cost(cost, perm)
    pairs = tuple((i, int(j), 1.0 / n) for i, j in enumerate(perm))
    return (total / n) ** (1.0 / p), TransportPlan(pairs, total / n)


def dinf_uniform(a: EmpiricalMeasure, b: EmpiricalMeasure) -> tuple[float, TransportPlan]:
    """d_inf between two uniform clouds of equal size: the smallest achievable max matched distance."""
    _check_uniform_pair(a, b)
    n = a.size
    dist = distance_matrix(a.atoms, b.atoms)
    levels = np.unique(dist)
    lo, hi = 0, levels.size - 1
    best = None
    # smallest level whose threshold graph has a perfect matching
    while lo <= hi:
        mid = (lo + hi) // 2
        size, match = _hot.hopcroft_karp(np.ascontiguousarray(dist <= levels[mid]))
        if size == n:
            best = (levels[mid], match)
            hi = mid - 1
        else:
            lo = mid + 1
    value, match = best
    pairs = tuple((i, int(j), 1.0 / n) for i, j in enumerate(match))
    return float(value), TransportPlan(pairs, float(value))


def dp_1d(a: EmpiricalMeasure, b: EmpiricalMeasure, p: float) -> float:
    """d_p on the line for arbitrary weights via the quantile coupling."""
    if a.dim != 1 or b.dim != 1:
        raise UnsupportedInputError("dp_1d needs one-dimensional measures")
    if not p >= 1:
        raise UnsupportedInputError(f"p must be >= 1, got {p}")
    oa = np.argsort(a.atoms[:, 0], kind="stable")
    ob = np.argsort(b.atoms[:, 0], kind="stable")
    xa, xb = a.atoms[oa, 0], b.atoms[ob, 0]
    ca, cb = np.cumsum(a.weights[oa]), np.cumsum(b.weights[ob])
    ca[-1] = cb[-1] = 1.0
    # merged cumulative-weight grid; on each piece both quantile functions are constant
    grid = np.union1d(ca, cb)
    lengths = np.diff(grid, prepend=0.0)
    mids = grid - 0.5 * lengths
    ia = np.minimum(np.searchsorted(ca, mids), xa.size - 1)
    ib = np.minimum(np.searchsorted(cb, mids), xb.size - 1)
    gaps = np.abs(xa[ia] - xb[ib])
    if math.isinf(p):
        return float(np.max(gaps[lengths > 0]))
    return float(np.sum(lengths * gaps**p) ** (1.0 / p))


def wasserstein(a: EmpiricalMeasure, b: EmpiricalMeasure, p: float) -> float:
    """d_p for p in [1, inf], dispatching to the exact solver that applies."""
    uniform_pair = a.size == b.size and a.is_uniform and b.is_uniform
    if uniform_pair:
        if math.isinf(p):
            return dinf_uniform(a, b)[0]
        return dp_uniform(a, b, p)[0]
    if a.dim == 1 and b.dim == 1 and math.isfinite(p):
        return dp_1d(a, b, p)
    raise UnsupportedInputError("exact d_p needs equal-size uniform clouds, or finite p in one dimension")
