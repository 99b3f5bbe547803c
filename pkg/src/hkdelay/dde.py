"""Fixed-step RK4 for delay differential equations with Hermite dense output.

The right-hand side is called as ``rhs(t, x, lagged)`` where ``lagged`` holds
the state at ``t - delays[k]`` for every requested delay. Lagged values come
from the interpolant that has already been committed, which is why every
positive delay must be at least one step long.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .core import HistoryBlock
from .errors import DivergenceError, InvalidArgumentError, OutOfRangeError

__all__ = ["DenseSolution", "integrate", "solution_eval"]

Rhs = Callable[[float, np.ndarray, tuple], np.ndarray]


class DenseSolution:
    """Trajectory on [history.start, t_end].

    Past the history it is piecewise cubic Hermite through the grid values
    and derivatives, hence C1 at interior grid points.
    """

    def __init__(self, history: HistoryBlock, times: np.ndarray, values: np.ndarray, derivs: np.ndarray):
        self.history = history
        self.times = times
        self.values = values
        self.derivs = derivs
        for a in (times, values, derivs):
            a.setflags(write=False)

    @property
    def t_start(self) -> float:
        return self.history.start

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def size(self) -> int:
        return self.values.shape[1]

    def __call__(self, t: float) -> np.ndarray:
        return solution_eval(self, t)

    def eval_many(self, ts) -> np.ndarray:
        """Vectorized evaluation at an array of times, shape (len(ts), size)."""
        ts = np.asarray(ts, dtype=np.float64).reshape(-1)
        out = np.empty((ts.size, self.size))
        if ts.size and (ts.min() < self.t_start or ts.max() > self.t_end):
            raise OutOfRangeError(f"times outside [{self.t_start}, {self.t_end}]")
        past = ts <= 0.0
        for k in np.flatnonzero(past):
            out[k] = self.history(ts[k])
        fut = ~past
        if np.any(fut):
            out[fut] = _hermite(self.times, self.values, self.derivs, ts[fut])
        return out


def _hermite(times, values, derivs, ts):
    i = np.searchsorted(times, ts, side="right") - 1
    i = np.clip(i, 0, times.size - 2)
    t0, t1 = times[i], times[i + 1]
    h = t1 - t0
    s = ((ts - t0) / h)[:, None]
    hh = h[:, None]
    s2 = s * s
    # increment form: exact for constant data
    h01 = s2 * (3 - 2 * s)
    h10 = s * (1 - s) * (1 - s)
    h11 = s2 * (s - 1)
    return values[i] + h01 * (values[i + 1] - values[i]) + hh * (h10 * derivs[i] + h11 * derivs[i + 1])


def _hermite_one(times, values, derivs, t, count):
    """Single-time Hermite lookup restricted to the first ``count`` grid nodes."""
    i = int(np.searchsorted(times[:count], t, side="right")) - 1
    if i >= count - 1:
        i = count - 2
    t0 = times[i]
    if t == t0:
        return values[i]
    h = times[i + 1] - t0
    s = (t - t0) / h
    s2 = s * s
    return (
        values[i]
        + (s2 * (3 - 2 * s)) * (values[i + 1] - values[i])
        + h * ((s * (1 - s) * (1 - s)) * derivs[i] + (s2 * (s - 1)) * derivs[i + 1])
    )


def solution_eval(sol: DenseSolution, t: float) -> np.ndarray:
    t = float(t)
    if not (sol.t_start <= t <= sol.t_end):
        raise OutOfRangeError(f"t={t} outside [{sol.t_start}, {sol.t_end}]")
    if t <= 0.0:
        return sol.history(t)
    return np.array(_hermite_one(sol.times, sol.values, sol.derivs, t, sol.times.size))


def integrate(
    rhs: Rhs,
    history: HistoryBlock,
    t_end: float,
    step: float,
    delays: Sequence[float] = (),
) -> DenseSolution:
    """Integrate ``x' = rhs(t, x, (x(t - d) for d in delays))`` from 0 to ``t_end``.

    Grid nodes are ``k * step``; a final shorter step lands exactly on
    ``t_end``. The state update is accumulated with Kahan compensation so the
    global error keeps its fourth-order behaviour down to small steps.
    """
    delays = tuple(float(d) for d in delays)
    step = float(step)
    t_end = float(t_end)
    if not (math.isfinite(step) and step > 0):
        raise InvalidArgumentError(f"step must be positive and finite, got {step}")
    if not (math.isfinite(t_end) and t_end >= 0):
        raise InvalidArgumentError(f"t_end must be finite and >= 0, got {t_end}")
    for d in delays:
        if not math.isfinite(d) or d < 0:
            raise InvalidArgumentError(f"delays must be finite and >= 0, got {d}")
        if d > 0 and step > d:
            raise InvalidArgumentError(f"step {step} exceeds delay {d}; lagged lookups would be uncommitted")
        if -d < history.start:
            raise InvalidArgumentError(f"history starts at {history.start}, delay {d} reaches further back")

    n_full = int(math.floor(t_end / step + 1e-9))
    grid = np.arange(n_full + 1) * step
    if t_end - grid[-1] > 1e-12 * max(1.0, t_end):
        grid = np.append(grid, t_end)
    else:
        grid[-1] = t_end
    n_nodes = grid.size
    y0 = np.asarray(history(0.0), dtype=np.float64)
    size = y0.size
    Y = np.empty((n_nodes, size))
    F = np.empty((n_nodes, size))
    Y[0] = y0

    def lagged(t, x, count):
        # count = number of grid nodes whose derivative is already known
        out = []
        limit = grid[count - 1] if count > 0 else 0.0
        for d in delays:
            if d == 0.0:
                out.append(x)
                continue
            s = t - d
            if s <= 0.0:
                out.append(history(max(s, history.start)))
            else:
                # rounding can push s a hair past the committed range
                s = min(s, limit)
                if count < 2:
                    out.append(history(0.0) if s <= 0.0 else Y[0])
                else:
                    out.append(_hermite_one(grid, Y, F, s, count))
        return tuple(out)

    def f(t, x, count):
        dx = np.asarray(rhs(t, x, lagged(t, x, count)), dtype=np.float64)
        if dx.shape != (size,):
            raise InvalidArgumentError(f"rhs returned shape {dx.shape}, expected ({size},)")
        return dx

    y = y0.copy()
    comp = np.zeros(size)
    with np.errstate(over="ignore", invalid="ignore"):
        _march(grid, Y, F, f, y, comp)
    return DenseSolution(history, grid, Y, F)


def _march(grid, Y, F, f, y, comp):
    n_nodes = grid.size
    for k in range(n_nodes - 1):
        t = grid[k]
        h = grid[k + 1] - t
        # k1 may only see the interpolant up to node k-1
        k1 = f(t, y, k)
        F[k] = k1
        k2 = f(t + 0.5 * h, y + (0.5 * h) * k1, k + 1)
        k3 = f(t + 0.5 * h, y + (0.5 * h) * k2, k + 1)
        k4 = f(t + h, y + h * k3, k + 1)
        incr = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        # compensated summation y += incr
        corrected = incr - comp
        new = y + corrected
        comp = (new - y) - corrected
        y = new
        if not np.all(np.isfinite(y)):
            raise DivergenceError(grid[k + 1])
        Y[k + 1] = y
    F[n_nodes - 1] = f(grid[-1], y, n_nodes - 1)
    if not np.all(np.isfinite(F)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(F), axis=1))[0])
        raise DivergenceError(grid[bad])
