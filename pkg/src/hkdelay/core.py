"""Shared vocabulary: opinion vectors, influence kernels, delays, initial histories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, InvalidArgumentError, OutOfRangeError

__all__ = [
    "as_vec",
    "Kernel",
    "DelayConfig",
    "HistoryFunction",
    "HistoryBlock",
    "ModelConfig",
    "kernel_min_on_ball",
    "grid_min_on_ball",
    "history_eval",
]

# integer tags understood by the hot kernels in ``_hot``
FAMILY_CODES = {"constant": 0, "inverse_power": 1, "truncated_exponential": 2}


def as_vec(x, dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float64 array."""
    v = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if v.ndim != 1 or v.size == 0:
        raise InvalidArgumentError(f"expected a non-empty vector, got shape {v.shape}")
    if dim is not None and v.size != dim:
        raise InvalidArgumentError(f"expected dimension {dim}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError("vector has non-finite components")
    return v


@dataclass(frozen=True)
class Kernel:
    """Positive, bounded, Lipschitz influence function h(|x - y|).

    Families and parameters:

    * ``constant``: ``c``
    * ``inverse_power``: ``c / (1 + |x-y|^2) ** beta``
    * ``truncated_exponential``: ``c * exp(-|x-y|^2 / sigma^2) + floor``
    """

    family: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.family not in FAMILY_CODES:
            raise ConfigurationError(f"unknown kernel family {self.family!r}")
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        expected = {"constant": 1, "inverse_power": 2, "truncated_exponential": 3}[self.family]
        if len(params) != expected:
            raise ConfigurationError(f"{self.family} takes {expected} parameters, got {len(params)}")
        if not all(math.isfinite(p) for p in params):
            raise ConfigurationError("kernel parameters must be finite")
        if params[0] <= 0:
            raise ConfigurationError("kernel amplitude c must be positive")
        if self.family == "inverse_power" and params[1] <= 0:
            raise ConfigurationError("inverse_power exponent beta must be positive")
        if self.family == "truncated_exponential" and (params[1] <= 0 or params[2] <= 0):
            raise ConfigurationError("truncated_exponential needs sigma > 0 and floor > 0")

    @classmethod
    def constant(cls, c: float = 1.0) -> Kernel:
        return cls("constant", (c,))

    @classmethod
    def inverse_power(cls, c: float = 1.0, beta: float = 1.0) -> Kernel:
        return cls("inverse_power", (c, beta))

    @classmethod
    def truncated_exponential(cls, c: float = 1.0, sigma: float = 1.0, floor: float = 0.05) -> Kernel:
        return cls("truncated_exponential", (c, sigma, floor))

    @classmethod
    def from_dict(cls, doc: dict) -> Kernel:
        doc = dict(doc)
        family = doc.pop("family", None)
        names = {
            "constant": ("c",),
            "inverse_power": ("c", "beta"),
            "truncated_exponential": ("c", "sigma", "floor"),
        }
        if family not in names:
            raise ConfigurationError(f"unknown kernel family {family!r}")
        missing = [n for n in names[family] if n not in doc]
        extra = sorted(set(doc) - set(names[family]))
        if missing or extra:
            raise ConfigurationError(f"{family}: missing {missing}, unexpected {extra}")
        return cls(family, tuple(doc[n] for n in names[family]))

    def to_dict(self) -> dict:
        names = {
            "constant": ("c",),
            "inverse_power": ("c", "beta"),
            "truncated_exponential": ("c", "sigma", "floor"),
        }[self.family]
        return {"family": self.family, **dict(zip(names, self.params))}

    @property
    def code(self) -> int:
        return FAMILY_CODES[self.family]

    @property
    def param_array(self) -> np.ndarray:
        out = np.zeros(3)
        out[: len(self.params)] = self.params
        return out

    def profile(self, r2):
        """Kernel value as a function of the squared separation."""
        r2 = np.asarray(r2, dtype=np.float64)
        p = self.params
        if self.family == "constant":
            return np.full_like(r2, p[0])
        if self.family == "inverse_power":
            return p[0] / (1.0 + r2) ** p[1]
        return p[0] * np.exp(-r2 / (p[1] * p[1])) + p[2]

    def __call__(self, x, y) -> float:
        diff = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
        return float(self.profile(np.dot(diff, diff)))

    eval = __call__

    @property
    def sup_bound(self) -> float:
        p = self.params
        if self.family == "truncated_exponential":
            return p[0] + p[2]
        return p[0]

    @property
    def lipschitz_const(self) -> float:
        """Joint Lipschitz constant L with |k(x,y) - k(x',y')| <= L (|x-x'| + |y-y'|)."""
        p = self.params
        if self.family == "constant":
            return 0.0
        if self.family == "inverse_power":
            c, beta = p
            r = 1.0 / math.sqrt(2.0 * beta + 1.0)
            return 2.0 * beta * c * r * (1.0 + r * r) ** (-beta - 1.0)
        c, sigma, _ = p
        return c * math.sqrt(2.0) / sigma * math.exp(-0.5)

    @property
    def radially_decreasing(self) -> bool:
        return True


def grid_min_on_ball(k: Kernel, radius: float, points: int = 33) -> float:
    """Grid minimum of ``k`` over pairs on a diameter of the ball.

    Both arguments range over ``t * e1`` with ``t`` in ``[-radius, radius]``.
    The coarse lattice is refined once around its argmin; the smaller of the
    two minima is returned.
    """
    if not math.isfinite(radius) or radius < 0:
        raise InvalidArgumentError(f"radius must be finite and >= 0, got {radius}")
    if radius == 0.0:
        return float(k.profile(0.0))

    def lattice_min(lo_a, hi_a, lo_b, hi_b):
        a = np.linspace(lo_a, hi_a, points)
        b = np.linspace(lo_b, hi_b, points)
        vals = k.profile((a[:, None] - b[None, :]) ** 2)
        i, j = np.unravel_index(np.argmin(vals), vals.shape)
        return float(vals[i, j]), a[i], b[j]

    coarse, a0, b0 = lattice_min(-radius, radius, -radius, radius)
    h = 2.0 * radius / (points - 1)
    fine, _, _ = lattice_min(
        max(-radius, a0 - h), min(radius, a0 + h), max(-radius, b0 - h), min(radius, b0 + h)
    )
    return min(coarse, fine)


def kernel_min_on_ball(k: Kernel, radius: float) -> float:
    """min of k(z1, z2) over |z1|, |z2| <= radius."""
    if not math.isfinite(radius) or radius < 0:
        raise InvalidArgumentError(f"radius must be finite and >= 0, got {radius}")
    if k.radially_decreasing:
        # farthest admissible separation is the diameter 2 * radius
        return float(k.profile((2.0 * radius) ** 2))
    return grid_min_on_ball(k, radius)


@dataclass(frozen=True)
class DelayConfig:
    tau1: float = 0.0
    tau2: float = 0.0

    def __post_init__(self):
        for name in ("tau1", "tau2"):
            val = float(getattr(self, name))
            if not math.isfinite(val) or val < 0:
                raise ConfigurationError(f"{name} must be finite and >= 0, got {val}")
            object.__setattr__(self, name, val)

    @property
    def tau(self) -> float:
        return max(self.tau1, self.tau2)

    def as_tuple(self) -> tuple[float, float]:
        return (self.tau1, self.tau2)


@dataclass(frozen=True, eq=False)
class HistoryFunction:
    """Piecewise-linear path on [-tau, 0] through ``(times[k], values[k])``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64).reshape(-1)
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != t.size or t.size == 0:
            raise InvalidArgumentError("history needs one value row per sample time")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise InvalidArgumentError("history samples must be finite")
        if t[-1] != 0.0:
            raise InvalidArgumentError(f"last history sample must be at t=0, got {t[-1]}")
        if np.any(np.diff(t) <= 0):
            raise InvalidArgumentError("history sample times must be strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value, tau: float) -> HistoryFunction:
        v = as_vec(value)
        if tau == 0:
            return cls(np.array([0.0]), v[None, :])
        return cls(np.array([-tau, 0.0]), np.stack([v, v]))

    @classmethod
    def linear(cls, start, end, tau: float) -> HistoryFunction:
        """Straight path from ``start`` at -tau to ``end`` at 0."""
        a = as_vec(start)
        b = as_vec(end, dim=a.size)
        if tau == 0:
            return cls(np.array([0.0]), b[None, :])
        return cls(np.array([-tau, 0.0]), np.stack([a, b]))

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __call__(self, t: float) -> np.ndarray:
        return history_eval(self, t)

    def shifted(self, offset) -> HistoryFunction:
        return HistoryFunction(self.times, self.values + as_vec(offset, self.dim))

    def slope_max(self) -> float:
        if self.times.size < 2:
            return 0.0
        steps = np.linalg.norm(np.diff(self.values, axis=0), axis=1)
        return float(np.max(steps / np.diff(self.times)))

    def max_norm(self, interior: int = 8) -> float:
        """Max of |h(s)| over knots plus ``interior`` points inside every segment."""
        norms = [np.linalg.norm(self.values, axis=1)]
        if self.times.size > 1 and interior > 0:
            theta = np.arange(1, interior + 1) / (interior + 1)
            a, b = self.values[:-1], self.values[1:]
            pts = a[:, None, :] + theta[None, :, None] * (b - a)[:, None, :]
            norms.append(np.linalg.norm(pts, axis=2).ravel())
        return float(max(np.max(n) for n in norms))


def history_eval(h: HistoryFunction, t: float) -> np.ndarray:
    """Evaluate the piecewise-linear history at ``t`` in [h.start, 0]."""
    t = float(t)
    if not (h.start <= t <= 0.0):
        raise OutOfRangeError(f"t={t} outside history span [{h.start}, 0]")
    times = h.times
    if times.size == 1:
        return h.values[0].copy()
    i = int(np.searchsorted(times, t, side="right")) - 1
    if i >= times.size - 1:
        return h.values[-1].copy()
    if t == times[i]:
        return h.values[i].copy()
    w = (t - times[i]) / (times[i + 1] - times[i])
    return (1.0 - w) * h.values[i] + w * h.values[i + 1]


class HistoryBlock:
    """A stack of histories evaluated together as one flat state vector.

    All knot times are merged into one grid; each component is linear between
    consecutive merged knots, so interpolation on that grid is exact.
    """

    def __init__(self, histories: Sequence[HistoryFunction]):
        histories = list(histories)
        if not histories:
            raise InvalidArgumentError("history block needs at least one history")
        starts = {h.start for h in histories}
        if len(starts) != 1:
            raise InvalidArgumentError(f"histories start at different times: {sorted(starts)}")
        self.start = histories[0].start
        self.dims = tuple(h.dim for h in histories)
        grid = np.unique(np.concatenate([h.times for h in histories]))
        cols = []
        for h in histories:
            cols.append(np.stack([np.interp(grid, h.times, h.values[:, c]) for c in range(h.dim)], axis=1))
        self.times = grid
        self.values = np.concatenate(cols, axis=1)  # (len(grid), total)
        self.times.setflags(write=False)
        self.values.setflags(write=False)

    @property
    def size(self) -> int:
        return self.values.shape[1]

    def __call__(self, t: float) -> np.ndarray:
        times = self.times
        if not (self.start <= t <= 0.0):
            raise OutOfRangeError(f"t={t} outside history span [{self.start}, 0]")
        if times.size == 1:
            return self.values[0].copy()
        i = int(np.searchsorted(times, t, side="right")) - 1
        if i >= times.size - 1:
            return self.values[-1].copy()
        if t == times[i]:
            return self.values[i].copy()
        w = (t - times[i]) / (times[i + 1] - times[i])
        return (1.0 - w) * self.values[i] + w * self.values[i + 1]


@dataclass(frozen=True, eq=False)
class ModelConfig:
    """Parameters and initial data of the delayed leader-follower system."""

    psi: Kernel
    phi: Kernel
    rho: Kernel
    delays: DelayConfig
    leader_histories: tuple[HistoryFunction, ...]
    follower_histories: tuple[HistoryFunction, ...]
    _dim: int = field(init=False, repr=False)

    def __post_init__(self):
        leaders = tuple(self.leader_histories)
        followers = tuple(self.follower_histories)
        object.__setattr__(self, "leader_histories", leaders)
        object.__setattr__(self, "follower_histories", followers)
        m, n = len(leaders), len(followers)
        if not (n > m >= 2):
            raise ConfigurationError(f"need N > m >= 2 agents, got m={m}, N={n}")
        dims = {h.dim for h in leaders + followers}
        if len(dims) != 1:
            raise ConfigurationError(f"histories have mixed dimensions {sorted(dims)}")
        tau = self.delays.tau
        for h in leaders + followers:
            if h.start != -tau:
                raise ConfigurationError(f"history starts at {h.start}, expected -tau={-tau}")
        object.__setattr__(self, "_dim", dims.pop())

    @property
    def m(self) -> int:
        return len(self.leader_histories)

    @property
    def N(self) -> int:
        return len(self.follower_histories)

    @property
    def d(self) -> int:
        return self._dim

    @property
    def tau(self) -> float:
        return self.delays.tau

    @property
    def kernels(self) -> tuple[Kernel, Kernel, Kernel]:
        return (self.psi, self.phi, self.rho)

    def histories(self) -> tuple[HistoryFunction, ...]:
        return self.leader_histories + self.follower_histories

    def shifted(self, offset) -> ModelConfig:
        return ModelConfig(
            self.psi,
            self.phi,
            self.rho,
            self.delays,
            tuple(h.shifted(offset) for h in self.leader_histories),
            tuple(h.shifted(offset) for h in self.follower_histories),
        )
