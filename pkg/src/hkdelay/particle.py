"""Delayed leader-follower opinion dynamics for finitely many agents.

Leaders y_1..y_m only listen to (delayed) leaders; followers x_1..x_N listen
to delayed followers and delayed leaders, with weights 1/m and 1/N.
The stacked state is ``[y_1, ..., y_m, x_1, ..., x_N]`` flattened row-major.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _hot
from .core import DelayConfig, HistoryBlock, HistoryFunction, Kernel, ModelConfig, kernel_min_on_ball
from .dde import DenseSolution, integrate
from .errors import ConfigurationError, InvalidArgumentError, OutOfRangeError

__all__ = [
    "ParticleState",
    "ConsensusCertificate",
    "CertificateCheck",
    "particle_rhs",
    "simulate",
    "state_at",
    "diameter",
    "windowed_diameter",
    "windowed_diameters",
    "directional_extremes",
    "interaction_bound",
    "initial_bound",
    "contraction_constants",
    "decay_checks",
    "certificate",
]

DEFAULT_SAMPLES_PER_WINDOW = 32


@dataclass(frozen=True, eq=False)
class ParticleState:
    leaders: np.ndarray  # (m, d)
    followers: np.ndarray  # (N, d)
    t: float = 0.0

    def __post_init__(self):
        y = np.atleast_2d(np.asarray(self.leaders, dtype=np.float64))
        x = np.atleast_2d(np.asarray(self.followers, dtype=np.float64))
        if y.shape[1] != x.shape[1]:
            raise InvalidArgumentError("leaders and followers live in different dimensions")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise InvalidArgumentError("state has non-finite entries")
        object.__setattr__(self, "leaders", y)
        object.__setattr__(self, "followers", x)

    @classmethod
    def from_stacked(cls, vec, m: int, dim: int, t: float = 0.0) -> ParticleState:
        vec = np.asarray(vec, dtype=np.float64)
        return cls(vec[: m * dim].reshape(m, dim), vec[m * dim :].reshape(-1, dim), t)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.leaders.ravel(), self.followers.ravel()])

    def points(self) -> np.ndarray:
        return np.concatenate([self.leaders, self.followers])


# ---------------------------------------------------------------------------
# dynamics


def _rhs_parts(leaders, followers, lag_leaders, lag_followers, w_lead, w_follow, psi, phi, rho):
    dy = _hot.attract(leaders, lag_leaders, w_lead, psi.code, psi.param_array)
    dx = _hot.attract(followers, lag_followers, w_follow, phi.code, phi.param_array)
    dx += _hot.attract(followers, lag_leaders, w_lead, rho.code, rho.param_array)
    return dy, dx


def particle_rhs(config: ModelConfig, t: float, current: ParticleState, delayed: Callable[[float], ParticleState]):
    """Time derivative ``(dy, dx)`` of the stacked system at ``t``.

    ``delayed(s)`` must return the state at ``s`` for ``s = t - tau1`` and
    ``s = t - tau2``.
    """
    tau1, tau2 = config.delays.as_tuple()
    lag1 = delayed(t - tau1) if tau1 > 0 else current
    lag2 = delayed(t - tau2) if tau2 > 0 else current
    w_lead = np.full(config.m, 1.0 / config.m)
    w_follow = np.full(config.N, 1.0 / config.N)
    return _rhs_parts(
        current.leaders, current.followers, lag1.leaders, lag2.followers,
        w_lead, w_follow, config.psi, config.phi, config.rho,
    )


def _stacked_rhs(m, n, dim, w_lead, w_follow, psi, phi, rho):
    split = m * dim
    w_lead = np.ascontiguousarray(w_lead, dtype=np.float64)
    w_follow = np.ascontiguousarray(w_follow, dtype=np.float64)

    def rhs(t, x, lagged):
        lag1, lag2 = lagged
        dy, dx = _rhs_parts(
            x[:split].reshape(m, dim),
            x[split:].reshape(n, dim),
            lag1[:split].reshape(m, dim),
            lag2[split:].reshape(n, dim),
            w_lead, w_follow, psi, phi, rho,
        )
        out = np.empty(x.shape[0])
        out[:split] = dy.ravel()
        out[split:] = dx.ravel()
        return out

    return rhs


def simulate_stacked(
    leader_histories: Sequence[HistoryFunction],
    follower_histories: Sequence[HistoryFunction],
    w_lead,
    w_follow,
    psi: Kernel,
    phi: Kernel,
    rho: Kernel,
    delays: DelayConfig,
    t_end: float,
    step: float,
) -> DenseSolution:
    """Integrate leaders and followers with arbitrary positive weights.

    The particle model is the case of uniform weights 1/m and 1/N; the
    mean-field systems on empirical measures reuse this with atom weights.
    """
    histories = list(leader_histories) + list(follower_histories)
    m, n = len(leader_histories), len(follower_histories)
    dims = {h.dim for h in histories}
    if len(dims) != 1:
        raise ConfigurationError(f"histories have mixed dimensions {sorted(dims)}")
    for h in histories:
        if h.start != -delays.tau:
            raise ConfigurationError(f"history starts at {h.start}, expected {-delays.tau}")
    rhs = _stacked_rhs(m, n, dims.pop(), w_lead, w_follow, psi, phi, rho)
    return integrate(rhs, HistoryBlock(histories), t_end, step, delays=delays.as_tuple())


def simulate(config: ModelConfig, t_end: float, step: float) -> DenseSolution:
    return simulate_stacked(
        config.leader_histories,
        config.follower_histories,
        np.full(config.m, 1.0 / config.m),
        np.full(config.N, 1.0 / config.N),
        config.psi, config.phi, config.rho,
        config.delays, t_end, step,
    )


def state_at(config: ModelConfig, sol: DenseSolution, t: float) -> ParticleState:
    return ParticleState.from_stacked(sol(t), config.m, config.d, t)


# ---------------------------------------------------------------------------
# diameters


def diameter(state: ParticleState) -> float:
    """Largest pairwise distance over leader, follower and mixed pairs."""
    return _hot.farthest_pair(np.ascontiguousarray(state.points()))[0]


def _cloud(sol: DenseSolution, dim: int, ts) -> np.ndarray:
    return sol.eval_many(ts).reshape(-1, dim)


def _window_times(sol: DenseSolution, a: float, b: float, sample_count: int) -> np.ndarray:
    ts = np.linspace(a, b, sample_count)
    if a < 0.0:
        # piecewise-linear histories attain their extremes at knots
        knots = sol.history.times
        ts = np.union1d(ts, knots[(knots >= a) & (knots <= min(b, 0.0))])
    return ts


def _check_window(sol: DenseSolution, a: float, b: float):
    if a > b:
        raise InvalidArgumentError(f"degenerate window [{a}, {b}]")
    if a < sol.t_start - 1e-12 or b > sol.t_end + 1e-12:
        raise OutOfRangeError(f"window [{a}, {b}] outside solution range [{sol.t_start}, {sol.t_end}]")


def window_diameter(sol: DenseSolution, dim: int, tau: float, n: int, sample_count: int) -> float:
    a, b = n * tau - tau, n * tau
    _check_window(sol, a, b)
    pts = _cloud(sol, dim, _window_times(sol, a, b, sample_count))
    return _hot.farthest_pair(np.ascontiguousarray(pts))[0]


def windowed_diameter(config: ModelConfig, sol: DenseSolution, n: int, sample_count: int = DEFAULT_SAMPLES_PER_WINDOW) -> float:
    """Sampled D_n: max distance between any two agents at any two times in [n*tau - tau, n*tau]."""
    if sample_count < 2:
        raise InvalidArgumentError("sample_count must be >= 2")
    return window_diameter(sol, config.d, config.tau, n, sample_count)


def windowed_diameters(config: ModelConfig, sol: DenseSolution, sample_count: int = DEFAULT_SAMPLES_PER_WINDOW) -> np.ndarray:
    """D_0, D_1, ... for every window that fits inside the solution."""
    return _windowed_sequence(sol, config.d, config.tau, sample_count)


def _windowed_sequence(sol, dim, tau, sample_count):
    if tau == 0.0:
        return np.array([window_diameter(sol, dim, 0.0, 0, sample_count)])
    count = int(math.floor(sol.t_end / tau + 1e-9)) + 1
    return np.array([window_diameter(sol, dim, tau, n, sample_count) for n in range(count)])


def directional_extremes(
    config: ModelConfig,
    sol: DenseSolution,
    v,
    window: tuple[float, float],
    sample_count: int = DEFAULT_SAMPLES_PER_WINDOW,
) -> tuple[float, float]:
    """Min and max of <agent(s), v> over all agents and sampled s in ``window``."""
    return _extremes(sol, config.d, v, window, sample_count)


def _extremes(sol, dim, v, window, sample_count):
    a, b = map(float, window)
    _check_window(sol, a, b)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size != dim or not np.any(v != 0):
        raise InvalidArgumentError("direction must be a non-zero vector of the state dimension")
    proj = _cloud(sol, dim, _window_times(sol, a, b, sample_count)) @ v
    return float(proj.min()), float(proj.max())


# ---------------------------------------------------------------------------
# constants and the decay certificate


def interaction_bound(psi: Kernel, phi: Kernel, rho: Kernel) -> float:
    """K: the largest sup-norm among the three influence kernels."""
    return max(psi.sup_bound, phi.sup_bound, rho.sup_bound)


def initial_bound(histories: Sequence[HistoryFunction]) -> float:
    """C_0: largest opinion norm over the initial histories."""
    return max(h.max_norm() for h in histories)


def contraction_constants(K: float, Lambda: float, tau: float) -> tuple[float, float, float]:
    """Return ``(C, Ctilde, gamma)`` for interaction bounds ``Lambda <= K`` and delay ``tau``.

    At ``tau = 0`` both contraction factors are 1 and ``gamma`` takes its
    ``tau -> 0`` limit ``Lambda / 6``.
    """
    if not (Lambda > 0 and K >= Lambda):
        raise ConfigurationError(f"need 0 < Lambda <= K, got Lambda={Lambda}, K={K}")
    if tau == 0.0:
        return 1.0, 1.0, Lambda / 6.0
    gain = (Lambda / (2.0 * K)) * -math.expm1(-K * tau)
    C = 1.0 - gain
    shrink = math.exp(-2.0 * K * tau) * gain
    Ctilde = 1.0 - shrink
    gamma = -math.log1p(-shrink) / (3.0 * tau)
    return C, Ctilde, gamma


@dataclass(frozen=True)
class CertificateCheck:
    t: float
    d: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class ConsensusCertificate:
    K: float
    C0: float
    psi0: float
    phi0: float
    rho0: float
    Lambda: float
    C: float
    Ctilde: float
    gamma: float
    D0: float
    tau: float
    checks: tuple[CertificateCheck, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def violations(self) -> tuple[CertificateCheck, ...]:
        return tuple(c for c in self.checks if not c.passed)

    def bound(self, t):
        return np.exp(-self.gamma * (np.asarray(t, dtype=np.float64) - 2.0 * self.tau)) * self.D0

    def constants(self) -> dict:
        return {
            "K": self.K, "C0": self.C0, "psi0": self.psi0, "phi0": self.phi0, "rho0": self.rho0,
            "lambda": self.Lambda, "C": self.C, "Ctilde": self.Ctilde, "gamma": self.gamma, "D0": self.D0,
        }


def decay_checks(gamma: float, tau: float, D0: float, times, values, slack: float = 1e-9) -> tuple[CertificateCheck, ...]:
    """Compare a diameter series against ``exp(-gamma (t - 2 tau)) D0``."""
    out = []
    for t, d in zip(np.asarray(times, dtype=np.float64), np.asarray(values, dtype=np.float64)):
        bound = math.exp(-gamma * (t - 2.0 * tau)) * D0
        out.append(CertificateCheck(float(t), float(d), bound, bool(d <= bound + slack)))
    return tuple(out)


def certify_stacked(
    kernels: tuple[Kernel, Kernel, Kernel],
    delays: DelayConfig,
    histories: Sequence[HistoryFunction],
    sol: DenseSolution,
    dim: int,
    sample_times,
    samples_per_window: int = DEFAULT_SAMPLES_PER_WINDOW,
    slack: float = 1e-9,
    c0: float | None = None,
) -> ConsensusCertificate:
    psi, phi, rho = kernels
    sample_times = np.asarray(sample_times, dtype=np.float64)
    if sample_times.size and (sample_times.min() < 0 or sample_times.max() > sol.t_end):
        raise OutOfRangeError("sample times must lie in [0, t_end]")
    K = interaction_bound(psi, phi, rho)
    C0 = initial_bound(histories) if c0 is None else float(c0)
    psi0, phi0, rho0 = (kernel_min_on_ball(k, C0) for k in kernels)
    Lambda = min(psi0, phi0, rho0)
    if not Lambda > 0:
        raise ConfigurationError(f"kernel lower bound Lambda={Lambda} is not positive")
    C, Ctilde, gamma = contraction_constants(K, Lambda, delays.tau)
    D0 = window_diameter(sol, dim, delays.tau, 0, samples_per_window)
    values = [_hot.farthest_pair(np.ascontiguousarray(sol(t).reshape(-1, dim)))[0] for t in sample_times]
    checks = decay_checks(gamma, delays.tau, D0, sample_times, values, slack)
    return ConsensusCertificate(K, C0, psi0, phi0, rho0, Lambda, C, Ctilde, gamma, D0, delays.tau, checks)


def certificate(
    config: ModelConfig,
    sol: DenseSolution,
    sample_times,
    samples_per_window: int = DEFAULT_SAMPLES_PER_WINDOW,
    slack: float = 1e-9,
    c0: float | None = None,
) -> ConsensusCertificate:
    """Constants of the consensus estimate plus the check d(t) <= exp(-gamma (t - 2 tau)) D_0.

    ``c0`` replaces the history bound C_0 by a larger radius when several runs
    must share one rate.
    """
    return certify_stacked(
        config.kernels, config.delays, config.histories(), sol, config.d,
        sample_times, samples_per_window, slack, c0,
    )
