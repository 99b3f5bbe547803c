"""Mean-field limits evolved inside the class of empirical measures.

A weighted atom cloud is transported by its own characteristics, so the
continuity equations are solved exactly: atom k at time t is X(t; x_k) and
its weight never changes. Case (i) keeps m finite leaders next to a follower
measure nu; case (ii) replaces the leaders by a measure mu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _hot
from .core import DelayConfig, HistoryFunction, Kernel, as_vec
from .dde import DenseSolution
from .errors import InvalidArgumentError
from .particle import (
    DEFAULT_SAMPLES_PER_WINDOW,
    ConsensusCertificate,
    _extremes,
    _windowed_sequence,
    certify_stacked,
    initial_bound,
    simulate_stacked,
    window_diameter,
)

__all__ = [
    "EmpiricalMeasure",
    "MeasureHistory",
    "AgentTrajectory",
    "MeasureTrajectory",
    "MeanFieldRun",
    "velocity_case1",
    "velocity_case2_leader",
    "velocity_case2_follower",
    "evolve_case1",
    "evolve_case2",
    "support_diameter_case1",
    "support_diameter_case2",
    "support_radius",
    "VelocityBoundReport",
    "velocity_bound_check",
]

WEIGHT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    atoms: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=np.float64)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if atoms.ndim != 2 or atoms.shape[0] == 0:
            raise InvalidArgumentError("measure needs at least one atom")
        if weights.size != atoms.shape[0]:
            raise InvalidArgumentError("atom and weight counts differ")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise InvalidArgumentError("measure has non-finite entries")
        if np.any(weights <= 0):
            raise InvalidArgumentError("weights must be positive")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise InvalidArgumentError(f"weights sum to {weights.sum()!r}, not 1")
        object.__setattr__(self, "atoms", np.ascontiguousarray(atoms))
        object.__setattr__(self, "weights", np.ascontiguousarray(weights))

    @classmethod
    def uniform(cls, atoms) -> EmpiricalMeasure:
        atoms = np.asarray(atoms, dtype=np.float64)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        n = atoms.shape[0]
        return cls(atoms, np.full(n, 1.0 / n))

    @classmethod
    def dirac(cls, point) -> EmpiricalMeasure:
        return cls(as_vec(point)[None, :], np.ones(1))

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))


@dataclass(frozen=True, eq=False)
class MeasureHistory:
    """Measure-valued initial datum on [-tau, 0]: one continuous path per atom."""

    histories: tuple[HistoryFunction, ...]
    weights: np.ndarray

    def __post_init__(self):
        hist = tuple(self.histories)
        if not hist:
            raise InvalidArgumentError("measure history needs at least one atom")
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if w.size != len(hist):
            raise InvalidArgumentError("atom and weight counts differ")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise InvalidArgumentError("weights must be positive and sum to 1")
        object.__setattr__(self, "histories", hist)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, histories: Sequence[HistoryFunction]) -> MeasureHistory:
        histories = tuple(histories)
        return cls(histories, np.full(len(histories), 1.0 / len(histories)))

    def at(self, s: float) -> EmpiricalMeasure:
        return EmpiricalMeasure(np.stack([h(s) for h in self.histories]), self.weights)

    def knot_times(self) -> np.ndarray:
        return np.unique(np.concatenate([h.times for h in self.histories]))


class AgentTrajectory:
    """A contiguous block of agents inside a stacked solution."""

    def __init__(self, solution: DenseSolution, offset: int, count: int, dim: int):
        self.solution = solution
        self.offset = offset
        self.count = count
        self.dim = dim

    def _slice(self):
        return slice(self.offset * self.dim, (self.offset + self.count) * self.dim)

    def positions(self, t: float) -> np.ndarray:
        return self.solution(t)[self._slice()].reshape(self.count, self.dim)

    def positions_many(self, ts) -> np.ndarray:
        vals = self.solution.eval_many(ts)[:, self._slice()]
        return vals.reshape(len(vals), self.count, self.dim)

    def characteristic(self, k: int, t: float) -> np.ndarray:
        """Value of atom ``k``'s own trajectory at ``t``."""
        start = (self.offset + k) * self.dim
        return self.solution(t)[start : start + self.dim]


class MeasureTrajectory(AgentTrajectory):
    """nu_t = X(t; .) # nu_0 for an atomic nu_0; weights are fixed."""

    def __init__(self, solution, offset, count, dim, weights):
        super().__init__(solution, offset, count, dim)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.weights.setflags(write=False)

    def at(self, t: float) -> EmpiricalMeasure:
        return EmpiricalMeasure(self.positions(t), self.weights)


@dataclass(frozen=True, eq=False)
class MeanFieldRun:
    """Result of ``evolve_case1`` / ``evolve_case2``; unpacks as ``(leaders, followers)``."""

    case: int
    leaders: AgentTrajectory
    followers: MeasureTrajectory
    solution: DenseSolution
    kernels: tuple[Kernel, Kernel, Kernel]
    delays: DelayConfig
    leader_histories: tuple[HistoryFunction, ...]
    follower_histories: tuple[HistoryFunction, ...]

    def __iter__(self):
        return iter((self.leaders, self.followers))

    @property
    def dim(self) -> int:
        return self.leaders.dim

    def histories(self) -> tuple[HistoryFunction, ...]:
        return self.leader_histories + self.follower_histories

    def diameter(self, t: float) -> float:
        """d^nu(t) in case (i), d^{mu,nu}(t) in case (ii)."""
        pts = self.solution(t).reshape(-1, self.dim)
        return _hot.farthest_pair(np.ascontiguousarray(pts))[0]

    def initial_discrepancy(self, samples_per_window: int = DEFAULT_SAMPLES_PER_WINDOW) -> float:
        """D_0^nu or D_0^{mu,nu}: diameter of everything seen on [-tau, 0]."""
        return window_diameter(self.solution, self.dim, self.delays.tau, 0, samples_per_window)

    def windowed_diameters(self, samples_per_window: int = DEFAULT_SAMPLES_PER_WINDOW) -> np.ndarray:
        return _windowed_sequence(self.solution, self.dim, self.delays.tau, samples_per_window)

    def directional_extremes(self, v, window, sample_count: int = DEFAULT_SAMPLES_PER_WINDOW):
        return _extremes(self.solution, self.dim, v, window, sample_count)

    def certificate(self, sample_times, samples_per_window=DEFAULT_SAMPLES_PER_WINDOW, slack=1e-9, c0=None) -> ConsensusCertificate:
        return certify_stacked(
            self.kernels, self.delays, self.histories(), self.solution, self.dim,
            sample_times, samples_per_window, slack, c0,
        )


# ---------------------------------------------------------------------------
# velocity fields at a single point


def _query(x, dim):
    return np.ascontiguousarray(as_vec(x, dim)[None, :])


def velocity_case1(x, nu_delayed: EmpiricalMeasure, leaders_delayed, phi: Kernel, rho: Kernel) -> np.ndarray:
    """Follower velocity with m finite leaders: int phi(x,y)(y-x) nu(dy) + (1/m) sum rho(x,y_j)(y_j-x)."""
    leaders = np.ascontiguousarray(np.atleast_2d(np.asarray(leaders_delayed, dtype=np.float64)))
    m = leaders.shape[0]
    if m < 1:
        raise InvalidArgumentError("need at least one leader")
    q = _query(x, nu_delayed.dim)
    v = _hot.attract(q, nu_delayed.atoms, nu_delayed.weights, phi.code, phi.param_array)
    v += _hot.attract(q, leaders, np.full(m, 1.0 / m), rho.code, rho.param_array)
    return v[0]


def velocity_case2_leader(x, mu_delayed: EmpiricalMeasure, psi: Kernel) -> np.ndarray:
    q = _query(x, mu_delayed.dim)
    return _hot.attract(q, mu_delayed.atoms, mu_delayed.weights, psi.code, psi.param_array)[0]


def velocity_case2_follower(x, nu_delayed: EmpiricalMeasure, mu_delayed: EmpiricalMeasure, phi: Kernel, rho: Kernel) -> np.ndarray:
    q = _query(x, nu_delayed.dim)
    v = _hot.attract(q, nu_delayed.atoms, nu_delayed.weights, phi.code, phi.param_array)
    v += _hot.attract(q, mu_delayed.atoms, mu_delayed.weights, rho.code, rho.param_array)
    return v[0]


# ---------------------------------------------------------------------------
# evolution


def evolve_case1(
    leader_histories: Sequence[HistoryFunction],
    g: MeasureHistory,
    psi: Kernel,
    phi: Kernel,
    rho: Kernel,
    delays: DelayConfig,
    t_end: float,
    step: float,
) -> MeanFieldRun:
    """Finite leaders plus a follower measure, integrated as one stacked system."""
    leader_histories = tuple(leader_histories)
    m = len(leader_histories)
    if m < 1:
        raise InvalidArgumentError("case (i) needs at least one leader")
    sol = simulate_stacked(
        leader_histories, g.histories, np.full(m, 1.0 / m), g.weights,
        psi, phi, rho, delays, t_end, step,
    )
    dim = leader_histories[0].dim
    return MeanFieldRun(
        1,
        AgentTrajectory(sol, 0, m, dim),
        MeasureTrajectory(sol, m, len(g.histories), dim, g.weights),
        sol, (psi, phi, rho), delays, leader_histories, g.histories,
    )


def evolve_case2(
    f: MeasureHistory,
    g: MeasureHistory,
    psi: Kernel,
    phi: Kernel,
    rho: Kernel,
    delays: DelayConfig,
    t_end: float,
    step: float,
) -> MeanFieldRun:
    """Leader measure mu (autonomous) and follower measure nu."""
    sol = simulate_stacked(
        f.histories, g.histories, f.weights, g.weights,
        psi, phi, rho, delays, t_end, step,
    )
    dim = f.histories[0].dim
    m = len(f.histories)
    return MeanFieldRun(
        2,
        MeasureTrajectory(sol, 0, m, dim, f.weights),
        MeasureTrajectory(sol, m, len(g.histories), dim, g.weights),
        sol, (psi, phi, rho), delays, f.histories, g.histories,
    )


# ---------------------------------------------------------------------------
# support diagnostics


def support_diameter_case1(leaders, nu: EmpiricalMeasure) -> float:
    leaders = np.atleast_2d(np.asarray(leaders, dtype=np.float64))
    pts = np.concatenate([leaders, nu.atoms])
    return _hot.farthest_pair(np.ascontiguousarray(pts))[0]


def support_diameter_case2(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    pts = np.concatenate([mu.atoms, nu.atoms])
    return _hot.farthest_pair(np.ascontiguousarray(pts))[0]


def _times_up_to(run: MeanFieldRun, t: float) -> np.ndarray:
    sol = run.solution
    ts = np.concatenate([sol.history.times, sol.times[sol.times <= t], [t]])
    return np.unique(ts[(ts >= sol.t_start) & (ts <= t)])


def support_radius(run: MeanFieldRun, t: float) -> float:
    """R_X(t): largest norm of any atom or leader over sampled s in [-tau, t].

    Samples are the history knots, the integration grid and ``t`` itself.
    """
    vals = run.solution.eval_many(_times_up_to(run, t)).reshape(-1, run.dim)
    return float(np.max(np.linalg.norm(vals, axis=1)))


def _population_radius(traj: AgentTrajectory, histories, ts) -> float:
    current = np.max(np.linalg.norm(traj.positions_many(ts), axis=2))
    return float(max(current, max(h.max_norm() for h in histories)))


@dataclass(frozen=True)
class VelocityBoundReport:
    case: int
    lipschitz_bounds: tuple[float, ...]  # (K_tilde,) or (K_1, K_2)
    speed_bounds: tuple[float, ...]  # (C_tilde,) or (C_1, C_2)
    worst_speed_ratio: float
    worst_lipschitz_ratio: float
    slack: float

    @property
    def passed(self) -> bool:
        return self.worst_speed_ratio <= 1.0 and self.worst_lipschitz_ratio <= 1.0


def _ball_points(rng, count, dim, radius):
    if count == 0 or radius == 0:
        return np.zeros((0, dim))
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (radius * rng.random(count) ** (1.0 / dim))[:, None]


def _ratios(points, vel, speed_bound, lip_bound, rng, n_pairs, slack):
    speed = np.linalg.norm(vel, axis=1)
    speed_ratio = float(np.max(speed / (speed_bound + slack))) if speed_bound + slack > 0 else 0.0
    if points.shape[0] < 2:
        return speed_ratio, 0.0
    i = rng.integers(0, points.shape[0], n_pairs)
    j = rng.integers(0, points.shape[0], n_pairs)
    keep = i != j
    gap = np.linalg.norm(points[i[keep]] - points[j[keep]], axis=1)
    dv = np.linalg.norm(vel[i[keep]] - vel[j[keep]], axis=1)
    allowed = lip_bound * gap + slack
    lip_ratio = float(np.max(dv / allowed)) if dv.size else 0.0
    return speed_ratio, lip_ratio


def velocity_bound_check(
    run: MeanFieldRun,
    sample_times,
    *,
    radius: float | None = None,
    radius_leaders: float | None = None,
    ball_points: int = 32,
    n_pairs: int = 256,
    seed: int = 0,
    slack: float = 1e-9,
) -> VelocityBoundReport:
    """Measure the velocity fields against their Lipschitz and sup-norm bounds.

    Query points are the atoms at each sample time plus ``ball_points`` random
    points in the ball on which the bound is stated. Case (i) uses
    ``K~ = 2 R L_phi + 2K + L_rho (C_0 + R)`` and ``C~ = K (3R + C_0)`` with
    R the follower support radius and C_0 the leader bound; case (ii) uses
    ``K_1 = K + 2 R_1 L``, ``K_2 = 2K + L (R_1 + 3 R_2)``, ``C_1 = 2 K R_1``,
    ``C_2 = K (R_1 + 3 R_2)``. Ratios above 1 mean a bound was exceeded.
    """
    rng = np.random.default_rng(seed)
    psi, phi, rho = run.kernels
    K = max(k.sup_bound for k in run.kernels)
    tau1, tau2 = run.delays.as_tuple()
    ts = np.asarray(sample_times, dtype=np.float64)
    dim = run.dim
    lead, follow = run.leaders, run.followers

    def delayed(traj, t, lag):
        return traj.positions(max(t - lag, run.solution.t_start))

    grid_ts = _times_up_to(run, float(ts.max())) if ts.size else np.array([0.0])
    R_follow = _population_radius(follow, run.follower_histories, grid_ts) if radius is None else radius
    R_lead = _population_radius(lead, run.leader_histories, grid_ts) if radius_leaders is None else radius_leaders
    worst_speed = worst_lip = 0.0

    if run.case == 1:
        L_phi, L_rho = phi.lipschitz_const, rho.lipschitz_const
        K_tilde = 2 * R_follow * L_phi + 2 * K + L_rho * (R_lead + R_follow)
        C_tilde = K * (3 * R_follow + R_lead)
        for t in ts:
            nu = EmpiricalMeasure(delayed(follow, t, tau2), follow.weights)
            leaders = delayed(lead, t, tau1)
            pts = np.concatenate([follow.positions(t), _ball_points(rng, ball_points, dim, R_follow)])
            vel = np.stack([velocity_case1(p, nu, leaders, phi, rho) for p in pts])
            s, l = _ratios(pts, vel, C_tilde, K_tilde, rng, n_pairs, slack)
            worst_speed, worst_lip = max(worst_speed, s), max(worst_lip, l)
        return VelocityBoundReport(1, (K_tilde,), (C_tilde,), worst_speed, worst_lip, slack)

    L = max(k.lipschitz_const for k in run.kernels)
    R1, R2 = R_lead, R_follow
    K1, K2 = K + 2 * R1 * L, 2 * K + L * (R1 + 3 * R2)
    C1, C2 = 2 * K * R1, K * (R1 + 3 * R2)
    for t in ts:
        mu = EmpiricalMeasure(delayed(lead, t, tau1), lead.weights)
        nu = EmpiricalMeasure(delayed(follow, t, tau2), follow.weights)
        pts = np.concatenate([lead.positions(t), _ball_points(rng, ball_points, dim, R1)])
        vel = np.stack([velocity_case2_leader(p, mu, psi) for p in pts])
        s, l = _ratios(pts, vel, C1, K1, rng, n_pairs, slack)
        worst_speed, worst_lip = max(worst_speed, s), max(worst_lip, l)
        pts = np.concatenate([follow.positions(t), _ball_points(rng, ball_points, dim, R2)])
        vel = np.stack([velocity_case2_follower(p, nu, mu, phi, rho) for p in pts])
        s, l = _ratios(pts, vel, C2, K2, rng, n_pairs, slack)
        worst_speed, worst_lip = max(worst_speed, s), max(worst_lip, l)
    return VelocityBoundReport(2, (K1, K2), (C1, C2), worst_speed, worst_lip, slack)
