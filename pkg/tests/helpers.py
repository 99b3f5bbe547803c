"""Shared oracles for the property tests and the acceptance suite."""

import numpy as np

from hkdelay.core import DelayConfig, HistoryFunction, Kernel, ModelConfig
from hkdelay.particle import initial_bound, windowed_diameters

SLACK = 1e-6


def random_point(rng, dim, radius):
    g = rng.standard_normal(dim)
    return g / np.linalg.norm(g) * radius * rng.random() ** (1.0 / dim)


def random_kernel(rng):
    family = rng.integers(3)
    if family == 0:
        return Kernel.constant(rng.uniform(0.5, 2.0))
    if family == 1:
        return Kernel.inverse_power(rng.uniform(0.5, 2.0), rng.uniform(0.2, 1.5))
    return Kernel.truncated_exponential(rng.uniform(0.5, 2.0), rng.uniform(1.0, 4.0), rng.uniform(0.05, 0.3))


def random_config(rng, tau, m=None, n=None, dim=None, radius=None):
    m = int(rng.integers(2, 4)) if m is None else m
    n = int(rng.integers(4, 17)) if n is None else n
    dim = int(rng.integers(1, 4)) if dim is None else dim
    radius = rng.uniform(0.5, 5.0) if radius is None else radius

    def hist():
        if tau == 0:
            return HistoryFunction.constant(random_point(rng, dim, radius), tau)
        return HistoryFunction.linear(random_point(rng, dim, radius), random_point(rng, dim, radius), tau)

    hs = [hist() for _ in range(m + n)]
    tau2 = tau * rng.uniform(0.3, 1.0)
    k = (random_kernel(rng), random_kernel(rng), random_kernel(rng))
    return ModelConfig(*k, DelayConfig(tau, tau2), hs[:m], hs[m:])


def estimate_violations(config, sol, ctilde, samples_per_window=32, directions=4, seed=0):
    """Worst excess of each structural estimate; every entry should be <= SLACK."""
    dim = config.d
    rng = np.random.default_rng(seed)
    hist_ts = np.union1d(np.linspace(-config.tau, 0.0, samples_per_window), sol.history.times)
    past = sol.eval_many(hist_ts).reshape(hist_ts.size, -1, dim)
    future = sol.values.reshape(sol.times.size, -1, dim)
    out = {}

    # every agent stays in the directional range spanned on [-tau, 0]
    worst = 0.0
    for _ in range(directions):
        v = rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        lo, hi = (past @ v).min(), (past @ v).max()
        proj = future @ v
        worst = max(worst, lo - proj.min(), proj.max() - hi)
    out["hull"] = worst

    c0 = initial_bound(config.histories())
    out["c0"] = float(np.linalg.norm(future, axis=2).max() - c0)

    D = windowed_diameters(config, sol, samples_per_window)
    out["monotone"] = float(np.max(np.diff(D), initial=0.0))
    contraction = [D[n + 1] - ctilde * D[n - 2] for n in range(2, D.size - 1)]
    out["contraction"] = float(max(contraction, default=0.0))
    return out
