import math

import numpy as np
import pytest

from helpers import estimate_violations, random_config
from hkdelay.core import DelayConfig, HistoryFunction, Kernel, ModelConfig
from hkdelay.errors import ConfigurationError, InvalidArgumentError, OutOfRangeError
from hkdelay.particle import (
    ParticleState,
    certificate,
    contraction_constants,
    decay_checks,
    diameter,
    directional_extremes,
    particle_rhs,
    simulate,
    state_at,
    windowed_diameter,
    windowed_diameters,
)

ONE = Kernel.constant(1.0)


def config(leaders, followers, tau1=0.0, tau2=0.0, kernels=(ONE, ONE, ONE)):
    tau = max(tau1, tau2)
    lh = [HistoryFunction.constant(np.atleast_1d(np.asarray(p, float)), tau) for p in leaders]
    fh = [HistoryFunction.constant(np.atleast_1d(np.asarray(p, float)), tau) for p in followers]
    return ModelConfig(*kernels, DelayConfig(tau1, tau2), lh, fh)


def frozen(state):
    return lambda s: state


def test_rhs_leader_example():
    cfg = config([0.0, 1.0], [0.5, 0.5, 0.5])
    st = ParticleState(np.array([[0.0], [1.0]]), np.full((3, 1), 0.5))
    dy, dx = particle_rhs(cfg, 0.0, st, frozen(st))
    assert np.allclose(dy[:, 0], [0.5, -0.5], atol=0)
    assert np.allclose(dx[:, 0], 0.0, atol=1e-16)


def test_rhs_vanishes_at_consensus():
    rng = np.random.default_rng(1)
    k = (Kernel.inverse_power(1.3, 0.7), Kernel.truncated_exponential(1.0, 2.0, 0.1), ONE)
    cfg = config([[1.0, 2.0]] * 2, [[1.0, 2.0]] * 4, 0.3, 0.2, k)
    st = ParticleState(np.tile([1.0, 2.0], (2, 1)), np.tile([1.0, 2.0], (4, 1)))
    dy, dx = particle_rhs(cfg, rng.random(), st, frozen(st))
    assert not dy.any() and not dx.any()


def test_leader_gap_decays_exponentially():
    # followers sit at the midpoint and never matter for the leaders
    cfg = config([0.0, 1.0], [0.5, 0.5, 0.5])
    sol = simulate(cfg, 1.0, 1e-3)
    st = state_at(cfg, sol, 1.0)
    assert abs(st.leaders[0, 0] - st.leaders[1, 0]) == pytest.approx(math.exp(-1.0), abs=1e-6)


def test_consensus_data_stay_put():
    cfg = config([[0.3, -1.0]] * 2, [[0.3, -1.0]] * 3, 0.25, 0.5)
    sol = simulate(cfg, 3.0, 0.05)
    assert np.all(sol.values == sol.values[0])


def test_diameter_examples():
    st = ParticleState(np.array([[0.0], [2.0]]), np.array([[1.0]]))
    assert diameter(st) == 2.0
    assert diameter(ParticleState(np.ones((2, 2)), np.ones((3, 2)))) == 0.0
    st = ParticleState(np.array([[0.0, 0.0], [0.0, 1.0]]), np.array([[3.0, 0.0], [0.0, 1.0]]))
    assert diameter(st) == pytest.approx(math.sqrt(10.0), abs=1e-7)


def two_leader_run(tau2=1.0):
    # y1 = exp(-t), y2 = -exp(-t); followers pinned at the origin
    cfg = config([1.0, -1.0], [0.0, 0.0, 0.0], 0.0, tau2)
    return cfg, simulate(cfg, 3.0, 1e-3)


def test_windowed_diameter_two_leaders():
    cfg, sol = two_leader_run()
    assert windowed_diameter(cfg, sol, 1) == pytest.approx(2.0, abs=1e-12)
    assert windowed_diameter(cfg, sol, 2) == pytest.approx(2 * math.exp(-1.0), abs=1e-6)


def test_windowed_diameter_constant_trajectories():
    frozen_cfg = config([2.0, 2.0], [2.0, 2.0, 2.0], 0.5, 0.5)
    sol = simulate(frozen_cfg, 2.0, 0.05)
    assert np.all(windowed_diameters(frozen_cfg, sol) == 0.0)


def test_windowed_diameter_errors():
    cfg, sol = two_leader_run()
    with pytest.raises(OutOfRangeError):
        windowed_diameter(cfg, sol, 5)
    with pytest.raises(InvalidArgumentError):
        windowed_diameter(cfg, sol, 1, sample_count=1)


def test_directional_extremes():
    cfg = config([0.0, 3.0], [1.0, 1.0, 0.0], 0.25, 0.25)
    sol = simulate(cfg, 1.0, 0.05)
    assert directional_extremes(cfg, sol, [1.0], (-0.25, 0.0)) == (0.0, 3.0)
    assert directional_extremes(cfg, sol, [-1.0], (-0.25, 0.0)) == (-3.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        directional_extremes(cfg, sol, [1.0], (0.5, 0.0))
    with pytest.raises(InvalidArgumentError):
        directional_extremes(cfg, sol, [0.0], (0.0, 0.5))


def test_directional_extremes_two_leaders():
    cfg, sol = two_leader_run()
    lo, hi = directional_extremes(cfg, sol, [1.0], (0.0, 1.0))
    assert (lo, hi) == (pytest.approx(-1.0, abs=1e-12), pytest.approx(1.0, abs=1e-12))


def test_contraction_constants_closed_form():
    C, Ct, g = contraction_constants(1.0, 1.0, 0.5)
    assert C == pytest.approx(1 - 0.5 * (1 - math.exp(-0.5)), abs=1e-15)
    assert Ct == pytest.approx(1 - math.exp(-1.0) * 0.5 * (1 - math.exp(-0.5)), abs=1e-15)
    assert g == pytest.approx(-math.log(Ct) / 1.5, rel=1e-14)
    assert 0 < C < 1 and 0 < Ct < 1 and g > 0


def test_contraction_constants_zero_delay_limit():
    _, _, g0 = contraction_constants(2.0, 0.5, 0.0)
    _, _, g = contraction_constants(2.0, 0.5, 1e-7)
    assert g0 == pytest.approx(0.5 / 6.0) and g == pytest.approx(g0, rel=1e-5)


def test_contraction_constants_reject_bad_lambda():
    with pytest.raises(ConfigurationError):
        contraction_constants(1.0, 0.0, 0.5)
    with pytest.raises(ConfigurationError):
        contraction_constants(1.0, 2.0, 0.5)


def test_certificate_constants_for_constant_kernels():
    cfg = config([0.0, 1.0], [0.5, 0.2, 0.9], 0.5, 0.5)
    sol = simulate(cfg, 2.0, 0.01)
    cert = certificate(cfg, sol, np.linspace(0, 2, 9))
    assert (cert.K, cert.Lambda, cert.C0) == (1.0, 1.0, 1.0)
    assert cert.D0 == 1.0
    assert cert.gamma == pytest.approx(0.0500848901, abs=1e-9)
    assert cert.passed


def test_certificate_two_leader_analytic():
    cfg, sol = two_leader_run(0.5)
    cert = certificate(cfg, sol, np.linspace(0, 3, 61))
    assert cert.passed
    for c in cert.checks:
        assert c.d == pytest.approx(2 * math.exp(-c.t), abs=1e-9)


def test_fabricated_flat_series_fails_after_two_tau():
    tau, gamma, D0 = 0.5, 0.05, 1.0
    ts = np.linspace(0, 5, 51)
    checks = decay_checks(gamma, tau, D0, ts, np.full(ts.size, D0))
    first_bad = next(c for c in checks if not c.passed)
    assert first_bad.t > 2 * tau
    assert all(c.passed for c in checks if c.t <= 2 * tau)


@pytest.mark.parametrize("tau", [0.0, 0.25, 1.0])
def test_structural_estimates_on_random_runs(tau):
    rng = np.random.default_rng(int(tau * 100) + 3)
    for _ in range(3):
        cfg = random_config(rng, tau)
        sol = simulate(cfg, 6.0, 0.02)
        cert = certificate(cfg, sol, np.linspace(0, 6, 49))
        assert cert.passed
        worst = estimate_violations(cfg, sol, cert.Ctilde)
        assert all(v <= 1e-6 for v in worst.values()), worst


def test_shifted_config_shifts_solution():
    rng = np.random.default_rng(11)
    cfg = random_config(rng, 0.25, dim=2)
    offset = np.array([3.0, -1.5])
    a = simulate(cfg, 2.0, 0.02)
    b = simulate(cfg.shifted(offset), 2.0, 0.02)
    diff = b.values.reshape(b.times.size, -1, 2) - a.values.reshape(a.times.size, -1, 2)
    assert np.allclose(diff, offset, atol=1e-12)


def test_gamma_independent_of_population_size():
    rng = np.random.default_rng(21)
    k = (Kernel.inverse_power(1.0, 0.8), Kernel.truncated_exponential(1.2, 2.0, 0.1), ONE)
    gammas = set()
    for m, n in ((2, 4), (3, 9), (2, 16)):
        cfg = random_config(rng, 0.25, m=m, n=n, dim=2, radius=1.5)
        cfg = ModelConfig(*k, DelayConfig(0.25, 0.25), cfg.leader_histories, cfg.follower_histories)
        cert = certificate(cfg, simulate(cfg, 2.0, 0.02), [0.0, 1.0, 2.0], c0=1.5)
        gammas.add(cert.gamma)
    assert len(gammas) == 1


def test_integration_is_deterministic():
    cfg = random_config(np.random.default_rng(22), 0.25)
    a, b = simulate(cfg, 2.0, 0.02), simulate(cfg, 2.0, 0.02)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.derivs, b.derivs)
