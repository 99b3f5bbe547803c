import json
import math
import subprocess
import sys

import numpy as np
import pytest

from hkdelay import __version__
from hkdelay.cli import main
from hkdelay.errors import ConfigurationError, InvalidArgumentError
from hkdelay.experiments import (
    CSV_HEADER,
    Scenario,
    build_population,
    fit_decay_rate,
    limit_study,
    load_scenario,
    run,
    stability_study,
)


def scenario_doc(mode="particle", family="constant", m=2, n=3, d=1, tau=0.25, seed=7, t_end=5.0, step=0.01, spw=16):
    if family == "constant":
        k = {"family": "constant", "c": 1.0}
    else:
        k = {"family": "inverse_power", "c": 1.0, "beta": 0.5}
    return {
        "mode": mode,
        "kernels": {"psi": k, "phi": k, "rho": k},
        "delays": {"tau1": tau, "tau2": tau},
        "population": {"m": m, "n": n, "d": d},
        "histories": {"kind": "random", "seed": seed, "radius": 2.0, "shape": "linear"},
        "numerics": {"step": step, "t_end": t_end, "samples_per_window": spw},
    }


def explicit_doc(leaders, followers, tau=0.0, t_end=3.0):
    doc = scenario_doc(tau=tau, t_end=t_end)
    doc["population"] = {"m": len(leaders), "n": len(followers), "d": 1}
    doc["histories"] = {
        "kind": "explicit",
        "leaders": [{"constant": [v]} for v in leaders],
        "followers": [{"constant": [v]} for v in followers],
    }
    return doc


def write(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


# ---------------------------------------------------------------------------
# fit_decay_rate


def test_fit_exact_exponential():
    ts = np.linspace(0, 5, 51)
    assert fit_decay_rate(zip(ts, np.exp(-0.3 * ts))) == pytest.approx(0.3, abs=1e-9)


def test_fit_constant_series():
    rate = fit_decay_rate([(t, 2.0) for t in np.linspace(0, 5, 11)])
    assert rate == pytest.approx(0.0, abs=1e-9) and math.copysign(1.0, rate) == 1.0


def test_fit_with_offset_and_t_min():
    ts = np.linspace(0, 5, 51)
    series = list(zip(ts, 5 * np.exp(-ts)))
    series[3] = (0.3, 1e3)  # ignored because it precedes t_min
    assert fit_decay_rate(series, t_min=1.0) == pytest.approx(1.0, abs=1e-9)


def test_fit_consensus_reached_and_errors():
    assert fit_decay_rate([(0.0, 0.0), (1.0, 1e-20), (2.0, 0.0)]) is None
    with pytest.raises(InvalidArgumentError):
        fit_decay_rate([(0.0, 1.0)])
    with pytest.raises(InvalidArgumentError):
        fit_decay_rate([(0.0, 1.0), (1.0, 0.5)], t_min=2.0)


# ---------------------------------------------------------------------------
# scenarios and runs


def test_schema_errors():
    doc = scenario_doc()
    for broken in (
        {**doc, "mode": "nope"},
        {k: v for k, v in doc.items() if k != "kernels"},
        {**doc, "extra": 1},
        {**doc, "histories": {"kind": "random", "radius": 1.0}},
        {**doc, "histories": {"kind": "weird"}},
    ):
        with pytest.raises(ConfigurationError):
            build_population(Scenario.from_dict(broken))


def test_bad_json_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_scenario(path)


def test_minimal_particle_run(tmp_path):
    rep = run(Scenario.from_dict(scenario_doc()), tmp_path)
    assert rep.exit_code == 0
    lines = (tmp_path / "series.csv").read_bytes().split(b"\n")
    assert lines[0] == CSV_HEADER.encode() and lines[-1] == b""
    assert b"\r" not in (tmp_path / "series.csv").read_bytes()
    t, d, bound, ok = lines[1].decode().split(",")
    assert float(t) == 0.0 and ok == "1" and float(d) <= float(bound)
    doc = json.loads((tmp_path / "report.json").read_text())
    assert {"constants", "gamma_emp", "checks", "mode", "seed"} <= set(doc)
    assert set(doc["constants"]) == {"K", "C0", "psi0", "phi0", "rho0", "lambda", "C", "Ctilde", "gamma", "D0"}
    assert doc["violations"] == []


def test_csv_uses_seventeen_digits(tmp_path):
    run(Scenario.from_dict(scenario_doc()), tmp_path)
    row = (tmp_path / "series.csv").read_text().splitlines()[5].split(",")
    assert float(row[1]) == float(format(float(row[1]), ".17g"))
    assert len(row[1].replace(".", "").replace("-", "").lstrip("0")) >= 15


def test_consensus_data_give_zero_diameter(tmp_path):
    rep = run(Scenario.from_dict(explicit_doc([1.0, 1.0], [1.0, 1.0, 1.0], tau=0.25)), tmp_path)
    rows = (tmp_path / "series.csv").read_text().splitlines()[1:]
    assert all(float(r.split(",")[1]) == 0.0 for r in rows)
    assert rep.gamma_emp is None and rep.to_json()["consensus_reached"]


def test_two_leader_rate_recovered(tmp_path):
    # leaders at +-1 with zero delay: d(t) = 2 exp(-t), followers stay at the origin
    rep = run(Scenario.from_dict(explicit_doc([1.0, -1.0], [0.0, 0.0, 0.0], tau=0.0, t_end=5.0)), tmp_path)
    assert rep.gamma_emp == pytest.approx(1.0, abs=1e-3)
    assert rep.certificate.passed and rep.gamma_emp >= rep.certificate.gamma - 1e-3


def test_particle_mode_enforces_model_invariants():
    with pytest.raises(ConfigurationError):
        run(Scenario.from_dict(scenario_doc(m=3, n=3)))


def test_meanfield_modes_run(tmp_path):
    for mode in ("meanfield_case1", "meanfield_case2"):
        rep = run(Scenario.from_dict(scenario_doc(mode=mode, n=32, d=2, family="ip")), tmp_path / mode)
        assert rep.exit_code == 0 and rep.mode == mode


def test_reproducible_outputs(tmp_path):
    doc = scenario_doc(n=6, d=2, family="ip")
    run(Scenario.from_dict(doc), tmp_path / "a")
    run(Scenario.from_dict(doc), tmp_path / "b")
    for name in ("series.csv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_changes_output(tmp_path):
    run(Scenario.from_dict(scenario_doc(seed=1)), tmp_path / "a")
    run(Scenario.from_dict(scenario_doc(seed=2)), tmp_path / "b")
    assert (tmp_path / "a" / "series.csv").read_bytes() != (tmp_path / "b" / "series.csv").read_bytes()


def test_refinements_share_prefixes():
    small = build_population(Scenario.from_dict(scenario_doc(n=4)))
    large = build_population(Scenario.from_dict(scenario_doc(n=8)))
    for a, b in zip(small.leaders + small.followers, large.leaders + large.followers):
        assert np.array_equal(a.values, b.values)


# ---------------------------------------------------------------------------
# stability and limit studies


@pytest.mark.parametrize("mode", ["stability_case1", "stability_case2"])
def test_translation_ratio_is_one(mode):
    sc = Scenario.from_dict(scenario_doc(mode=mode, n=6, d=2))
    rep = stability_study(sc, p="inf", kind="translation")
    for pair in rep.pairs:
        assert np.allclose(pair.ratios, 1.0, atol=1e-9)
    assert rep.passed


def test_zero_perturbation_gives_zero_distance():
    sc = Scenario.from_dict(scenario_doc(mode="stability_case1", n=6, d=2, family="ip"))
    rep = stability_study(sc, p=2, epsilon=0.0, factors=(1.0,))
    assert np.all(rep.pairs[0].distances == 0.0)
    assert rep.pairs[0].ratios is None and not rep.passed


def test_random_sweep_is_linear_response():
    sc = Scenario.from_dict(scenario_doc(mode="stability_case2", n=8, d=2, family="ip"))
    rep = stability_study(sc, p=2, epsilon=1e-3)
    assert all(math.isfinite(r) for r in rep.max_ratios)
    assert rep.variation < 0.5


def test_limit_study_identical_atoms():
    doc = scenario_doc(mode="limit_study", n=4, d=1, family="ip")
    doc["histories"]["radius"] = 0.0
    rep = limit_study(Scenario.from_dict(doc), n0=4, levels=3)
    assert np.all(rep.distances == 0.0)


def test_limit_study_initial_gap_matches_oracle():
    sc = Scenario.from_dict(scenario_doc(mode="limit_study", n=4, d=1, family="ip"))
    rep = limit_study(sc, n0=4, levels=2)
    coarse = np.sort(np.repeat([h(0.0)[0] for h in rep.runs[0]["population"].followers], 2))
    fine = np.sort([h(0.0)[0] for h in rep.runs[1]["population"].followers])
    # sorted matching is the optimal bottleneck matching on the line
    assert rep.distances[0, 0] == np.max(np.abs(coarse - fine))


def test_limit_study_certificates_share_gamma():
    sc = Scenario.from_dict(scenario_doc(mode="limit_study", n=8, d=2, family="ip"))
    rep = limit_study(sc, n0=8, levels=3)
    assert all(rep.certificates_passed) and len(set(rep.gammas)) == 1
    assert rep.monotone and rep.passed


# ---------------------------------------------------------------------------
# command line


def test_cli_run_exit_zero(tmp_path):
    cfg = write(tmp_path, scenario_doc())
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "3", "--t-end", "2"]) == 0
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    assert doc["seed"] == 3 and doc["checks"][-1]["t"] == 2.0


def test_cli_errors_exit_one(tmp_path, capsys):
    bad = write(tmp_path, {**scenario_doc(), "mode": "bogus"})
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err


def test_cli_certificate_failure_exit_two(tmp_path, monkeypatch):
    import hkdelay.particle as particle

    real = particle.decay_checks
    monkeypatch.setattr(particle, "decay_checks", lambda g, tau, D0, ts, vals, slack: real(g, tau, D0 * 1e-3, ts, vals, slack))
    cfg = write(tmp_path, scenario_doc())
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert json.loads((tmp_path / "o" / "report.json").read_text())["violations"]


def test_cli_stability_and_limit(tmp_path):
    cfg = write(tmp_path, scenario_doc(mode="stability_case1", n=6, d=2, family="ip", t_end=2.0))
    assert main(["stability", "--config", str(cfg), "--epsilon", "1e-3", "--p", "inf", "--out", str(tmp_path / "s")]) == 0
    assert json.loads((tmp_path / "s" / "stability.json").read_text())["passed"]
    cfg = write(tmp_path, scenario_doc(mode="limit_study", d=2, family="ip", t_end=2.0), "lim.json")
    assert main(["limit", "--config", str(cfg), "--n0", "4", "--levels", "3", "--out", str(tmp_path / "l")]) == 0
    assert (tmp_path / "l" / "limit.csv").read_text().startswith("n,t,dinf\n")


def test_cli_version_and_help():
    out = subprocess.run([sys.executable, "-m", "hkdelay", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and __version__ in out.stdout
    out = subprocess.run([sys.executable, "-m", "hkdelay", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "stability" in out.stdout
