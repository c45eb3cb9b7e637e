import json

import numpy as np
import pytest

from ybqubit.detection import window_errors
from ybqubit.errors import ConfigError, ScanCoverageError
from ybqubit.experiments import (OUT_ENV, RUNNERS, SCENARIOS, config_hash, grid, load_config,
                                 load_defaults, resolve, run_branching, run_hyperfine_scan,
                                 run_rabi, run_state_prep)
from ybqubit.experiments.scenarios import branching_analysis, branching_traces


def test_defaults_resolve_for_every_scenario():
    for name in SCENARIOS + ("prep",):
        cfg = resolve(scenario=name)
        assert cfg.scenario == name and cfg.seed == load_defaults()["seed"]


def test_defaults_carry_documented_values():
    d = load_defaults()
    assert d["constants"]["R_branch"] == 0.00501
    assert d["scenarios"]["detect"]["shots_dark"] == 15290
    assert d["scenarios"]["detect"]["shots_bright"] == 16497
    assert d["scenarios"]["rabi"]["shots_per_point"] == 1000
    assert d["beams"]["detect_369"]["power_W"] == 0.8e-6


def test_unknown_scenario_and_keys():
    with pytest.raises(ConfigError, match="scenario"):
        resolve(scenario="tomography")
    with pytest.raises(ConfigError, match="unknown top-level key"):
        resolve({"bogus": 1}, scenario="rabi")
    with pytest.raises(ConfigError, match="not 'rabi'"):
        resolve({"scenario": "detect"}, scenario="rabi")


def test_all_violations_reported_together():
    with pytest.raises(ConfigError) as exc:
        resolve({"params": {"shots_per_point": 0, "durations_s": [3e-6, 1e-6], "typo": 1},
                 "constants": {"gamma_P12_per_s": -5.0}}, scenario="rabi")
    msg = str(exc.value)
    for part in ("shots_per_point", "durations_s", "typo", "gamma_P12"):
        assert part in msg


def test_bad_beam_reference():
    with pytest.raises(ConfigError, match="no beam named"):
        resolve({"params": {"beams": ["missing"]}}, scenario="detect")


def test_overrides_and_hash():
    a = resolve(scenario="rabi", seed=3, shots=50)
    assert a.seed == 3 and a.params["shots_per_point"] == 50
    b = resolve({"seed": 3, "params": {"shots_per_point": 50}}, scenario="rabi")
    assert a.sha256 == b.sha256 == config_hash(json.loads(json.dumps(a.resolved)))
    assert resolve(scenario="rabi", seed=4, shots=50).sha256 != a.sha256


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.yaml")
    (tmp_path / "bad.yaml").write_text("params: [1, 2\n")
    with pytest.raises(ConfigError, match="YAML"):
        load_config(tmp_path / "bad.yaml", scenario="rabi")
    (tmp_path / "list.yaml").write_text("- 1\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(tmp_path / "list.yaml", scenario="rabi")


def test_grid_forms():
    assert grid({"start": 0, "stop": 1, "num": 3}).tolist() == [0, 0.5, 1]
    assert len(grid({"start": 0.5e9, "stop": 6e9, "step": 1e6})) == 5501
    assert grid([1, 2]).tolist() == [1.0, 2.0]


def test_rabi_ideal_detection_pi_pulse():
    cfg = resolve({"params": {"detection_mode": "ideal",
                              "durations_s": {"start": 0, "stop": 24e-6, "num": 9}}},
                  scenario="rabi", shots=2000)
    art = run_rabi(cfg)
    p1 = dict(zip(art.tables["rabi"].column("duration_s"), art.tables["rabi"].column("p1")))
    assert p1[6e-6] > 0.99
    assert p1[0.0] == 0.0


def test_rabi_zero_duration_reads_dark_error():
    cfg = resolve({"params": {"durations_s": {"start": 0, "stop": 24e-6, "num": 9}}},
                  scenario="rabi", shots=4000)
    art = run_rabi(cfg)
    chain = art.derived["chain"]
    dark, _ = window_errors(chain.config.efficiency, chain.cycle, chain.config)
    p0 = art.tables["rabi"].rows[0][2]
    assert p0 == pytest.approx(dark, abs=4 * np.sqrt(dark / 4000))


def test_branching_saturated_decay_constant():
    cfg = resolve({"params": {"powers_W": [1e-3, 1e-2, 1e-1], "repetitions": 10_000_000}},
                  scenario="branching")
    fits, _, _ = branching_analysis(cfg, branching_traces(cfg), noisy=False)
    assert fits[2]["b"] == pytest.approx(0.5 * 0.00501 / 8.07e-9, rel=2e-3)


def test_branching_29_uw_trace_is_monotone_decay(branching_cfg):
    art = run_branching(branching_cfg)
    tr = art.derived["traces"][3]
    assert branching_cfg.params["powers_W"][3] == 29e-6
    smooth = np.convolve(tr[31:], np.ones(50) / 50, mode="valid")
    assert np.all(np.diff(smooth) <= 1e-9 * smooth[0])
    fit = art.derived["decay_fits"][3]
    assert fit["c"] < 0.01 * fit["A"]


def test_hyperfine_scan_coverage_error():
    cfg = resolve({"params": {"stage1_grid_Hz": {"start": 3.5e9, "stop": 4.5e9, "step": 1e6}}},
                  scenario="hyperfine")
    with pytest.raises(ScanCoverageError):
        run_hyperfine_scan(cfg)


def test_state_prep_benchmark():
    art = run_state_prep(resolve(scenario="prep"))
    assert art.derived["population_zero"] > 0.999
    pops = art.tables["pumping"].column("population_zero")
    assert np.all(np.diff(pops) >= -1e-12)


def test_artifacts_reproducible_with_metadata(tmp_path, monkeypatch):
    cfg = resolve({"params": {"detection_mode": "ideal"}}, scenario="rabi", seed=5, shots=200)
    a = RUNNERS["rabi"](cfg).write(tmp_path / "a")
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "b"))
    b = RUNNERS["rabi"](cfg).write()
    assert [p.rsplit("/", 1)[1] for p in a] == [p.rsplit("/", 1)[1] for p in b]
    assert (tmp_path / "a" / "rabi.csv").read_bytes() == (tmp_path / "b" / "rabi.csv").read_bytes()
    meta = json.loads((tmp_path / "a" / "rabi.meta.json").read_text())
    assert meta["seed"] == 5 and meta["tool_version"] == "0.1.0" and meta["wall_time_s"] >= 0
    assert meta["config_sha256"] == config_hash(meta["resolved_config"])
    assert b"\r\n" not in (tmp_path / "a" / "rabi.csv").read_bytes()
    header = (tmp_path / "a" / "rabi.csv").read_text().splitlines()[0]
    assert header == "duration_s,shots,p1,p1_stderr"
