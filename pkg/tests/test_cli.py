import json
from pathlib import Path

import numpy as np
import pytest

from uavloc.cli import (CliConfig, ConfigError, config_to_dict, main, parse_config,
                        run_batch)
from uavloc.scenarios import ExplorationConfig, TrackingConfig


def write(tmp_path, name, payload):
    p = tmp_path / name
    p.write_text(payload if isinstance(payload, str) else json.dumps(payload))
    return str(p)


def small_track(tmp_path, **extra):
    data = {"steps": 40, "burn_in": 5}
    data.update(extra)
    return write(tmp_path, "track.json", data)


def small_explore(tmp_path):
    return write(tmp_path, "explore.json",
                 {"episodes": 2, "mission_time": 30})


# ---------------------------------------------------------------- parsing


def test_empty_config_yields_full_defaults(tmp_path):
    path = write(tmp_path, "empty.json", "")
    cfg = parse_config(path, "track")
    assert cfg == TrackingConfig()
    cfg2 = parse_config(None, "explore")
    assert cfg2.episodes == ExplorationConfig().episodes


def test_unknown_keys_rejected(tmp_path):
    path = write(tmp_path, "bad.json", {"stepz": 10})
    with pytest.raises(ConfigError, match="stepz"):
        parse_config(path, "track")
    path2 = write(tmp_path, "bad2.json", {"comms": {"rage_m": 100}})
    with pytest.raises(ConfigError, match="rage_m"):
        parse_config(path2, "track")


def test_invariant_violation_names_fields(tmp_path):
    path = write(tmp_path, "bad.json", {"limits": {"v_min": 12.0, "v_max": 10.0}})
    with pytest.raises(ConfigError, match="v_min"):
        parse_config(path, "track")


def test_missing_file_is_an_error():
    with pytest.raises(ConfigError, match="not found"):
        parse_config("/nonexistent/conf.json", "track")


def test_config_round_trip(tmp_path):
    cfg = TrackingConfig()
    path = write(tmp_path, "rt.json", config_to_dict(cfg))
    again = parse_config(path, "track")
    assert config_to_dict(again) == config_to_dict(cfg)

    ecfg = ExplorationConfig()
    path2 = write(tmp_path, "rt2.json", config_to_dict(ecfg))
    eagain = parse_config(path2, "explore")
    assert config_to_dict(eagain) == config_to_dict(ecfg)


def test_nested_overrides_apply(tmp_path):
    path = write(tmp_path, "c.json",
                 {"comms": {"mode": "u2u", "range_m": 500.0}, "sigma_range": 1.5})
    cfg = parse_config(path, "track")
    assert cfg.comms.mode == "u2u"
    assert cfg.comms.range_m == 500.0
    assert cfg.sigma_range == 1.5
    assert cfg.steps == 200  # untouched default


# ---------------------------------------------------------------- batches


def test_track_batch_row_counts_and_schema(tmp_path):
    cfg_path = small_track(tmp_path)
    out = tmp_path / "out"
    status = main(["track", "--config", cfg_path, "--runs", "1",
                   "--seed", "7", "--out", str(out)])
    assert status == 0
    lines = (out / "errors.csv").read_text().splitlines()
    assert lines[0] == "run_id,step,uav_id,error_m,scheme,r_m,L,link_loss"
    assert len(lines) == 1 + 40 * 4  # header + steps x n_uavs

    cdf_lines = (out / "cdf.csv").read_text().splitlines()
    assert cdf_lines[0] == "scheme,r_m,L,threshold_m,cdf"
    assert len(cdf_lines) == 1 + 101  # thresholds 0..10 m step 0.1
    values = [float(ln.split(",")[4]) for ln in cdf_lines[1:]]
    assert values == sorted(values)
    assert 0.0 <= min(values) and max(values) <= 1.0

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert "errors.csv" in manifest["files"]


def test_track_batch_byte_identical_reruns(tmp_path):
    cfg_path = small_track(tmp_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["track", "--config", cfg_path, "--runs", "2",
                 "--seed", "3", "--out", str(out_a)]) == 0
    assert main(["track", "--config", cfg_path, "--runs", "2",
                 "--seed", "3", "--out", str(out_b)]) == 0
    for name in ("errors.csv", "cdf.csv", "cdf_burnin.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_explore_batch_outputs(tmp_path):
    cfg_path = small_explore(tmp_path)
    out = tmp_path / "out"
    status = main(["explore", "--config", cfg_path, "--runs", "1",
                   "--seed", "0", "--out", str(out)])
    assert status == 0
    q_lines = (out / "qlearn.csv").read_text().splitlines()
    assert q_lines[0] == "run_id,episode,n_uavs,positive_q_sum,map_accuracy,coverage"
    assert len(q_lines) == 1 + 2  # header + episodes
    map_lines = (out / "map.csv").read_text().splitlines()
    assert map_lines[0] == "run_id,episode,cell_x,cell_y,log_odds"
    assert len(map_lines) == 1 + 2 * 20 * 20


def test_counters_csv_emitted(tmp_path):
    cfg_path = small_track(tmp_path)
    out = tmp_path / "out"
    assert main(["track", "--config", cfg_path, "--runs", "1", "--seed", "0",
                 "--out", str(out), "--counters"]) == 0
    lines = (out / "counters.csv").read_text().splitlines()
    assert lines[0] == "routine,dimension,multiplies,adds"
    routines = {ln.split(",")[0] for ln in lines[1:]}
    assert {"ekf_predict_cov", "ekf_gain", "og_update", "q_update"} <= routines


def test_comm_log_emitted_for_u2u(tmp_path):
    cfg_path = small_track(tmp_path, comms={"mode": "u2u", "range_m": 1000.0})
    out = tmp_path / "out"
    assert main(["track", "--config", cfg_path, "--runs", "1", "--seed", "0",
                 "--out", str(out), "--comm-log"]) == 0
    lines = (out / "comms.csv").read_text().splitlines()
    assert lines[0] == "step,src,dst,hops,dropped"
    assert len(lines) > 1


def test_bad_config_fails_with_manifest(tmp_path):
    cfg_path = write(tmp_path, "bad.json", {"steps": 0})
    out = tmp_path / "out"
    status = main(["track", "--config", cfg_path, "--runs", "1",
                   "--seed", "0", "--out", str(out)])
    assert status == 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "failed"
    assert not (out / "errors.csv").exists()


def test_cli_config_validation():
    with pytest.raises(ConfigError):
        CliConfig(scenario="fly", config_path=None, runs=1, base_seed=0, out_dir=".")
    with pytest.raises(ConfigError):
        CliConfig(scenario="track", config_path=None, runs=0, base_seed=0, out_dir=".")
