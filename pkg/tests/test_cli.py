import json
import os

import pytest

from spectrum_auction.cli import METRICS_HEADER, emit_outputs, main, run_preset
from spectrum_auction.config import ConfigError, dump_config, load_config
from spectrum_auction.llm_advisor import ENV_API_KEY, ENV_BASE_URL
from spectrum_auction.simulation import ScenarioConfig, run_simulation


def test_empty_config_gives_defaults(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("")
    cfg = load_config(p)
    assert cfg == ScenarioConfig()
    assert (cfg.ue_count, cfg.subchannel_count, cfg.episode_count, cfg.reserve_price) == (16, 6, 20, 1.2)


def test_validation_errors(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("scenario:\n  ue_count: 0\n")
    with pytest.raises(ConfigError, match="ue_count"):
        load_config(p)
    p.write_text("foo: 1\n")
    with pytest.raises(ConfigError, match="foo"):
        load_config(p)
    p.write_text("radio:\n  foo: 1\n")
    with pytest.raises(ConfigError, match="foo"):
        load_config(p)
    p.write_text("scenario:\n  ue_count: [1,\n")
    with pytest.raises(ConfigError, match="line"):
        load_config(p)
    p.write_text("scenario:\n  ue_count: 2.5\n")
    with pytest.raises(ConfigError, match="ue_count"):
        load_config(p)


def test_round_trip(tmp_path):
    p = tmp_path / "d.yaml"
    p.write_text(dump_config(ScenarioConfig()))
    assert load_config(p) == ScenarioConfig()
    custom = ScenarioConfig(service_classes=(1.0, 2.0), valuation_range=None, llm_replay=(1.5, 2.0), rng_seed=9)
    p.write_text(dump_config(custom))
    assert load_config(p) == custom


def test_emit_outputs(tmp_path):
    res = run_simulation(ScenarioConfig())
    emit_outputs(res, tmp_path)
    lines = (tmp_path / "metrics.csv").read_text().splitlines()
    assert lines[0] == "ue_id,strategy,win_frequency,accumulated_utility,last_win_episode"
    assert lines[0].split(",") == METRICS_HEADER
    assert len(lines) == 17
    assert (tmp_path / "bs.csv").read_text().splitlines()[0] == "episode,bs_utility_delta,clearing_price"
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert set(manifest["checksums"]) >= {"metrics.csv", "bs.csv"}
    assert b"\r\n" not in (tmp_path / "metrics.csv").read_bytes()


def test_manifest_rerun_is_identical(tmp_path):
    assert main(["run", "--preset", "static", "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--manifest", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "b")]) == 0
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma["checksums"] == mb["checksums"]


def test_eta_sweep_preset(tmp_path):
    results = run_preset("eta_sweep", tmp_path)
    assert [round(r.metrics.eta, 3) for r in results] == [0.375, 0.75, 1.5]
    rows = (tmp_path / "eta_sweep.csv").read_text().splitlines()
    assert len(rows) == 4 and rows[-1].endswith(",1")


def test_config_file_with_preset(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("scenario:\n  episode_count: 5\n")
    assert main(["run", "--config", str(p), "--preset", "all_llm", "--seed", "3", "--out", str(tmp_path / "o")]) == 0
    bs = (tmp_path / "o" / "bs.csv").read_text().splitlines()
    assert len(bs) == 6
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["seed"] == 3


def test_live_llm_without_env(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv(ENV_BASE_URL, raising=False)
    monkeypatch.delenv(ENV_API_KEY, raising=False)
    assert main(["run", "--preset", "refill", "--live-llm", "--out", str(tmp_path)]) == 2
    assert ENV_BASE_URL in capsys.readouterr().err


def test_writes_only_inside_out_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    out = tmp_path / "out"
    assert main(["run", "--preset", "refill", "--out", str(out)]) == 0
    assert sorted(os.listdir(tmp_path)) == ["out"]


def test_help_names_env_vars(capsys):
    with pytest.raises(SystemExit):
        main(["run", "--help"])
    text = capsys.readouterr().out
    assert ENV_BASE_URL in text and ENV_API_KEY in text
