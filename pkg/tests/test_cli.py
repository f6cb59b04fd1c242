import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from rftrack import cli, repro
from rftrack.config import config_from_dict, config_hash, config_to_dict, load_config
from rftrack.errors import ConfigurationError
from rftrack.repro import Check, Report
from rftrack.sim import ScenarioConfig

ROOT = Path(__file__).resolve().parents[1]
SMALL = """
[scenario]
n_steps = 3

[channel]
q = 0.2
sigma_th_dbm = -60.0

[mc]
n_samples = 20
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    return path


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_shipped_config_matches_defaults():
    cfg = load_config(ROOT / "configs" / "table1.toml")
    assert config_hash(cfg) == config_hash(ScenarioConfig())


def test_dbm_converted_on_load(small_config):
    cfg = load_config(small_config)
    assert cfg.channel.sigma_th == pytest.approx(1e-6)
    assert cfg.n_steps == 3 and cfg.mc.n_samples == 20


@pytest.mark.parametrize(
    "doc,field",
    [
        ({"channel": {"bogus": 1}}, "bogus"),
        ({"warp": {}}, "warp"),
        ({"channel": {"q": 1.5}}, "q"),
        ({"planner": {"kind": "random"}}, "planner_kind"),
        ({"scenario": {"estimator": "particle"}}, "estimator"),
    ],
)
def test_bad_fields_name_the_field(doc, field):
    with pytest.raises(ConfigurationError, match=field):
        config_from_dict(doc)


def test_round_trip_document():
    cfg = ScenarioConfig(target_initial=(1.0, 2.0, 0.5, 0.0), prior_sigma_pos=30.0, n_steps=7, master_seed=9)
    again = config_from_dict(config_to_dict(cfg))
    assert config_hash(again) == config_hash(cfg)
    assert again.master_seed == 9 and again.target_initial == cfg.target_initial


def test_hash_tracks_semantic_fields_only():
    base = ScenarioConfig()
    assert config_hash(base.replace(master_seed=123)) == config_hash(base)
    assert config_hash(base.replace(n_steps=11)) != config_hash(base)
    assert config_hash(base.replace(dt=0.5)) != config_hash(base)
    assert config_hash(base.replace(estimator="bayes")) != config_hash(base)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[scenario\n")
    with pytest.raises(ConfigurationError):
        load_config(bad)


def test_run_writes_one_row_per_step(small_config, tmp_path, capsys):
    out = tmp_path / "run.csv"
    assert cli.main(["run", str(small_config), "--seed", "5", "--out", str(out)]) == cli.EXIT_OK
    rows = read_csv(out.read_text())
    assert len(rows) == 3
    assert list(rows[0])[:17] == cli.record_header(2)[:17]
    assert rows[0]["seed"] == "5"
    assert rows[0]["config_hash"] == config_hash(load_config(small_config))


def test_run_is_byte_identical(small_config, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["run", str(small_config), "--seed", "8", "--out", str(a)])
    cli.main(["run", str(small_config), "--seed", "8", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_csv_round_trips_exactly(small_config, tmp_path):
    from rftrack.sim import run_scenario

    out = tmp_path / "run.csv"
    cli.main(["run", str(small_config), "--seed", "2", "--out", str(out)])
    rows = read_csv(out.read_text())
    result = run_scenario(load_config(small_config).replace(master_seed=2))
    for row, m in zip(rows, result.steps):
        assert float(row["true_x"]) == m.true_state[0]
        assert float(row["est_vy"]) == m.estimate[3]
        assert float(row["sq_err_state"]) == m.sq_err_state
        assert float(row["dcrit_db"]) == m.dcrit_db
        assert float(row["uav1_y"]) == m.tracker_positions[1, 1]


def test_json_output(small_config, tmp_path):
    out = tmp_path / "run.json"
    assert cli.main(["run", str(small_config), "--seed", "1", "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["rows"]) == 3
    assert doc["config"]["scenario"]["n_steps"] == 3
    assert isinstance(doc["rows"][0]["truth_s"], bool)


def test_missing_seed_is_drawn_and_reported(small_config, tmp_path, capsys):
    out = tmp_path / "run.csv"
    assert cli.main(["run", str(small_config), "--out", str(out)]) == 0
    seed = int(capsys.readouterr().err.split("seed:")[1])
    assert read_csv(out.read_text())[0]["seed"] == str(seed)


def test_exit_codes(small_config, tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "nope.toml")]) == cli.EXIT_CONFIG
    bad = tmp_path / "bad.toml"
    bad.write_text("[channel]\nq = 2.0\n")
    assert cli.main(["run", str(bad)]) == cli.EXIT_CONFIG
    assert "q must lie" in capsys.readouterr().err
    assert cli.main(["frobnicate"]) == cli.EXIT_CONFIG
    assert cli.main(["sweep", str(small_config), "--param", "gain", "--values", "1"]) == cli.EXIT_CONFIG


def test_runtime_failure_exit_code(small_config, monkeypatch):
    def boom(cfg):
        raise RuntimeError("solver diverged")

    monkeypatch.setattr(cli, "run_scenario", boom)
    assert cli.main(["run", str(small_config), "--seed", "1"]) == cli.EXIT_RUNTIME


def test_sweep_rows(small_config, tmp_path):
    out = tmp_path / "sweep.csv"
    argv = ["sweep", str(small_config), "--param", "q", "--values", "0", "0.5", "1", "--runs", "2", "--seed", "3"]
    assert cli.main(argv + ["--out", str(out)]) == 0
    rows = read_csv(out.read_text())
    metrics = {r["metric"] for r in rows}
    for name in metrics:
        assert sum(r["metric"] == name for r in rows) == 3
    by = {(float(r["value"]), r["metric"]): float(r["mean"]) for r in rows}
    assert by[(0.0, "fp_rate")] == 0.0
    assert by[(0.0, "fn_rate")] == 0.0
    assert by[(1.0, "fp_rate")] == 0.0


def test_sweep_thermal_noise_in_dbm(small_config, tmp_path):
    out = tmp_path / "sweep.csv"
    argv = ["sweep", str(small_config), "--param", "sigma_th", "--values", "-90", "-60", "--runs", "1", "--seed", "0"]
    assert cli.main(argv + ["--out", str(out)]) == 0
    values = sorted({float(r["value"]) for r in read_csv(out.read_text())})
    assert values == [-90.0, -60.0]


def test_repro_fig4(tmp_path, capsys):
    assert cli.main(["repro", "fig4", "--out", str(tmp_path)]) == cli.EXIT_OK
    rows = read_csv((tmp_path / "fig4_traces.csv").read_text())
    assert len(rows) == 4000
    assert {"noiseless", "faded", "sampled"} <= set(rows[0])
    assert capsys.readouterr().out.count("[PASS]") == 2


def test_repro_threshold_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setitem(repro.RECIPES, "mse", lambda out, quick: Report("mse", [Check("x", False, "y")]))
    assert cli.main(["repro", "mse", "--out", str(tmp_path)]) == cli.EXIT_THRESHOLD


def test_fmt_round_trips():
    for v in (0.1, 1 / 3, 1e-300, -2.5e17, np.float64(np.pi)):
        assert float(cli.fmt(v)) == v
    assert cli.fmt(True) == "true" and cli.fmt(3) == "3" and cli.fmt(float("nan")) == "nan"
