import json

import pytest

from decsim.cli import main

DESK_INI = """
[topology]
nodes = 12
attach = 2
seed = 3

[data]
source = synthetic
classes = 4
dim = 8
train_per_class = 100
test_per_class = 30
noise_seed = 5

[model]
hidden = 8

[train]
learning_rate = 0.05
batch_size = 10

[disruption]
centrality = structural_hole
fraction = 0.1
threshold = 0.5

[run]
case = case2
rounds = 4
repetitions = 1

[output]
dir = {out}
"""


@pytest.fixture
def cfg_file(tmp_path):
    def make(body=DESK_INI, **fmt):
        fmt.setdefault("out", str(tmp_path / "results"))
        path = tmp_path / "exp.cfg"
        path.write_text(body.format(**fmt), encoding="utf-8")
        return path
    return make


def test_simulate_writes_outputs(tmp_path, cfg_file, capsys):
    code = main(["simulate", "--config", str(cfg_file())])
    assert code == 0
    run_dirs = list((tmp_path / "results").iterdir())
    assert len(run_dirs) == 1
    for name in ("per_run.csv", "aggregate.csv", "manifest.json", "graph.txt"):
        assert (run_dirs[0] / name).exists()
    manifest = json.loads((run_dirs[0] / "manifest.json").read_text())
    assert manifest["config_hash"] == run_dirs[0].name
    assert manifest["runs"][0]["disruption"]["disrupted_ids"]
    assert "decsim-" in manifest["version"]
    assert "final mean accuracy" in capsys.readouterr().out


def test_baseline_subcommand_forces_no_disruption(tmp_path, cfg_file):
    code = main(["baseline", "--config", str(cfg_file())])
    assert code == 0
    run_dir = next((tmp_path / "results").iterdir())
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["config"]["threshold"] is None
    assert manifest["runs"][0]["disruption"]["triggered_round"] is None


def test_out_flag_beats_env(tmp_path, cfg_file, monkeypatch):
    monkeypatch.setenv("DECSIM_OUTPUT_DIR", str(tmp_path / "env_out"))
    code = main(["simulate", "--config", str(cfg_file()),
                 "--out", str(tmp_path / "flag_out")])
    assert code == 0
    assert (tmp_path / "flag_out").exists()
    assert not (tmp_path / "env_out").exists()


def test_env_var_overrides_config(tmp_path, cfg_file, monkeypatch):
    monkeypatch.setenv("DECSIM_OUTPUT_DIR", str(tmp_path / "env_out"))
    code = main(["simulate", "--config", str(cfg_file())])
    assert code == 0
    assert (tmp_path / "env_out").exists()
    assert not (tmp_path / "results").exists()


def test_config_error_exit_code(tmp_path, cfg_file, capsys):
    bad = cfg_file(DESK_INI.replace("rounds = 4", "rouns = 4"))
    assert main(["simulate", "--config", str(bad)]) == 1
    assert "config error" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.cfg")]) == 1


def test_data_error_exit_code(tmp_path, cfg_file, capsys):
    body = DESK_INI.replace(
        "source = synthetic",
        "source = idx\ntrain_images = missing\ntrain_labels = missing\n"
        "test_images = missing\ntest_labels = missing")
    assert main(["simulate", "--config", str(cfg_file(body))]) == 2
    assert "data error" in capsys.readouterr().err


def test_percolation_subcommand(tmp_path, cfg_file):
    code = main(["percolation", "--config", str(cfg_file()),
                 "--out", str(tmp_path / "perc")])
    assert code == 0
    assert (tmp_path / "perc" / "phi_curves.csv").exists()


def test_sweep_subcommand(tmp_path, cfg_file):
    body = DESK_INI + "\n[sweep]\nthresholds = none, 0.5\n"
    code = main(["sweep", "--config", str(cfg_file(body)),
                 "--out", str(tmp_path / "sweep_out")])
    assert code == 0
    assert (tmp_path / "sweep_out" / "aggregate.csv").exists()
    assert len([d for d in (tmp_path / "sweep_out").iterdir() if d.is_dir()]) == 2
