import json

import pytest

from deeprscn.cli import main


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def test_unknown_subcommand_and_flag(capsys):
    assert main(["frobnicate"]) != 0
    assert "usage" in capsys.readouterr().err
    assert main(["trials", "--colour", "red"]) != 0


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == 0
    assert "reproduce" in capsys.readouterr().out


def test_generate_writes_splits(tmp_path):
    assert run(tmp_path, "generate", "--task", "mg1") == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["mackey_glass_series.csv", "mg1_test.csv", "mg1_train.csv", "mg1_validation.csv"]
    header = (tmp_path / "mg1_train.csv").read_text().splitlines()[0]
    assert header == "input0,input1,input2,target0"


def write_config(tmp_path, **data):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return str(p)


def test_trials_writes_one_record_per_trial(tmp_path):
    cfg = write_config(tmp_path, task="mg", family="RSCN", sizes=[10], trial_count=2)
    assert run(tmp_path / "out", "--config", cfg, "trials") == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert len(report["trials"]["RSCN"]) == 2
    assert (tmp_path / "out" / "timings.json").exists()


def test_global_flags_before_or_after_subcommand(tmp_path):
    cfg = write_config(tmp_path, family="ESN", sizes=[20], trial_count=3)
    assert main(["--seed", "3", "--trials", "1", "trials", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert report["config"]["base_seed"] == 3 and len(report["trials"]["ESN"]) == 1


def test_train_and_evaluate(tmp_path):
    cfg = write_config(tmp_path, task="sysid", family="DeepRSCN2", sizes=[10, 5])
    assert run(tmp_path / "t", "--config", cfg, "train") == 0
    summary = json.loads((tmp_path / "t" / "train.json").read_text())
    assert summary["certificate_violations"] == 0
    assert (tmp_path / "t" / "construction_log.jsonl").read_text().count("\n") > 5
    assert run(tmp_path / "e", "--config", cfg, "evaluate") == 0
    ev = json.loads((tmp_path / "e" / "evaluate.json").read_text())
    assert len(ev["layer_mean_abs_correlation"]) == 2
    assert len((tmp_path / "e" / "test_predictions.csv").read_text().splitlines()) == 1 + 900


def test_grid_command(tmp_path, capsys):
    cfg = write_config(tmp_path, family="ESN", sizes=[10])
    assert run(tmp_path / "g", "--config", cfg, "grid", "--param", "sizes=[5],[40]", "--grid-trials", "1") == 0
    assert json.loads((tmp_path / "g" / "grid.json").read_text())["best"] == {"sizes": [40]}
    assert run(tmp_path / "g", "grid") != 0
    assert "at least one --param" in capsys.readouterr().err


def test_reproduce_is_byte_identical(tmp_path):
    outs = []
    for i, threads in enumerate(("1", "1", "3")):
        d = tmp_path / f"r{i}"
        assert main(["reproduce", "mg", "--seed", "7", "--trials", "2", "--threads", threads, "--out", str(d)]) == 0
        outs.append(((d / "report.json").read_bytes(), (d / "report.txt").read_bytes()))
    assert outs[0] == outs[1] == outs[2]
    assert b"DeepRSCN3" in outs[0][1]


def test_online_demo(tmp_path):
    assert run(tmp_path, "online-demo", "--seed", "1") == 0
    res = json.loads((tmp_path / "online.json").read_text())
    assert res["online_nrmse"] < res["static_nrmse"]


@pytest.mark.parametrize(
    "config,message",
    [
        ({"bogus": 1}, "unknown key"),
        ({"family": "ESN", "sizes": [1, 2]}, "layer sizes"),
        ({"task": "csv"}, "csv.path"),
    ],
)
def test_bad_config_reports_a_diagnostic(tmp_path, capsys, config, message):
    cfg = write_config(tmp_path, **config)
    assert run(tmp_path, "--config", cfg, "trials") == 1
    err = capsys.readouterr().err
    assert err.startswith("deeprscn: error:") and message in err


def test_invalid_json(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    assert run(tmp_path, "--config", str(p), "trials") == 1
    assert "invalid JSON" in capsys.readouterr().err


def test_threads_must_be_positive(tmp_path):
    assert run(tmp_path, "trials", "--threads", "0") == 2
