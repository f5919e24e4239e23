import xml.etree.ElementTree as ET

from leafkit.cli import main
from leafkit.config import ExperimentConfig, save_config


def tiny_config_file(tmp_path, out_dir, **overrides):
    cfg = ExperimentConfig()
    cfg.task.kind = "band2"
    cfg.task.duration_s = 0.1
    cfg.task.train_size = 20
    cfg.task.val_size = 20
    cfg.task.test_size = 20
    cfg.frontend.kernel_width = 101
    cfg.frontend.lp_width = 101
    cfg.frontend.stride = 80
    cfg.frontend.sigma_lp_init = 20.0
    cfg.init.n_filters = 12
    cfg.train.epochs = 2
    cfg.train.batch_size = 10
    cfg.train.hidden_units = 16
    cfg.output.dir = str(out_dir)
    for key, value in overrides.items():
        section, name = key.split("__")
        setattr(getattr(cfg, section), name, value)
    path = tmp_path / "exp.cfg"
    save_config(cfg, path)
    return path


def test_init_fb_writes_files(tmp_path, capsys):
    out = tmp_path / "fb"
    code = main(["init-fb", "--out", str(out)])
    assert code == 0
    assert (out / "filterbank.csv").exists()
    root = ET.fromstring((out / "responses.svg").read_text())
    assert root.tag.endswith("svg")
    assert "40-filter mel bank" in capsys.readouterr().out


def test_init_fb_deterministic_bytes(tmp_path):
    cfg = tiny_config_file(tmp_path, tmp_path / "ignored", init__kind="random")
    assert main(["init-fb", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["init-fb", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "filterbank.csv").read_bytes() == (
        tmp_path / "b" / "filterbank.csv"
    ).read_bytes()


def test_init_fb_invalid_filter_count(tmp_path, capsys):
    cfg = tiny_config_file(tmp_path, tmp_path / "out", init__n_filters=1)
    code = main(["init-fb", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert code == 1
    assert "SpecError" in capsys.readouterr().err


def test_train_then_overwrite_policy(tmp_path, capsys):
    run = tmp_path / "run"
    cfg = tiny_config_file(tmp_path, run)
    assert main(["train", "--config", str(cfg)]) == 0
    assert (run / "metrics.csv").exists()
    # rerun refuses without --overwrite
    assert main(["train", "--config", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert "overwrite" in err
    assert main(["train", "--config", str(cfg), "--overwrite"]) == 0


def test_train_determinism_bytes(tmp_path):
    cfg = tiny_config_file(tmp_path, tmp_path / "r1")
    assert main(["train", "--config", str(cfg)]) == 0
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r2")]) == 0
    a = (tmp_path / "r1" / "metrics.csv").read_bytes()
    b = (tmp_path / "r2" / "metrics.csv").read_bytes()
    assert a == b


def test_analyze_run_and_fixed_zero_mean(tmp_path, capsys):
    run = tmp_path / "fixed_run"
    cfg = tiny_config_file(tmp_path, run, train__fixed_fb=True)
    assert main(["train", "--config", str(cfg)]) == 0
    assert main(["analyze", "--run-dir", str(run)]) == 0
    out = capsys.readouterr().out
    assert "mean final JSD = 0.0000" in out
    svg = (run / "analysis" / "jsd_trajectory.svg").read_text()
    assert "mean final JSD = 0.000" in svg


def test_analyze_without_snapshots_fails(tmp_path, capsys):
    out = tmp_path / "fbonly"
    assert main(["init-fb", "--out", str(out)]) == 0
    code = main(["analyze", "--run-dir", str(out)])
    assert code == 2
    assert "SnapshotError" in capsys.readouterr().err


def test_grad_check_cli(tmp_path, capsys):
    cfg = tiny_config_file(tmp_path, tmp_path / "unused", init__kind="random")
    code = main(["grad-check", "--config", str(cfg), "--seed", "3", "--coords", "4"])
    assert code == 0
    assert "PASSED" in capsys.readouterr().out


def test_jsd_cli(capsys):
    assert main(["jsd", "--p", "0.5,0.5", "--q", "1,0"]) == 0
    assert "0.5579" in capsys.readouterr().out
    assert main(["jsd", "--a", "0.3,15", "--b", "0.3,15"]) == 0
    assert "0.000000" in capsys.readouterr().out
    assert main(["jsd", "--a", "0.3,15"]) == 1


def test_jsd_cli_bad_filter_format(capsys):
    assert main(["jsd", "--a", "nope", "--b", "0.3,15"]) == 1
    assert "ConfigError" in capsys.readouterr().err
