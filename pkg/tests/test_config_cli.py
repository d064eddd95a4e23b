import json
import subprocess
import sys

import pytest

from rdergodic.cli import main, run
from rdergodic.config import ConfigError, RunConfig, emit_config, parse_config
from rdergodic.model import ModelSpec
from rdergodic.sim import SimParams


def test_minimal_config_uses_defaults():
    cfg = parse_config("[experiment]\nname = check\n")
    assert cfg.experiment == "check"
    assert cfg.model == ModelSpec()
    assert cfg.sim == SimParams()
    assert cfg.model.n_colloc == 256 and cfg.sim.dt == 1e-3


def test_power_law_b_above_a_is_rejected():
    with pytest.raises(ConfigError) as info:
        parse_config("[model]\ncovariance = power_law\ncov_exponent = 0.3\ncov_exponent_b = 0.6\n")
    assert info.value.key == "model.cov_exponent_b"
    assert "check_powerlaw_window" in str(info.value)


@pytest.mark.parametrize("text,key", [
    ("[model]\nwidth = 3\n", "model.width"),
    ("[sim]\ndt = fast\n", "sim.dt"),
    ("[experiment]\nname = dance\n", "experiment.name"),
    ("[experiment]\neps_level = 1.5\n", "experiment.eps_level"),
    ("[experiment]\nn_traj = 1\n", "experiment.n_traj"),
    ("[experiment]\nprojection = max\n", "experiment.projection"),
    ("[model]\ndrift = 0, nan\n", "model.drift"),
])
def test_bad_keys_are_named(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key


def test_unknown_section():
    with pytest.raises(ConfigError):
        parse_config("[plot]\ncolor = red\n")


def test_round_trip():
    text = """
[model]
n_modes = 32
drift = 0.5, -1, 0, -2
covariance = power_law
cov_scale = 0.3
cov_exponent = 0.75
cov_exponent_b = 0.5
[sim]
dt = 0.002
t_end = 3
record_times = 0.1, 1, 3
noise_on = false
[experiment]
name = tv
seed = 17
magnitudes = 1, 2.5
record_times_b = 0.1, 1, 3
burn_in = 4
"""
    cfg = parse_config(text)
    again = parse_config(emit_config(cfg))
    assert again == cfg
    assert emit_config(again) == emit_config(cfg)
    assert cfg.sim.seed == 17 and cfg.options.magnitudes == (1.0, 2.5)
    assert cfg.replace(seed=3).sim.seed == 3


def test_default_round_trip():
    cfg = RunConfig()
    assert parse_config(emit_config(cfg)) == cfg


def write(tmp_path, text):
    p = tmp_path / "run.ini"
    p.write_text(text)
    return str(p)


def test_check_run_writes_artifacts(tmp_path, capsys):
    code = main(["check", "--out", str(tmp_path)])
    assert code == 0
    out = tmp_path / "check"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"]
    assert all(v["passed"] for v in summary["result"]["verdicts"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert "numpy" in manifest["versions"] and manifest["seed"] == 0
    assert parse_config(manifest["config"]).experiment == "check"
    assert "check_smoothing_e9" in capsys.readouterr().out


def test_check_fails_for_wrong_sign(tmp_path):
    cfg = write(tmp_path, "[model]\ndrift = 0, 0, 0, 1\n")
    assert main(["check", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_tv_mismatch_fails_before_running(tmp_path, capsys):
    cfg = write(tmp_path, "[sim]\nt_end = 1\nrecord_times = 0.5, 1\n"
                          "[experiment]\nrecord_times_b = 0.4, 1\n")
    assert main(["tv", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()
    assert "record_times_b" in capsys.readouterr().err


def test_runtime_error_lands_in_summary(tmp_path):
    # too few samples for the autocorrelation estimator
    cfg = parse_config("[sim]\ndt = 0.01\nt_end = 1\n[experiment]\nname = gap\n"
                       f"output_dir = {tmp_path}\nsample_interval = 0.1\n")
    res = run(cfg)
    assert res.status == 1 and "error" in res.summary
    assert (res.directory / "manifest.json").exists()


SMALL_TV = """
[model]
n_modes = 8
[sim]
dt = 0.002
t_end = 0.4
record_times = 0.1, 0.2, 0.3, 0.4
[experiment]
n_traj = 60
x0_a = 3
"""


def test_rerun_and_threads_give_identical_csv(tmp_path, monkeypatch):
    cfg = write(tmp_path, SMALL_TV)
    assert main(["tv", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "5"]) == 0
    assert main(["tv", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "5"]) == 0
    monkeypatch.setenv("RDERGODIC_THREADS", "3")
    assert main(["tv", "--config", cfg, "--out", str(tmp_path / "c"), "--seed", "5"]) == 0
    ref = (tmp_path / "a" / "tv" / "tv.csv").read_bytes()
    assert (tmp_path / "b" / "tv" / "tv.csv").read_bytes() == ref
    assert (tmp_path / "c" / "tv" / "tv.csv").read_bytes() == ref
    main(["tv", "--config", cfg, "--out", str(tmp_path / "d"), "--seed", "6"])
    assert (tmp_path / "d" / "tv" / "tv.csv").read_bytes() != ref


def test_simulate_and_report(tmp_path):
    cfg = write(tmp_path, "[model]\nn_modes = 4\n[sim]\ndt = 0.01\nt_end = 0.05\n"
                          "[experiment]\nn_traj = 3\nmagnitudes = 0, 1\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "simulate" / "snapshots.csv").read_text().splitlines()
    assert lines[0] == "traj_id,time,coeff_1,coeff_2,coeff_3,coeff_4"
    assert len(lines) == 1 + 6
    assert main(["doeblin", "--out", str(tmp_path)]) == 0
    assert main(["report", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report" / "summary.json").read_text())
    assert set(report["result"]["experiments"]) == {"simulate", "doeblin", "check"}


def test_doeblin_summary(tmp_path):
    assert main(["doeblin", "--out", str(tmp_path)]) == 0
    s = json.loads((tmp_path / "doeblin" / "summary.json").read_text())["result"]
    assert s["C"] == 2.0 and s["gamma_rate"] == pytest.approx(0.1386294361)


def test_small_experiments_run(tmp_path):
    base = ("[model]\nn_modes = 8\n[sim]\ndt = 0.002\nt_end = 1\n"
            "record_times = 0.25, 0.5, 0.75, 1\n[experiment]\nn_traj = 100\n")
    cfg = write(tmp_path, base + "magnitudes = 0, 5\nstress_magnitudes = 10\nt_probe = 0.5\n")
    for exp in ("moments", "uniformity", "minorize"):
        code = main([exp, "--config", cfg, "--out", str(tmp_path)])
        summary = json.loads((tmp_path / exp / "summary.json").read_text())
        assert "error" not in summary, summary
        assert code in (0, 1)
    assert (tmp_path / "moments" / "moments.csv").exists()
    assert (tmp_path / "minorize" / "minorization.csv").exists()
    gap = write(tmp_path, "[model]\nn_modes = 4\n[sim]\ndt = 0.01\nt_end = 40\n")
    assert main(["gap", "--config", gap, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "gap" / "acf.csv").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "rdergodic", "doeblin", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "doeblin: passed" in proc.stdout
