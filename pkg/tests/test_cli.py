import subprocess
import sys

import pytest

from reciprosim import __version__
from reciprosim.cli import main

CONFIG = "kind = TOKEN\nN = 8\nhorizon = 30\nseeds = 1..2\ncontrols = tokens_disabled\n"


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text(CONFIG)
    return p


def exit_code(argv):
    try:
        return main(argv)
    except SystemExit as exc:  # argparse bails out this way
        return exc.code


def test_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out == f"reciprosim {__version__}\n"


def test_validate_ok(config, capsys):
    assert main(["validate", str(config)]) == 0
    assert capsys.readouterr().out.startswith("ok: TOKEN, 2 seeds")


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["run"], ["run", "x", "--jobs", "many"]])
def test_usage_errors_exit_1(argv):
    assert exit_code(argv) == 1


def test_bad_job_count_is_usage(config, tmp_path):
    assert main(["run", str(config), "--out", str(tmp_path / "o"), "--jobs", "0"]) == 1


def test_bad_seed_override_is_usage(config, tmp_path):
    assert main(["run", str(config), "--out", str(tmp_path / "o"), "--seeds", "5..1"]) == 1


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("kind = TRADE\nfoo = 1\np0 = 2\nseeds = 1\n")
    assert main(["validate", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "'foo'" in err and "p0" in err
    assert main(["validate", str(tmp_path / "missing.cfg")]) == 2
    bad.write_text("kind = TRADE\n[nowhere]\n")
    assert main(["validate", str(bad)]) == 2


def test_run_then_analyze(config, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out), "--seeds", "4"]) == 0
    assert (out / "seed-4" / "treatment.log").exists()
    assert not (out / "seed-1").exists()
    capsys.readouterr()

    assert main(["analyze", str(out / "seed-4" / "treatment.log")]) == 0
    text = capsys.readouterr().out
    assert text.startswith("run: kind=TOKEN seed=4")

    assert main(["analyze", str(out / "seed-4" / "treatment.log"), "--format", "csv"]) == 0
    csv_out = capsys.readouterr().out
    assert csv_out == (out / "seed-4" / "treatment.csv").read_text()


def test_out_directory_from_environment(config, tmp_path, monkeypatch):
    monkeypatch.setenv("RECIPROSIM_OUT", str(tmp_path / "env-out"))
    assert main(["run", str(config)]) == 0
    assert (tmp_path / "env-out" / "MANIFEST").exists()


def test_analyze_with_params_file(config, tmp_path, capsys):
    out = tmp_path / "out"
    main(["run", str(config), "--out", str(out)])
    params = tmp_path / "params.cfg"
    params.write_text("[detector]\ndelta = 9\n")
    capsys.readouterr()
    assert main(["analyze", str(out / "seed-1" / "treatment.log"), "--params", str(params)]) == 0
    assert "delta=9" in capsys.readouterr().out


def test_analyze_without_scenario_is_config_error(tmp_path, config):
    out = tmp_path / "out"
    main(["run", str(config), "--out", str(out)])
    log = out / "seed-1" / "treatment.log"
    (out / "seed-1" / "treatment.cfg").unlink()
    assert main(["analyze", str(log)]) == 2


def test_corrupt_log_is_runtime_error(tmp_path, config):
    out = tmp_path / "out"
    main(["run", str(config), "--out", str(out)])
    log = out / "seed-1" / "treatment.log"
    lines = log.read_text().splitlines(keepends=True)
    log.write_text("".join(lines[:3] + ["garbage\n"] + lines[3:]))
    assert main(["analyze", str(log)]) == 3


def test_tampered_log_fails_replay(tmp_path, config):
    out = tmp_path / "out"
    main(["run", str(config), "--out", str(out)])
    treatment = out / "seed-1" / "treatment.log"
    control = out / "seed-1" / "tokens_disabled.log"
    # the control's events under the treatment's sidecar: digests disagree
    treatment.write_bytes(control.read_bytes())
    assert main(["analyze", str(treatment)]) == 3


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "reciprosim", "version"], capture_output=True, text=True
    )
    assert proc.returncode == 0 and proc.stdout.strip() == f"reciprosim {__version__}"
