import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from nab2lab.cli import main

ROOT = Path(__file__).resolve().parents[1]
ACCEPTANCE = ROOT / "configs" / "acceptance"

ABELIAN = """\
[experiment]
kind = disk-obstruction
seed = 3

[params]
N = 1

[field A]
0 0 0 1.0

[boundary phi]
"""

RANDOM_GAUGE = """\
[experiment]
kind = gauge-check
seed = 5

[params]
N = 2
cap = 4
cases = 6
"""


@pytest.fixture
def cfg(tmp_path):
    def write(text, name="exp.cfg"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write


def test_list_kinds(capsys):
    assert main(["list-kinds"]) == 0
    names = [line.split("\t")[0] for line in capsys.readouterr().out.splitlines()]
    assert names == ["disk-obstruction", "transport", "triangle-orders", "bch-compare",
                     "loop-area", "gauge-check"]


def test_validate(cfg, capsys):
    assert main(["validate", cfg(ABELIAN)]) == 0
    assert capsys.readouterr().out.startswith("ok: disk-obstruction")


def test_run_to_stdout(cfg, capsys):
    assert main(["run", cfg(ABELIAN)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("experiment,point,case,")
    assert lines[1].startswith("disk-obstruction,case,0,6,6,0.5,")
    assert lines[-1].endswith("pass,,all_pass,1")


def test_run_to_file(cfg, tmp_path, capsys):
    out = tmp_path / "out.csv"
    assert main(["run", cfg(ABELIAN), "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert out.read_text().splitlines()[0].startswith("experiment,")


def test_failed_checks_still_exit_zero(cfg, capsys):
    text = ABELIAN.replace("N = 1", "N = 1\nexpected = 0.4")
    assert main(["run", cfg(text)]) == 0
    out = capsys.readouterr().out
    assert ",fail," in out and out.rstrip().endswith("all_pass,0")


@pytest.mark.parametrize("argv", [[], ["run"], ["frobnicate"], ["run", "x.cfg", "--jobs", "many"]])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_missing_file_exits_2(tmp_path, capsys):
    assert main(["run", str(tmp_path / "absent.cfg")]) == 2
    assert "config error" in capsys.readouterr().err


def test_bad_config_exits_2(cfg, capsys):
    assert main(["run", cfg("[experiment]\nkind = gauge-check\n[params]\nwobble = 1\n")]) == 2
    assert "unknown parameter" in capsys.readouterr().err
    assert main(["validate", cfg("[params]\nN = 1\n")]) == 2


def test_zero_jobs_rejected(cfg, capsys):
    assert main(["run", cfg(ABELIAN), "--jobs", "0"]) == 2


def test_seed_override(cfg, capsys):
    path = cfg(RANDOM_GAUGE)
    main(["run", path])
    base = capsys.readouterr().out
    main(["run", path, "--seed", "5"])
    assert capsys.readouterr().out == base
    main(["run", path, "--seed", "6"])
    assert capsys.readouterr().out != base


def test_jobs_do_not_change_output(capsys):
    path = str(ACCEPTANCE / "c07_bch_order2.cfg")
    main(["run", path])
    serial = capsys.readouterr().out
    main(["run", path, "--jobs", "4"])
    assert capsys.readouterr().out == serial


def test_log_levels(cfg, capsys, monkeypatch):
    import logging
    monkeypatch.setenv("NAB2LAB_LOG", "info")
    logging.getLogger().handlers.clear()
    main(["run", cfg(ABELIAN)])
    err = capsys.readouterr().err
    assert "finished in" in err and "overall: pass" in err
    logging.getLogger().handlers.clear()


def test_console_script_end_to_end(cfg):
    exe = shutil.which("nab2lab")
    cmd = [exe] if exe else [sys.executable, "-m", "nab2lab.cli"]
    proc = subprocess.run(cmd + ["run", cfg(ABELIAN)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1].startswith("disk-obstruction,case,0,6,6,0.5,")
    bad = subprocess.run(cmd + ["validate", cfg("[experiment]\nkind = nope\n", "bad.cfg")],
                         capture_output=True, text=True)
    assert bad.returncode == 2
