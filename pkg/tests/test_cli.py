import json
import shutil
import subprocess

import pytest

from eigloc.cli import main

FAST = "domain = box 2x1, 3x1, 4x1\nladder_rel = 1/8, 1/16, 1/32\nchecks = green, chiti, main\n"


def test_solve(capsys, tmp_path):
    out = tmp_path / "u.csv"
    assert main(["solve", "box 2x1", "--ladder-rel", "1/8,1/16,1/32", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "lambda=" in text and out.read_text().startswith("# dim 2")


def test_sections(capsys):
    assert main(["sections", "box 4x1", "--i", "1", "--scan", "3"]) == 0
    cap = capsys.readouterr()
    assert cap.out.startswith("i,y1,mu,flags")
    assert json.loads(cap.err)["mu_star"] == pytest.approx(9.8696044, rel=1e-6)


def test_check_exit_codes(capsys):
    assert main(["check", "box 2x1", "--checks", "green,chiti", "--h", "1/16,1/32,1/64"]) == 0
    assert "chiti" in capsys.readouterr().out
    assert main(["check", "box 2x1", "--checks", "nope"]) == 2
    assert main(["check", "blob 1"]) == 2


def test_sweep_and_report(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(FAST + "output = sw\n")
    assert main(["sweep", str(cfg)]) == 0
    assert "slope" in capsys.readouterr().out
    assert main(["report", str(tmp_path / "sw"), "--format", "csv"]) == 0
    assert capsys.readouterr().out.startswith("check_id,body,lhs,rhs,ratio,err,pass")
    assert main(["report", str(tmp_path / "sw"), "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["failed"] is False


def test_bad_config_and_missing_file(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("checks = main\n")
    assert main(["sweep", str(cfg)]) == 2
    assert main(["sweep", str(tmp_path / "absent.cfg")]) == 2
    assert main(["report", str(tmp_path / "absent")]) == 2


@pytest.mark.skipif(shutil.which("eigloc") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["eigloc", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "verify" in res.stdout
