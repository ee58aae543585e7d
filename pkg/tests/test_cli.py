import subprocess
import sys

import pytest
import yaml

from cal.cli import main
from cal.experiments.config import EXPERIMENTS

SMALL_POPEQ = {
    "iterations": 100,
    "topology": {"regions": [{"id": "R1", "level": 1, "columns": 256, "cells": 4, "segments": 2, "k": 16,
                              "correlator": {"mode": "hardwired", "fanin": 2}}]},
}


def write_config(path, checks):
    doc = dict(SMALL_POPEQ, checks=checks)
    path.write_text(yaml.safe_dump(doc))
    return path


LOOSE = {"first_prediction_by": 100, "always_predict_from": 101, "rms_from": 90, "rms_to": 100, "rms_max": 10.0}


def test_list(capsys):
    assert main(["list"]) == 0
    assert capsys.readouterr().out.split() == list(EXPERIMENTS)


def test_config_prints_yaml(capsys):
    assert main(["config", "popeq"]) == 0
    assert yaml.safe_load(capsys.readouterr().out)["beta"] == 3.89


def test_run_passing(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.yaml", LOOSE)
    out = tmp_path / "out"
    assert main(["run", "popeq", "--config", str(cfg), "--seed", "7", "--out", str(out)]) == 0
    assert "PASS" in capsys.readouterr().out
    for name in ("metrics.csv", "snapshot.zip", "report.json", "config.yaml"):
        assert (out / name).exists()
    assert yaml.safe_load((out / "config.yaml").read_text())["seed"] == 7


def test_run_failing_check_exits_nonzero(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", dict(LOOSE, rms_max=0.0))
    assert main(["run", "popeq", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 1


def test_unknown_experiment():
    with pytest.raises(SystemExit) as err:
        main(["run", "nope", "--out", "x"])
    assert err.value.code != 0


def test_console_entry_point(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", LOOSE)
    proc = subprocess.run([sys.executable, "-m", "cal.cli", "run", "popeq", "--config", str(cfg),
                           "--seed", "1", "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("popeq (seed 1): PASS")
