import json
import subprocess
import sys

import numpy as np
import pytest

from pkslab import cli
from pkslab.estimates import radial_laplacian
from pkslab.validate import check_complementarity, run_battery


@pytest.fixture
def root(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path))
    return tmp_path


def test_evolve_writes_series_and_manifest(root):
    code = cli.main(["evolve", "--m", "8", "--cells", "64", "--t-end", "0.01",
                     "--snapshots", "2", "--out", "r1"])
    assert code == 0
    run = root / "r1" / "evolve"
    assert (run / "series.csv").read_bytes().count(b"\r\n") == 4
    man = json.loads((run / "manifest.json").read_text())
    assert man["status"] == {"m=8": "ok"}
    assert man["config"]["cells"] == 64


def test_usage_errors_exit_2(root, capsys):
    assert cli.main(["evolve", "--m", "8", "--cells", "0"]) == 2
    assert "cells:" in capsys.readouterr().err
    assert cli.main(["sweep-stationary", "--m-values", "1.5,4"]) == 2
    assert cli.main(["nonsense"]) == 2
    assert cli.main(["evolve", "--config", str(root / "nope.yaml")]) == 2


def test_run_failure_exits_1_and_keeps_manifest(root):
    # the bump spreads past the outer 10% of the domain for small m
    code = cli.main(["evolve", "--m", "1.2", "--cells", "32", "--r-max", "1.15",
                     "--t-end", "5", "--out", "bad"])
    assert code == 1
    man = json.loads((root / "bad" / "evolve" / "manifest.json").read_text())
    assert any(v.startswith("failed") for v in man["status"].values())


def test_stationary_and_sweeps(root):
    assert cli.main(["stationary", "--m", "8", "--cells", "128", "--out", "s"]) == 0
    summary = json.loads((root / "s" / "stationary" / "summary.json").read_text())
    assert all(summary["checks"].values())
    assert cli.main(["sweep-stationary", "--m-values", "4,8,16,32", "--cells", "128",
                     "--out", "s"]) == 0
    assert (root / "s" / "sweep-stationary" / "m_32.csv").exists()
    assert cli.main(["sweep-evolve", "--m-values", "8,16", "--cells", "64",
                     "--t-end", "0.01", "--snapshots", "1", "--out", "s"]) == 0
    data = json.loads((root / "s" / "sweep-evolve" / "summary.json").read_text())
    assert data["slopes"] is None


def test_probe_runs(root):
    assert cli.main(["evolve", "--m", "8", "--cells", "64", "--t-end", "0.01",
                     "--perturbation", "0.01", "--seed", "3", "--out", "p"]) == 0
    assert (root / "p" / "evolve" / "probe.csv").exists()


def test_validate_battery_passes_and_covers_n4():
    checks = run_battery()
    assert all(c.passed for c in checks), [c for c in checks if not c.passed]
    names = " ".join(c.name for c in checks)
    assert "n=4" in names and "n=3" in names


def test_broken_laplacian_is_caught():
    def broken(g, v):
        out = radial_laplacian(g, v)
        return out + 1e-3 * np.sin(g.centers)

    assert check_complementarity(radial_laplacian).passed
    assert not check_complementarity(broken).passed
    assert not all(c.passed for c in run_battery(broken))


def test_validate_subcommand(root):
    proc = subprocess.run([sys.executable, "-m", "pkslab.cli", "validate"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert "10/10 passed" in proc.stdout
