import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from relpath.cli import format_cell, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

COLUMNS = {
    "propagate": ["x", "psi_re", "psi_im", "probability"],
    "double-slit": ["x", "p_coherent", "p_whichpath", "cross_term"],
    "which-path": ["x", "p_whichpath", "phi1_re", "phi1_im", "phi2_re", "phi2_im"],
    "environment": ["x", "probability", "direct", "interference"],
    "entropy-scan": ["coupling", "H_eigen", "H_replica", "purity", "interference_norm"],
    "history": ["stage", "t_end", "trace", "H_eigen", "H_replica", "purity"],
    "influence-check": ["variant", "factorizable", "sv_ratio", "exchange_error", "min_eigenvalue", "H_eigen",
                        "purity"],
}
ROWS = {"propagate": 241, "double-slit": 301, "which-path": 301, "environment": 301, "entropy-scan": 4,
        "history": 3, "influence-check": 4}


def read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.mark.parametrize("scenario", sorted(COLUMNS))
def test_scenario_table_schema(scenario, tmp_path, capsys):
    assert main([scenario, "--config", str(CONFIGS / f"{scenario}.ini"), "--out", str(tmp_path)]) == 0
    table = read(tmp_path / f"{scenario}.csv")
    assert table[0] == COLUMNS[scenario]
    assert len(table) - 1 == ROWS[scenario]
    manifest = (tmp_path / "manifest.txt").read_text()
    assert f"scenario: {scenario}" in manifest
    assert "numpy: " in manifest and "elapsed_seconds: " in manifest
    assert "[grid]" in manifest
    assert capsys.readouterr().out.strip().endswith(f"{scenario}.csv")


@pytest.mark.parametrize("scenario", ["double-slit", "history", "influence-check"])
def test_rerun_is_byte_identical(scenario, tmp_path):
    cfg = str(CONFIGS / f"{scenario}.ini")
    assert main([scenario, "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main([scenario, "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / f"{scenario}.csv").read_bytes()
    assert a == (tmp_path / "b" / f"{scenario}.csv").read_bytes()


def test_seed_changes_random_inputs(tmp_path):
    cfg = str(CONFIGS / "influence-check.ini")
    main(["influence-check", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["influence-check", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "7"])
    assert (tmp_path / "a" / "influence-check.csv").read_bytes() != \
        (tmp_path / "b" / "influence-check.csv").read_bytes()


def test_mode_override(tmp_path):
    cfg = str(CONFIGS / "propagate.ini")
    main(["propagate", "--config", cfg, "--out", str(tmp_path), "--mode", "kernel"])
    assert "mode = kernel" in (tmp_path / "manifest.txt").read_text()


def test_float_format_round_trips():
    for v in (0.1, 1 / 3, -2.5e-300, 1e17 + 2, np.float64(np.pi)):
        assert float(format_cell(v)) == float(v)
    assert format_cell(-0.0) == "0"
    assert format_cell(True) == "1"
    with pytest.raises(TypeError):
        format_cell(1j)


@pytest.mark.parametrize("text,code,category", [
    ("[scenario]\nname = double-slit\n[grid]\nn_points = 1\n", 2, "config"),
    ("[scenario]\nname = double-slit\n[bogus]\n", 2, "config"),
    ("[scenario]\nname = double-slit\n[slits]\nx1 = -40\n", 3, "domain"),
    ("[scenario]\nname = influence-check\n[influence]\n[grid]\nn_points = 30\n", 5, "refusal"),
])
def test_error_exit_codes(text, code, category, tmp_path, capsys):
    path = tmp_path / "run.ini"
    path.write_text(text)
    assert main([text.split("name = ")[1].split()[0], "--config", str(path), "--out", str(tmp_path)]) == code
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    assert err[0].startswith(f"error category={category}: ")


def test_missing_config_file(tmp_path, capsys):
    assert main(["double-slit", "--config", str(tmp_path / "nope.ini")]) == 2
    assert "category=config" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "relpath", "double-slit", "--config",
                           str(CONFIGS / "double-slit.ini"), "--out", str(tmp_path)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "double-slit.csv").exists()
