import subprocess
import sys

import pytest

from mvsde.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from mvsde.config import parse_config

SMALL = ["--set", "L=7", "--set", "n_space=561", "--set", "m_ref=256", "--set", "levels=[32,64,128]",
         "--set", "n_paths=200", "--set", "store_count=33"]


def test_drift_gen_cli(tmp_path, capsys):
    code = main(["drift-gen", "--set", "beta=0.49", *SMALL, "--out", str(tmp_path)])
    assert code == EXIT_OK
    echo = parse_config((tmp_path / "config_echo.ini").read_text())
    assert echo.hurst == 0.51
    assert "drift.csv" in capsys.readouterr().out


def test_config_file_and_env_output(tmp_path, monkeypatch):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[experiment]\nbeta = 0.2\n")
    out = tmp_path / "env_out"
    monkeypatch.setenv("MVSDE_OUTPUT_DIR", str(out))
    assert main(["rate-sweep", "--config", str(cfg), *SMALL, "--out", str(tmp_path / "ignored")]) == EXIT_OK
    assert (out / "rates.csv").exists()
    assert not (tmp_path / "ignored").exists()


def test_env_var_does_not_touch_config(tmp_path, monkeypatch):
    monkeypatch.setenv("MVSDE_OUTPUT_DIR", str(tmp_path))
    assert main(["drift-gen", "--set", "beta=0.2", *SMALL]) == EXIT_OK
    assert parse_config((tmp_path / "config_echo.ini").read_text()).beta == 0.2


@pytest.mark.parametrize(
    "args",
    [
        ["rate-sweep"],
        ["rate-sweep", "--set", "beta=0.7"],
        ["rate-sweep", "--set", "beta=0.2", "--set", "levels=[100]"],
        ["rate-sweep", "--set", "beta=0.2", "--set", "nonsense=1"],
        ["rate-sweep", "--set", "beta"],
        ["rate-sweep", "--config", "/nonexistent/file.ini"],
    ],
)
def test_config_errors_exit_2(args, tmp_path, capsys):
    assert main(args + ["--out", str(tmp_path)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_numerical_failure_exit_3(tmp_path, capsys):
    args = ["density-compare", "--set", "beta=0.3", *SMALL, "--set", "L=3.5", "--set", "n_space=281"]
    assert main(args + ["--out", str(tmp_path)]) == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "mvsde", "drift-gen", "--set", "beta=0.3", *SMALL, "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "drift.csv").exists()
