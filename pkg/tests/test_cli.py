import csv
import math
from pathlib import Path

import pytest

from kdeis.cli import main
from kdeis.report import COLUMNS, format_value

GOLDEN = Path(__file__).parent / "golden"
MINI = ["--reps", "3", "--set", "N_grid=10,20,40", "--set", "n_grid=50",
        "--set", "delta_modes=0.5", "--set", "bootstrap_B=50"]


def read(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def test_format_value():
    assert format_value(0.1) == "0.1"
    assert format_value(float("nan")) == "nan"
    assert format_value(math.inf) == "inf"
    assert format_value(True) == "1"
    assert format_value(None) == ""


def test_golden_mini_config(tmp_path):
    assert main(["fig3", "left", "--out", str(tmp_path), *MINI]) == 0
    for kind in ("raw", "agg"):
        got = read(tmp_path / f"fig3_left_{kind}.csv")
        want = read(GOLDEN / f"fig3_left_mini_{kind}.csv")
        assert got[0] == list(COLUMNS) == want[0]
        assert len(got) == len(want)
        for g, w in zip(got[1:], want[1:]):
            for col, a, b in zip(COLUMNS, g, w):
                if col in ("value", "ci_lo", "ci_hi", "h", "delta_value", "reference") and a and b:
                    assert float(a) == pytest.approx(float(b), rel=1e-9, nan_ok=True), col
                else:
                    assert a == b, col


def test_rerun_is_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["fig3", "mid", "--out", str(tmp_path / d), "--set", "n_grid=20,40,80",
                     "--set", "N_grid=30", "--reps", "3", "--set", "bootstrap_B=20"]) == 0
    for kind in ("raw", "agg"):
        a = (tmp_path / "a" / f"fig3_mid_{kind}.csv").read_bytes()
        b = (tmp_path / "b" / f"fig3_mid_{kind}.csv").read_bytes()
        assert a == b


def test_svg_output(tmp_path):
    assert main(["fig3", "left", "--out", str(tmp_path), "--emit-svg", *MINI]) == 0
    svg = (tmp_path / "fig3_left.svg").read_text(encoding="utf-8")
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["fig3", "left", "--out", str(tmp_path), "--set", "N_grid=5,3"]) == 2
    assert "config error" in capsys.readouterr().err
    bad = tmp_path / "bad.ini"
    bad.write_text("[common]\nreps = many\n")
    assert main(["lowerbound", "--config", str(bad)]) == 2


def test_strict_exit_code_on_failed_check(tmp_path, monkeypatch):
    import kdeis.cli as cli

    row = dict.fromkeys(COLUMNS, "")
    row.update(experiment="estimate", metric="variance", check="fail")
    monkeypatch.setattr(cli, "run_experiment", lambda config: ([], [row]))
    assert main(["estimate", "--out", str(tmp_path), "--strict"]) == 3
    assert main(["estimate", "--out", str(tmp_path)]) == 0


def test_parser_rejects_unknown_panel():
    with pytest.raises(SystemExit):
        main(["fig3", "top"])
