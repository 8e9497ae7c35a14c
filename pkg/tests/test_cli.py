"""End-to-end tests of the fracint command line"""

import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from helpers import config
from helpers.grid import GridFunction, make_grid
from helpers.run_functions import read_grid_function, read_json, write_grid_function
from main import main
from processes import acceptance


def _write_config(tmp_path: Path, document: dict) -> Path:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def _run(tmp_path: Path, command: str, document: dict | None = None, *flags: str, out: str = "out") -> int:
    argv = [command, "--out", str(tmp_path / out)]
    if document is not None:
        argv += ["--config", str(_write_config(tmp_path, document))]
    return main(argv + list(flags))


# --------------------------------------------------------------------
# eval
# --------------------------------------------------------------------
def test_eval_zero_input_with_oracle(tmp_path, capsys):
    assert _run(tmp_path, "eval", {"input": {"kind": "zero"}}, "--oracle") == config.EXIT_OK
    result = read_grid_function(tmp_path / "out" / "eval_result.bin")
    assert result.grid.size == 64
    assert not result.values.any()
    report = read_json(tmp_path / "out" / "eval_report.json")
    assert report["oracle"]["discrepancy"] == 0.0
    assert "oracle discrepancy: 0.000e+00" in capsys.readouterr().out
    assert read_json(tmp_path / "out" / "run_info.json")["exit_code"] == 0


def test_eval_random_input_matches_oracle(tmp_path):
    assert _run(tmp_path, "eval", None, "--oracle") == config.EXIT_OK
    report = read_json(tmp_path / "out" / "eval_report.json")
    assert report["oracle"]["discrepancy"] <= config.ORACLE_TOL
    assert report["operator"] == "strong"


def test_eval_cone_sum_reports_range(tmp_path):
    document = {"operator": "cone_sum", "ell_min": -1, "ell_max": 1}
    assert _run(tmp_path, "eval", document) == config.EXIT_OK
    sidecar = read_json(tmp_path / "out" / "eval_result.bin.json")
    assert sidecar["metadata"]["ell_range_used"] == [-1, 1]
    assert sidecar["metadata"]["excluded_mass"] > 0


def test_eval_oracle_needs_strong_operator(tmp_path):
    assert _run(tmp_path, "eval", None, "--oracle", "--operator", "joint") == config.EXIT_CONFIG


def test_eval_oracle_guard(tmp_path):
    document = {"grid": {"cells_x": 64, "cells_y": 64}}
    assert _run(tmp_path, "eval", document, "--oracle") == config.EXIT_GUARD
    assert not (tmp_path / "out" / "eval_result.bin").exists()


# --------------------------------------------------------------------
# configuration errors
# --------------------------------------------------------------------
def test_invalid_alpha_exits_with_config_code(tmp_path):
    assert _run(tmp_path, "eval", {"exponents": {"alpha": 1.5}}) == config.EXIT_CONFIG
    error = read_json(tmp_path / "out" / "error.json")
    assert error["command"] == "eval"
    assert "alpha" in error["message"]


def test_unknown_config_key(tmp_path):
    assert _run(tmp_path, "characteristic", {"colour": "blue"}) == config.EXIT_CONFIG
    assert _run(tmp_path, "characteristic", {"grid": {"cells_z": 4}}) == config.EXIT_CONFIG


def test_fractional_cell_count_is_rejected(tmp_path):
    assert _run(tmp_path, "eval", {"grid": {"cells_x": 8.9}}) == config.EXIT_CONFIG
    assert "cells_x" in read_json(tmp_path / "out" / "error.json")["message"]


def test_diverging_power_weights_are_rejected(tmp_path):
    assert _run(tmp_path, "characteristic", {"weights": {"kind": "power", "a": 0.5}}) == config.EXIT_CONFIG


# --------------------------------------------------------------------
# characteristic
# --------------------------------------------------------------------
def test_characteristic_of_unit_weights(tmp_path):
    assert _run(tmp_path, "characteristic", {"weights": {"kind": "unit"}}, "--table") == config.EXIT_OK
    document = read_json(tmp_path / "out" / "characteristic_report.json")
    report = document["report"]
    assert report["value"] == pytest.approx(2.0)
    assert report["argmax"]["q_side"] == 8 and report["argmax"]["p_side"] == 8
    assert report["family_size"] == 225
    table = (tmp_path / "out" / "characteristic_table.csv").read_text().splitlines()
    assert table[0] == "q_corner,q_side,p_corner,p_side,ell,value"
    assert len(table) == 226


def test_characteristic_eccentric_filter_adds_scan(tmp_path):
    code = _run(tmp_path, "characteristic", None, "--filter", "ECCENTRICITY", "--ell", "1")
    assert code == config.EXIT_OK
    document = read_json(tmp_path / "out" / "characteristic_report.json")
    assert document["report"]["family"] == "ECCENTRICITY(1)"
    assert document["hypothesis_scan"]["probes"] > 0


def test_characteristic_keeps_report_when_scan_is_empty(tmp_path):
    document = {"grid": {"extent_y": 2.0}}
    code = _run(tmp_path, "characteristic", document, "--filter", "ECCENTRICITY", "--ell", "4")
    assert code == config.EXIT_OK
    report = read_json(tmp_path / "out" / "characteristic_report.json")
    assert report["report"]["family"] == "ECCENTRICITY(4)"
    assert report["report"]["family_size"] > 0
    assert report["hypothesis_scan"]["probes"] == 0
    assert "2^4" in report["hypothesis_scan"]["skipped"]


def test_characteristic_eccentric_filter_needs_ell(tmp_path):
    assert _run(tmp_path, "characteristic", None, "--filter", "ECCENTRICITY") == config.EXIT_CONFIG


def test_characteristic_reports_are_deterministic(tmp_path):
    document = {"weights": {"kind": "random"}}
    assert _run(tmp_path, "characteristic", document, "--seed", "5", out="a") == config.EXIT_OK
    assert _run(tmp_path, "characteristic", document, "--seed", "5", out="b") == config.EXIT_OK
    a = (tmp_path / "a" / "characteristic_report.json").read_bytes()
    b = (tmp_path / "b" / "characteristic_report.json").read_bytes()
    assert a == b


def test_file_weights(tmp_path):
    grid = make_grid(1, 1, 1.0, 1.0, 8, 8)
    write_grid_function(tmp_path / "omega.bin", GridFunction.constant(grid, 1.0))
    write_grid_function(tmp_path / "sigma.bin", GridFunction.constant(grid, 1.0))
    document = {
        "weights": {
            "kind": "file",
            "omega_path": str(tmp_path / "omega.bin"),
            "sigma_path": str(tmp_path / "sigma.bin"),
        }
    }
    assert _run(tmp_path, "characteristic", document) == config.EXIT_OK
    assert read_json(tmp_path / "out" / "characteristic_report.json")["report"]["value"] == pytest.approx(2.0)


# --------------------------------------------------------------------
# cone-decay
# --------------------------------------------------------------------
def test_cone_decay_self_test(tmp_path):
    assert _run(tmp_path, "cone-decay", None, "--self-test", "--ell-min", "-4", "--ell-max", "4") == config.EXIT_OK
    report = read_json(tmp_path / "out" / "decay_self_test.json")["report"]
    assert report["fitted_eps"] == pytest.approx(0.5, abs=1e-9)
    assert report["ell_values"] == list(range(-4, 5))


def test_cone_decay_both_profiles(tmp_path):
    document = {"corpus": {"kind": "SINGLE_CELLS", "count": None}, "ell_min": -2, "ell_max": 3}
    assert _run(tmp_path, "cone-decay", document, "--profile", "both") == config.EXIT_OK
    norm = read_json(tmp_path / "out" / "decay_norm.json")
    characteristic = read_json(tmp_path / "out" / "decay_characteristic.json")
    assert norm["report"]["quantity_kind"] == "NORM_RATIO"
    assert norm["corpus"] == {"kind": "SINGLE_CELLS", "size": 64}
    assert characteristic["report"]["quantity_kind"] == "CHARACTERISTIC"
    assert (tmp_path / "out" / "decay_norm.csv").read_text().startswith("ell,quantity,kind\n")


def test_cone_decay_norm_guard(tmp_path):
    document = {"grid": {"cells_x": 64, "cells_y": 64}}
    assert _run(tmp_path, "cone-decay", document, "--profile", "norm") == config.EXIT_GUARD


# --------------------------------------------------------------------
# verify
# --------------------------------------------------------------------
@pytest.fixture
def calibration_copy(tmp_path):
    path = tmp_path / "constants.json"
    shutil.copyfile(config.CALIBRATION_PATH, path)
    return path


def test_verify_list(tmp_path, capsys):
    assert _run(tmp_path, "verify", None, "--list") == config.EXIT_OK
    out = capsys.readouterr().out
    for name in acceptance.CHECKS:
        assert name in out
    assert not (tmp_path / "out" / "run_info.json").exists()


def test_verify_selected_checks_pass(tmp_path, calibration_copy):
    document = {"calibration_path": str(calibration_copy)}
    flags = ("--check", "fit_self_test", "--check", "singular_quadrature", "--xlsx")
    assert _run(tmp_path, "verify", document, *flags) == config.EXIT_OK
    summary = read_json(tmp_path / "out" / "verify_summary.json")
    assert summary["passed"]
    assert [c["name"] for c in summary["checks"]] == ["fit_self_test", "singular_quadrature"]
    assert (tmp_path / "out" / "verify_summary.xlsx").stat().st_size > 0


def test_verify_tampered_calibration_fails(tmp_path, calibration_copy):
    calibration = read_json(calibration_copy)
    calibration["constants"]["eccentric_bound"] = 1e-6
    calibration_copy.write_text(json.dumps(calibration), encoding="utf-8")
    document = {"calibration_path": str(calibration_copy)}
    assert _run(tmp_path, "verify", document, "--check", "eccentric_decay") == config.EXIT_CHECK_FAILED
    summary = read_json(tmp_path / "out" / "verify_summary.json")
    assert not summary["passed"]
    assert summary["checks"][0]["details"]["bound"] == 1e-6
    assert "failed checks: eccentric_decay" in read_json(tmp_path / "out" / "error.json")["message"]


def test_verify_unknown_check(tmp_path):
    assert _run(tmp_path, "verify", None, "--check", "no_such_check") == config.EXIT_CONFIG


def test_verify_summary_is_deterministic(tmp_path, calibration_copy):
    document = {"calibration_path": str(calibration_copy)}
    for out in ("a", "b"):
        assert _run(tmp_path, "verify", document, "--check", "cone_reconstruction", out=out) == config.EXIT_OK
    a = (tmp_path / "a" / "verify_summary.json").read_bytes()
    b = (tmp_path / "b" / "verify_summary.json").read_bytes()
    assert a == b
    details = read_json(tmp_path / "a" / "verify_summary.json")["checks"][0]["details"]
    assert details["partition_errors"] == 0
    assert np.isclose(details["out_of_range_residual"], 0.0)
