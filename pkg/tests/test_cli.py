"""Tests for the command-line module."""

import json

import pytest

from gross_tower.cli import build_parser, config_from_args, main, parse_eigensystem
from gross_tower.exceptions import InvalidInputError
from gross_tower.report import JsonReport


def run_to_file(tmp_path, *argv):
    path = str(tmp_path / "report.json")
    code = main([*argv, "--out", path])
    return code, JsonReport.load(path)


def test_parse_eigensystem():
    assert parse_eigensystem("2:-2,5:1") == {2: -2, 5: 1}
    assert parse_eigensystem("") == {}
    with pytest.raises(InvalidInputError):
        parse_eigensystem("2=-2")


def test_flags_build_the_instance():
    args = build_parser().parse_args(
        ["theta", "--nminus", "11", "--dk", "-3", "--m", "2", "--nmax", "2", "--eigensystem", "2:-2"]
    )
    config = config_from_args(args)
    assert config.N_minus == 11
    assert config.D_K == -3
    assert config.m_max == 2
    assert config.n_max == 2
    assert config.eigensystem == {2: -2}


def test_selftest(tmp_path):
    code, report = run_to_file(tmp_path, "selftest")
    assert code == 0
    assert report["exit_code"] == 0
    assert report["results"]["passed"] is True
    assert report["schema"].startswith("gross-tower/")


def test_selftest_to_stdout(capsys):
    assert main(["selftest"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["command"] == "selftest"


def test_even_parity_exits_with_two(tmp_path):
    code, report = run_to_file(tmp_path, "classset", "--nminus", "15")
    assert code == 2
    assert "even parity" in report["error"]["message"]
    assert report["results"] is None


def test_classset_desk(tmp_path):
    code, report = run_to_file(tmp_path, "classset", "--nminus", "2", "--p", "5", "--mmax", "1")
    assert code == 0
    levels = report["results"]["levels"]
    assert [lvl["m"] for lvl in levels] == [0, 1]
    assert levels[0]["h"] == 1
    assert levels[0]["mass"] == "1/12"
    assert levels[1]["mass"] == levels[1]["mass_expected"] == "1/2"
    assert report["precision"]["all_certified"] is True


def test_hecke_t2_on_disc_11(tmp_path):
    code, report = run_to_file(tmp_path, "hecke", "--nminus", "11", "--op", "T", "--param", "2", "--level", "0")
    assert code == 0
    results = report["results"]
    assert results["eigenvalues"] == [-2, 3]
    assert results["column_sum_audit"] is True
    assert all(results["commutativity_audit"].values())
    assert report["instance"]["arguments"] == {"op": "T", "param": 2, "m": 0}


def test_verify_with_no_suite(tmp_path):
    code, report = run_to_file(tmp_path, "verify", "--suite", "none", "--dk", "-11")
    assert code == 0
    assert report["results"]["report"]["counts"] == {"pass": 0, "fail": 0, "skip": 0}


def test_theta_needs_precision(tmp_path):
    code, report = run_to_file(tmp_path, "theta", "--nminus", "11", "--dk", "-3", "--precision", "4")
    assert code == 2
    assert report["error"]["details"]["required_d"] == 2


def test_theta_instance(tmp_path):
    code, report = run_to_file(tmp_path, "theta", "--nminus", "11", "--dk", "-3", "--precision", "5", "--nmax", "1")
    assert code == 0
    results = report["results"]
    assert results["passed"] is True
    assert all(results["audits"].values())
    assert results["eigen"]["alpha"] % 5 == 1
    assert [layer["n"] for layer in results["layers"]] == [0, 1]
