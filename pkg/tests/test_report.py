"""Tests for the JSON report module."""

import json
from dataclasses import dataclass
from fractions import Fraction

from gross_tower.cm_fields import BinaryQF
from gross_tower.config import SCHEMA_VERSION
from gross_tower.report import JsonReport, canonical
from gross_tower.shimura import TildePoint


@dataclass
class Pair:
    left: int
    right: Fraction


def test_canonical_values():
    assert canonical(Fraction(5, 6)) == "5/6"
    assert canonical(Fraction(4, 2)) == 2
    assert canonical(True) is True
    assert canonical((1, 2)) == [1, 2]
    assert canonical({3, 1, 2}) == [1, 2, 3]
    assert canonical({2: Fraction(1, 2)}) == {"2": "1/2"}
    assert canonical(Pair(1, Fraction(1, 3))) == {"left": 1, "right": "1/3"}
    assert canonical([TildePoint(0, 1), BinaryQF(2, 2, 3)]) == [
        {"cls": 0, "fiber": 1},
        {"a": 2, "b": 2, "c": 3},
    ]


def test_timing_is_optional():
    report = JsonReport(
        command="classset",
        instance={"N_minus": 2},
        results={"mass": Fraction(1, 12)},
        timing={"elapsed_ms": 3.2},
        metrics={"counters": {}},
    )
    full = report.to_dict()
    bare = report.to_dict(include_timing=False)

    assert full["schema"] == SCHEMA_VERSION
    assert full["results"] == {"mass": "1/12"}
    assert "timing" in full and "metrics" in full
    assert "timing" not in bare and "metrics" not in bare
    assert "error" not in bare


def test_json_is_deterministic():
    a = JsonReport(command="hecke", instance={"p": 5, "N_minus": 2}, results={"b": 1, "a": 2})
    b = JsonReport(command="hecke", instance={"N_minus": 2, "p": 5}, results={"a": 2, "b": 1})

    assert a.to_json(include_timing=False) == b.to_json(include_timing=False)


def test_write_and_load(tmp_path):
    path = str(tmp_path / "out" / "report.json")
    report = JsonReport(command="selftest", instance={}, results={"passed": True}, exit_code=0)
    report.write(path)

    loaded = JsonReport.load(path)
    assert loaded["results"] == {"passed": True}
    assert loaded["command"] == "selftest"
    assert not (tmp_path / "out" / "report.json.tmp").exists()
    with open(path, encoding="utf-8") as f:
        assert json.load(f) == loaded
