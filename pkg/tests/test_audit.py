"""Tests for the precision audit module."""

from gross_tower.audit import PrecisionAudit


def test_default_precision_applies():
    audit = PrecisionAudit(default_precision=8)
    entry = audit.record("hensel_sqrt", 5, detail={"value": "-11"})

    assert entry.precision == 8
    assert entry.certified
    assert entry.to_dict()["detail"] == {"value": "-11"}


def test_empty_audit():
    audit = PrecisionAudit(default_precision=6)

    assert audit.all_certified
    assert audit.max_precision == 6
    assert audit.summary()["operations"] == {}


def test_summary_groups_by_operation():
    audit = PrecisionAudit(default_precision=8)
    audit.record("local_embedding", 5)
    audit.record("local_embedding", 7, 10)
    audit.record("theta", 5, 5, certified=False)

    summary = audit.summary()
    assert summary["max_precision"] == 10
    assert not summary["all_certified"]
    assert list(summary["operations"]) == ["local_embedding", "theta"]
    assert summary["operations"]["local_embedding"] == {
        "count": 2,
        "primes": [5, 7],
        "precision": 10,
        "certified": True,
    }
    assert summary["operations"]["theta"]["certified"] is False
    assert len(audit.records) == 3
