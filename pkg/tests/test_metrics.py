"""Tests for the run metrics module."""

import json

import pytest

from gross_tower.metrics import MetricsCollector, metric_key


def test_metric_keys_sort_tags():
    assert metric_key("hecke_ms") == "hecke_ms"
    assert metric_key("hecke_ms", {"op": "T", "m": 1}) == "hecke_ms[m=1,op=T]"


def test_counters():
    m = MetricsCollector()
    m.increment("heegner_points")
    m.increment("heegner_points", 2)
    m.increment("classifications", tags={"m": 1})

    assert m.counter("heegner_points") == 3
    assert m.counter("classifications", tags={"m": 1}) == 1
    assert m.counter("classifications") == 0


def test_gauges_keep_last_value():
    m = MetricsCollector()
    m.gauge("class_number", 1, tags={"m": 0})
    m.gauge("class_number", 2, tags={"m": 0})

    assert m.gauge_value("class_number", tags={"m": 0}) == 2
    assert m.gauge_value("class_number", tags={"m": 1}) is None


def test_observation_stats():
    m = MetricsCollector()
    for v in (10, 20, 30, 40, 50):
        m.observe("suite_ms", v, tags={"suite": "euler"})

    stats = m.stats("suite_ms", tags={"suite": "euler"})
    assert stats["count"] == 5
    assert stats["total"] == 150
    assert stats["min"] == 10
    assert stats["max"] == 50
    assert stats["mean"] == 30
    assert m.stats("suite_ms") == {"count": 0, "total": 0}


def test_timer_records_even_on_error():
    m = MetricsCollector()
    with m.timer("family_ms"):
        pass
    with pytest.raises(ValueError):
        with m.timer("family_ms"):
            raise ValueError("boom")

    assert m.stats("family_ms")["count"] == 2
    assert m.stats("family_ms")["min"] >= 0


def test_summary_and_json():
    m = MetricsCollector()
    m.increment("commands")
    m.gauge("matrix_size", 42, tags={"op": "U"})
    m.observe("hecke_ms", 1.5)

    summary = m.summary()
    assert summary["counters"] == {"commands": 1}
    assert summary["gauges"] == {"matrix_size[op=U]": 42}
    assert summary["timings"]["hecke_ms"]["count"] == 1
    assert summary["wall_ms"] >= 0
    assert json.loads(m.to_json())["gauges"]["matrix_size[op=U]"] == 42
