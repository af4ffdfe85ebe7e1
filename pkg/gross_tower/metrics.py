"""Run metrics: operation counters, size gauges and stage timings.

Reports keep these in their own block, apart from the mathematical results,
so the results stay byte-identical across runs.
"""

from __future__ import annotations

import json
import time
from collections import defaultdict
from contextlib import contextmanager
from typing import Iterator, Optional


def metric_key(name: str, tags: Optional[dict] = None) -> str:
    """``name`` or ``name[k=v,...]`` with the tags sorted by key."""
    if not tags:
        return name
    return name + "[" + ",".join(f"{k}={tags[k]}" for k in sorted(tags)) + "]"


class MetricsCollector:
    """Per-run counters, gauges and timings, all keyed by name and tags.

    Usage:
        metrics = MetricsCollector()
        metrics.increment("heegner_points")
        metrics.gauge("class_number", 2, tags={"m": 0})
        with metrics.timer("hecke_ms", tags={"op": "T"}):
            ...
        report["metrics"] = metrics.summary()
    """

    def __init__(self):
        self._counters: dict[str, float] = defaultdict(float)
        self._gauges: dict[str, float] = {}
        self._samples: dict[str, list[float]] = defaultdict(list)
        self._started = time.perf_counter()

    def increment(self, name: str, value: float = 1, *, tags: Optional[dict] = None) -> None:
        self._counters[metric_key(name, tags)] += value

    def gauge(self, name: str, value: float, *, tags: Optional[dict] = None) -> None:
        self._gauges[metric_key(name, tags)] = value

    def observe(self, name: str, value: float, *, tags: Optional[dict] = None) -> None:
        self._samples[metric_key(name, tags)].append(value)

    @contextmanager
    def timer(self, name: str, *, tags: Optional[dict] = None) -> Iterator[None]:
        """Observe the wall time of the block in milliseconds, also on error."""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.observe(name, (time.perf_counter() - start) * 1000, tags=tags)

    def counter(self, name: str, tags: Optional[dict] = None) -> float:
        return self._counters.get(metric_key(name, tags), 0)

    def gauge_value(self, name: str, tags: Optional[dict] = None) -> Optional[float]:
        return self._gauges.get(metric_key(name, tags))

    def stats(self, name: str, tags: Optional[dict] = None) -> dict:
        samples = self._samples.get(metric_key(name, tags), [])
        if not samples:
            return {"count": 0, "total": 0}
        return {
            "count": len(samples),
            "total": sum(samples),
            "min": min(samples),
            "max": max(samples),
            "mean": sum(samples) / len(samples),
        }

    def summary(self) -> dict:
        return {
            "wall_ms": round((time.perf_counter() - self._started) * 1000, 3),
            "counters": dict(sorted(self._counters.items())),
            "gauges": dict(sorted(self._gauges.items())),
            "timings": {key: self._rounded(key) for key in sorted(self._samples)},
        }

    def _rounded(self, key: str) -> dict:
        samples = self._samples[key]
        return {"count": len(samples), "total_ms": round(sum(samples), 3), "max_ms": round(max(samples), 3)}

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)
