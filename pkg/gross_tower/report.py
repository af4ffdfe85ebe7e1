"""Schema-versioned JSON reports with a canonical, deterministic encoding."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional

from gross_tower.config import SCHEMA_VERSION


def canonical(obj: Any) -> Any:
    """Plain JSON data: Fraction → "num/den", tuples → lists, objects via to_dict()."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (str, float)):
        return obj
    if isinstance(obj, int):
        return int(obj)
    if isinstance(obj, Fraction):
        return obj.numerator if obj.denominator == 1 else f"{obj.numerator}/{obj.denominator}"
    if hasattr(obj, "to_dict"):
        return canonical(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [canonical(v) for v in items]
    if dataclasses.is_dataclass(obj):
        return canonical(dataclasses.asdict(obj))
    return str(obj)


@dataclass
class JsonReport:
    """One command's output; ``timing`` and ``metrics`` are the only run-dependent fields."""

    command: str
    instance: dict
    results: Any = None
    precision: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    exit_code: int = 0
    error: Optional[dict] = None
    schema: str = SCHEMA_VERSION

    def to_dict(self, *, include_timing: bool = True) -> dict:
        out = {
            "schema": self.schema,
            "command": self.command,
            "instance": self.instance,
            "results": self.results,
            "precision": self.precision,
            "exit_code": self.exit_code,
        }
        if self.error is not None:
            out["error"] = self.error
        if include_timing:
            out["timing"] = self.timing
            out["metrics"] = self.metrics
        return canonical(out)

    def to_json(self, *, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing=include_timing), indent=2, sort_keys=True, ensure_ascii=False)

    def write(self, path: str) -> None:
        """Atomic write: temporary file, then os.replace."""
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            f.write(self.to_json())
            f.write("\n")
        os.replace(tmp, path)

    @staticmethod
    def load(path: str) -> dict:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
