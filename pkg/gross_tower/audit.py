"""Precision ledger for certified computations.

Every certificate a command emits (optimality, Hensel lifts, stabilized
idempotents, theta compatibilities) names the p-adic precision it was
obtained at through a PrecisionAudit.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional


@dataclass
class PrecisionRecord:
    """A single certified step."""

    operation: str
    prime: int
    precision: int
    certified: bool = True
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "operation": self.operation,
            "prime": self.prime,
            "precision": self.precision,
            "certified": self.certified,
            "detail": self.detail,
        }


class PrecisionAudit:
    """Collects PrecisionRecords for one command run.

    Usage:
        audit = PrecisionAudit(default_precision=8)
        audit.record("hensel_sqrt", 5, detail={"value": "-11"})
        audit.record("ordinary_projector", 5, 8, certified=True)
        print(audit.summary())
    """

    def __init__(self, default_precision: int = 8):
        self.default_precision = default_precision
        self._records: list[PrecisionRecord] = []

    def record(
        self,
        operation: str,
        prime: int,
        precision: Optional[int] = None,
        *,
        certified: bool = True,
        detail: Optional[dict] = None,
    ) -> PrecisionRecord:
        entry = PrecisionRecord(
            operation=operation,
            prime=prime,
            precision=precision if precision is not None else self.default_precision,
            certified=certified,
            detail=detail or {},
        )
        self._records.append(entry)
        return entry

    @property
    def records(self) -> list[PrecisionRecord]:
        return list(self._records)

    @property
    def all_certified(self) -> bool:
        return all(r.certified for r in self._records)

    @property
    def max_precision(self) -> int:
        return max((r.precision for r in self._records), default=self.default_precision)

    def by_operation(self) -> dict[str, list[PrecisionRecord]]:
        grouped: dict[str, list[PrecisionRecord]] = defaultdict(list)
        for r in self._records:
            grouped[r.operation].append(r)
        return dict(grouped)

    def summary(self) -> dict:
        """Records grouped by operation, in first-seen order."""
        out = {}
        for op, entries in self.by_operation().items():
            out[op] = {
                "count": len(entries),
                "primes": sorted({e.prime for e in entries}),
                "precision": max(e.precision for e in entries),
                "certified": all(e.certified for e in entries),
            }
        return {
            "default_precision": self.default_precision,
            "max_precision": self.max_precision,
            "all_certified": self.all_certified,
            "operations": out,
        }
