"""Instance configuration and environment-driven defaults."""

from __future__ import annotations

import os
from math import gcd
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional

from sympy import factorint, isprime

from gross_tower.exceptions import InvalidInputError


# ─── Configuration ────────────────────────────────────────────────────────────

DEFAULT_PRECISION = int(os.environ.get("GROSS_TOWER_PRECISION", "8"))
GUARD_DIGITS = int(os.environ.get("GROSS_TOWER_GUARD_DIGITS", "12"))

SCHEMA_VERSION = "gross-tower/1"

DESK_INSTANCE = {"N_minus": 2, "N_plus": 1, "p": 5, "D_K": -11, "c": 1, "ell": 7}
THETA_INSTANCE = {"N_minus": 11, "N_plus": 1, "p": 5, "D_K": -3, "c": 1}


def working_precision(precision: int) -> int:
    """Number of p-adic digits carried internally for a requested precision."""
    return precision + GUARD_DIGITS


def is_squarefree(n: int) -> bool:
    return n >= 1 and all(e == 1 for e in factorint(n).values())


def is_fundamental_discriminant(d: int) -> bool:
    if d >= 0:
        return False
    if d % 4 == 1:
        return is_squarefree(-d)
    if d % 4 == 0:
        m = d // 4
        return m % 4 in (2, 3) and is_squarefree(-m)
    return False


# ─── Instance ────────────────────────────────────────────────────────────────


@dataclass
class InstanceConfig:
    """The global parameter tuple shared by every command."""

    N_minus: int = 2
    N_plus: int = 1
    p: int = 5
    m_max: int = 1
    D_K: Optional[int] = None
    c: int = 1
    precision: int = field(default_factory=lambda: DEFAULT_PRECISION)
    output: Optional[str] = None
    ell: Optional[int] = None
    n_max: int = 1
    eigensystem: Dict[int, int] = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.N_minus * self.N_plus

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["eigensystem"] = {str(k): v for k, v in sorted(self.eigensystem.items())}
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "InstanceConfig":
        kwargs = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        if "eigensystem" in kwargs:
            kwargs["eigensystem"] = {int(k): int(v) for k, v in kwargs["eigensystem"].items()}
        return cls(**kwargs)

    def validate(self, *, require_field: bool = False) -> "InstanceConfig":
        """Re-check the standing hypotheses; raises InvalidInputError."""
        if not is_squarefree(self.N_minus):
            raise InvalidInputError(f"N_minus={self.N_minus} is not squarefree")
        if len(factorint(self.N_minus)) % 2 == 0:
            raise InvalidInputError(
                f"N_minus={self.N_minus} has an even number of prime factors (even parity)",
                details={"N_minus": self.N_minus},
            )
        if self.N_plus < 1:
            raise InvalidInputError("N_plus must be a positive integer")
        if gcd(self.N_plus, self.N_minus) != 1:
            raise InvalidInputError("N_plus and N_minus must be coprime")
        if not isprime(self.p) or (6 * self.N) % self.p == 0:
            raise InvalidInputError(f"p={self.p} must be a prime not dividing 6N")
        if self.m_max < 0:
            raise InvalidInputError("m_max must be non-negative")
        if self.precision < 1:
            raise InvalidInputError("precision must be at least 1")
        if self.c < 1:
            raise InvalidInputError("conductor c must be positive")
        if self.D_K is None:
            if require_field:
                raise InvalidInputError("a field discriminant --dk is required")
            return self
        if not is_fundamental_discriminant(self.D_K):
            raise InvalidInputError(f"D_K={self.D_K} is not a negative fundamental discriminant")
        if gcd(self.D_K, self.N * self.p) != 1:
            offending = sorted(q for q in factorint(self.N * self.p) if self.D_K % q == 0)
            raise InvalidInputError(
                f"D_K={self.D_K} is not coprime to Np (shares {offending})",
                details={"primes": offending},
            )
        if gcd(self.c, self.N * self.D_K) != 1:
            raise InvalidInputError("conductor c must be coprime to N and D_K")
        return self
