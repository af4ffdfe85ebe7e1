"""Definite Shimura sets X_m, their covers X̃_m, divisors and Hecke matrices.

A point of X̃_m is a pair (i, t): a left-ideal class of R_m and a fiber
coordinate t in (Z/p^m)^x taken modulo ±ν(Γ_i). The point (i, t) is
represented by the lattice I_i with p-component diag(t^-1, 1); the fiber
coordinate of a lattice J with p-component g_p is the inverse of the
upper-left entry of g_p·φ_p(b)^-1, where J = I_i·b. With this convention
the diamond operator is (i, t) ↦ (i, d·t) and agrees with T(d, d).

Matrices act on column vectors: entry [target][source].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Callable, Iterable, Optional

from sympy import mod_inverse

from gross_tower.exceptions import InternalInvariantError, InvalidInputError, PrecisionError
from gross_tower.lattice import QuatLattice
from gross_tower.orders import (
    EichlerTower,
    RightIdealClassSet,
    lattice_product,
    local_replace,
    neighbors,
    right_class_set,
)
from gross_tower.padic import IDENTITY, Mat2, mat, mat_inv, mat_mul, mat_valuation, mod_pk
from gross_tower.quaternion import Quaternion

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class TildePoint:
    """A point (class index, fiber coordinate) of X̃_m."""

    cls: int
    fiber: int

    def to_list(self) -> list[int]:
        return [self.cls, self.fiber]


@dataclass
class Divisor:
    """A formal integer combination of points of one level."""

    level: int
    coeffs: dict[TildePoint, int] = field(default_factory=dict)

    def __post_init__(self):
        self.coeffs = {k: v for k, v in self.coeffs.items() if v}

    @classmethod
    def point(cls, level: int, pt: TildePoint, coeff: int = 1) -> "Divisor":
        return cls(level, {pt: coeff})

    def degree(self) -> int:
        return sum(self.coeffs.values())

    def support(self) -> list[TildePoint]:
        return sorted(self.coeffs)

    def _check(self, other: "Divisor") -> None:
        if other.level != self.level:
            raise InvalidInputError(f"divisors of levels {self.level} and {other.level} do not mix")

    def __add__(self, other: "Divisor") -> "Divisor":
        self._check(other)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return Divisor(self.level, out)

    def __neg__(self) -> "Divisor":
        return Divisor(self.level, {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other: "Divisor") -> "Divisor":
        return self + (-other)

    def scale(self, c: int) -> "Divisor":
        return Divisor(self.level, {k: c * v for k, v in self.coeffs.items()})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Divisor):
            return NotImplemented
        return self.level == other.level and self.coeffs == other.coeffs

    def to_vector(self, level: "ShimuraLevel") -> list[int]:
        vec = [0] * len(level.points)
        for k, v in self.coeffs.items():
            vec[level.index(k)] += v
        return vec

    @classmethod
    def from_vector(cls, level: "ShimuraLevel", vec: Iterable[int]) -> "Divisor":
        return cls(level.m, {pt: int(v) for pt, v in zip(level.points, vec) if v})

    def to_dict(self) -> list[list[int]]:
        return [[k.cls, k.fiber, v] for k, v in sorted(self.coeffs.items())]


def degree(D: Divisor) -> int:
    return D.degree()


@dataclass
class HeckeMatrix:
    """An operator on Div(X̃_m) as a dense integer matrix."""

    op: str
    param: int
    m: int
    matrix: list[list[int]]

    @property
    def size(self) -> int:
        return len(self.matrix)

    def column_sums(self) -> list[int]:
        return [sum(row[c] for row in self.matrix) for c in range(len(self.matrix[0]))] if self.matrix else []

    def apply(self, D: Divisor, source: "ShimuraLevel", target: Optional["ShimuraLevel"] = None) -> Divisor:
        target = target or source
        vec = D.to_vector(source)
        out = [sum(row[c] * vec[c] for c in range(len(vec))) for row in self.matrix]
        return Divisor.from_vector(target, out)

    def __matmul__(self, other: "HeckeMatrix") -> list[list[int]]:
        cols = list(zip(*other.matrix))
        return [[sum(a * b for a, b in zip(row, col)) for col in cols] for row in self.matrix]

    def commutes_with(self, other: "HeckeMatrix") -> bool:
        return (self @ other) == (other @ self)

    def to_dict(self) -> dict:
        return {"op": self.op, "param": self.param, "m": self.m, "matrix": self.matrix}


@dataclass
class ShimuraLevel:
    """X̃_m with its class set, fiber groups and point list."""

    m: int
    tower: EichlerTower = field(repr=False)
    classes: RightIdealClassSet = field(repr=False)
    nu_groups: list[frozenset] = field(default_factory=list)
    points: list[TildePoint] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    _index: dict[TildePoint, int] = field(default_factory=dict, repr=False)

    @property
    def p(self) -> int:
        return self.tower.p

    @property
    def modulus(self) -> int:
        return self.p**self.m

    @property
    def h(self) -> int:
        return self.classes.h

    @property
    def tilde_size(self) -> int:
        return len(self.points)

    def nu(self, q: Quaternion) -> int:
        return self.tower.upper_left(q, self.m) if self.m else 0

    def units_mod(self) -> list[int]:
        n = self.modulus
        if n == 1:
            return [0]
        return [t for t in range(1, n) if t % self.p]

    def canonical(self, i: int, t: int) -> TildePoint:
        if self.modulus == 1:
            return TildePoint(i, 0)
        n = self.modulus
        return TildePoint(i, min(t * s % n for s in self.nu_groups[i]))

    def index(self, pt: TildePoint) -> int:
        return self._index[pt]

    def fiber_size(self, i: int) -> int:
        return sum(1 for pt in self.points if pt.cls == i)

    def stabilizer_size(self, pt: TildePoint) -> int:
        """#{γ ∈ Γ_i : ν(γ) ≡ ±1} / 2."""
        n = self.modulus
        units = self.classes.unit_groups[pt.cls]
        if n == 1:
            return len(units) // 2
        return sum(1 for g in units if self.nu(g) in (1 % n, (n - 1) % n)) // 2

    def weights(self) -> list[Fraction]:
        return [Fraction(1, self.stabilizer_size(pt)) for pt in self.points]

    def fiber_of(self, g_p: Mat2, b: Quaternion) -> int:
        """Inverse of the upper-left entry of g_p·φ_p(b)^-1, mod p^m."""
        if self.m == 0:
            return 0
        sp = self.tower.splitting
        u = mat_mul(g_p, mat_inv(sp.image(b)))
        if mat_valuation(u, self.p) < 0 or mod_pk(u[1][0], self.p, self.m):
            raise PrecisionError(
                "p-component is not in the local Eichler unit group",
                details={"prime": self.p, "level": self.m},
            )
        a = mod_pk(u[0][0], self.p, self.m)
        if a % self.p == 0:
            raise PrecisionError("upper-left entry is not a unit", details={"prime": self.p})
        return int(mod_inverse(a, self.modulus))

    def locate(self, J: QuatLattice, g_p: Mat2 = IDENTITY) -> tuple[TildePoint, Quaternion, int]:
        """Point of X̃_m of the lattice J with p-component g_p.

        Returns (point, b, raw fiber) with J = I_i·b.
        """
        i, b = self.classes.classify(J)
        t = self.fiber_of(g_p, b)
        return self.canonical(i, t), b, t

    def representative(self, pt: TildePoint) -> tuple[QuatLattice, Mat2]:
        if self.m == 0:
            return self.classes.reps[pt.cls], IDENTITY
        return self.classes.reps[pt.cls], mat(int(mod_inverse(pt.fiber, self.modulus)), 0, 0, 1)


def build_level(tower: EichlerTower, m: int) -> ShimuraLevel:
    order = tower.order(m)
    classes = right_class_set(order, avoid=(tower.p,))
    level = ShimuraLevel(m=m, tower=tower, classes=classes)
    n = level.modulus
    for units in classes.unit_groups:
        if n == 1:
            level.nu_groups.append(frozenset({0}))
            continue
        values = {level.nu(g) for g in units}
        values |= {(-v) % n for v in values}
        level.nu_groups.append(frozenset(values))
    points = {level.canonical(i, t) for i in range(classes.h) for t in level.units_mod()}
    level.points = sorted(points)
    level._index = {pt: k for k, pt in enumerate(level.points)}
    logger.info("level %d: h = %d, tilde size = %d", m, classes.h, len(level.points))
    return level


class ShimuraTower:
    """Lazily built levels 0..m_max over one Eichler tower.

    Usage:
        shimura = ShimuraTower(tower)
        level = shimura.level(1)
        t3 = shimura.hecke("T", 3, 1)
    """

    def __init__(self, tower: EichlerTower):
        self.tower = tower
        self._levels: dict[int, ShimuraLevel] = {}
        self._operators: dict[tuple[str, int, int], HeckeMatrix] = {}

    def level(self, m: int) -> ShimuraLevel:
        if m not in self._levels:
            self._levels[m] = build_level(self.tower, m)
        return self._levels[m]

    def hecke(self, op: str, param: int, m: int) -> HeckeMatrix:
        key = (op, param, m)
        if key not in self._operators:
            self._operators[key] = hecke(op, param, self.level(m))
        return self._operators[key]

    def cached(self, m: int) -> list[HeckeMatrix]:
        """Operators already built at level m, in construction order."""
        return [T for (op, _, lvl), T in self._operators.items() if lvl == m and op != "alpha"]

    def pushforward_matrix(self, m: int) -> HeckeMatrix:
        key = ("alpha", 0, m)
        if key not in self._operators:
            self._operators[key] = pushforward_matrix(self.level(m), self.level(m - 1))
        return self._operators[key]

    def pushforward(self, D: Divisor) -> Divisor:
        return pushforward(self.level(D.level), self.level(D.level - 1), D, self.pushforward_matrix(D.level))


def _empty(level: ShimuraLevel, rows: Optional[int] = None) -> list[list[int]]:
    return [[0] * level.tilde_size for _ in range(rows if rows is not None else level.tilde_size)]


def _class_transitions(
    level: ShimuraLevel,
    lattices: Callable[[int], list[tuple[QuatLattice, Mat2]]],
    step: int,
) -> list[list[int]]:
    """Generic operator: each class i maps to lattices J with p-corrections x.

    The point (i, t) goes to (i', t·κ^-1) with κ the upper-left entry of
    x·φ_p(b)^-1, J = I_i'·b.
    """
    M = _empty(level)
    n = level.modulus
    sp = level.tower.splitting
    for i in range(level.h):
        moves = []
        for J, x in lattices(i):
            i2, b = level.classes.classify(J)
            if n == 1:
                moves.append((i2, 0))
                continue
            kappa_mat = mat_mul(x, sp.image(b.inverse()))
            kappa = mod_pk(kappa_mat[0][0], level.p, level.m)
            moves.append((i2, int(mod_inverse(kappa, n))))
        if len(moves) != step:
            raise InternalInvariantError(f"operator produced {len(moves)} terms, expected {step}")
        for pt in (pt for pt in level.points if pt.cls == i):
            src = level.index(pt)
            for i2, kappa_inv in moves:
                dst = level.index(level.canonical(i2, pt.fiber * kappa_inv))
                M[dst][src] += 1
    return M


def hecke(op: str, param: int, level: ShimuraLevel) -> HeckeMatrix:
    """T_ℓ ("T"), U_p ("U"), diamond ⟨d⟩ ("diamond") or T(n, n) ("scalar")."""
    tower = level.tower
    p, m = tower.p, level.m
    alg = tower.algebra
    order = level.classes.order.lattice
    if op == "T":
        ell = param
        if tower.N % ell == 0 or (ell == p and m > 0):
            raise InvalidInputError(f"T_{ell} needs ℓ ∤ Np^m (level {m})", details={"ell": ell, "m": m})
        matrix = _class_transitions(
            level,
            lambda i: [(J, IDENTITY) for J in neighbors(alg, order, level.classes.reps[i], ell)],
            ell + 1,
        )
    elif op == "U":
        if m < 1 or param != p:
            raise InvalidInputError("U_p needs level m ≥ 1 and the parameter p")
        sp = tower.splitting

        def translates(i: int) -> list[tuple[QuatLattice, Mat2]]:
            out = []
            for a in range(p):
                pi_a = mat(1, a, 0, p)
                out.append((local_replace(alg, level.classes.reps[i], p, pi_a, sp, m), pi_a))
            return out

        matrix = _class_transitions(level, translates, p)
    elif op == "diamond":
        d = param
        if d % p == 0:
            raise InvalidInputError(f"⟨{d}⟩ needs gcd(d, p) = 1")
        matrix = _empty(level)
        for pt in level.points:
            matrix[level.index(level.canonical(pt.cls, pt.fiber * d))][level.index(pt)] += 1
    elif op == "scalar":
        n = param
        if gcd(n, tower.N * p) != 1:
            raise InvalidInputError(f"T({n},{n}) needs n coprime to Np")
        matrix = _class_transitions(level, lambda i: [(level.classes.reps[i].scale(n), IDENTITY)], 1)
    else:
        raise InvalidInputError(f"unknown operator {op!r}")
    result = HeckeMatrix(op=op, param=param, m=m, matrix=matrix)
    logger.debug("%s_%d at level %d: %d x %d", op, param, m, result.size, result.size)
    return result


def pushforward_matrix(level: ShimuraLevel, lower: ShimuraLevel) -> HeckeMatrix:
    """Matrix of the covering X̃_m → X̃_{m-1} (rows: lower level)."""
    if level.m < 1 or lower.m != level.m - 1:
        raise InvalidInputError("pushforward goes from level m to level m-1")
    alg = level.tower.algebra
    sp = level.tower.splitting
    M = _empty(level, rows=lower.tilde_size)
    n_low = lower.modulus
    for i in range(level.h):
        J = lattice_product(alg, lower.classes.order.lattice, level.classes.reps[i])
        i2, b = lower.classes.classify(J)
        kappa_inv = 0
        if n_low > 1:
            kappa = mod_pk(sp.image(b.inverse())[0][0], level.p, lower.m)
            kappa_inv = int(mod_inverse(kappa, n_low))
        for pt in (pt for pt in level.points if pt.cls == i):
            dst = lower.index(lower.canonical(i2, pt.fiber * kappa_inv))
            M[dst][level.index(pt)] += 1
    return HeckeMatrix(op="alpha", param=0, m=level.m, matrix=M)


def pushforward(level: ShimuraLevel, lower: ShimuraLevel, D: Divisor, matrix: Optional[HeckeMatrix] = None) -> Divisor:
    matrix = matrix or pushforward_matrix(level, lower)
    return matrix.apply(D, level, lower)


def weighted_pairing(level: ShimuraLevel, D1: Divisor, D2: Divisor) -> Fraction:
    """⟨D1, D2⟩ = Σ #stabilizer·D1(x)·D2(x), i.e. xᵀ·W⁻¹·y.

    Hecke matrices act on columns and satisfy T·W = W·Tᵀ, so W⁻¹·T is
    symmetric and every T is self-adjoint for this pairing.
    """
    w = level.weights()
    v1, v2 = D1.to_vector(level), D2.to_vector(level)
    return sum((a * b / wi for wi, a, b in zip(w, v1, v2)), Fraction(0))


def is_self_adjoint(level: ShimuraLevel, T: HeckeMatrix) -> bool:
    """T·W = W·Tᵀ with W the diagonal of weights 1/#stabilizer.

    For a [target][source] matrix this is the edge count T[r][c]/#Γ_c = T[c][r]/#Γ_r.
    """
    w = level.weights()
    n = len(w)
    return all(T.matrix[r][c] * w[c] == w[r] * T.matrix[c][r] for r in range(n) for c in range(n))
