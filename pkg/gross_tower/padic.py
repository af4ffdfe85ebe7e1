"""p-adic helpers on exact rationals.

A p-adic number is carried as a ``Fraction`` that agrees with the true value
to the working precision chosen by the caller. Reductions modulo p^k only
make sense for p-integral inputs and refuse anything else.
"""

from __future__ import annotations

import logging
from fractions import Fraction
from typing import Sequence, Tuple, Union

from sympy import legendre_symbol, mod_inverse, sqrt_mod

from gross_tower.exceptions import InvalidInputError, PrecisionError

logger = logging.getLogger(__name__)

Rational = Union[int, Fraction]
Mat2 = Tuple[Tuple[Fraction, Fraction], Tuple[Fraction, Fraction]]

INFINITE_VALUATION = 10**9


def valuation(x: Rational, p: int) -> int:
    """p-adic valuation of a rational; zero has valuation INFINITE_VALUATION."""
    x = Fraction(x)
    if x == 0:
        return INFINITE_VALUATION
    v = 0
    num, den = x.numerator, x.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


def unit_part(x: Rational, p: int) -> Fraction:
    x = Fraction(x)
    return x / Fraction(p) ** valuation(x, p)


def mod_pk(x: Rational, p: int, k: int) -> int:
    """Reduce a p-integral rational to an integer in [0, p^k)."""
    x = Fraction(x)
    modulus = p**k
    if x.denominator % p == 0:
        raise PrecisionError(
            f"{x} is not {p}-integral", details={"prime": p, "value": str(x)}
        )
    if modulus == 1:
        return 0
    return x.numerator * int(mod_inverse(x.denominator, modulus)) % modulus


def is_unit_square(u: Rational, p: int) -> bool:
    """Whether a p-adic unit is a square; at 2 that means u ≡ 1 mod 8."""
    if p == 2:
        return mod_pk(u, 2, 3) == 1
    return legendre_symbol(mod_pk(u, p, 1), p) == 1


def dyadic_sqrt(u: Rational, k: int) -> int:
    """The square root ≡ 1 mod 4 of a 2-adic unit u ≡ 1 mod 8, modulo 2^k.

    Roots mod 2^j are only defined up to ±r + 2^(j-1), so the lift runs one
    digit past k.
    """
    if mod_pk(u, 2, 3) != 1:
        raise InvalidInputError(f"{u} is not a 2-adic square unit")
    target = mod_pk(u, 2, k + 2)
    root = 1
    for j in range(3, k + 2):
        if (root * root - target) % 2 ** (j + 1):
            root += 2 ** (j - 1)
    if root % 4 != 1:
        root = -root
    return root % 2**k


def hensel_sqrt(u: Rational, p: int, k: int, *, root_mod_p: int | None = None) -> int:
    """Square root of a p-adic unit modulo p^k.

    The root mod p comes from sympy; Newton steps then double the precision.
    Passing ``root_mod_p`` fixes the branch. At p = 2 the lift is bitwise.
    """
    if p == 2:
        return dyadic_sqrt(u, k)
    target = mod_pk(u, p, 1)
    if target == 0:
        raise InvalidInputError(f"{u} is not a {p}-adic unit")
    if root_mod_p is None:
        root = sqrt_mod(target, p)
        if root is None:
            raise InvalidInputError(f"{u} is not a square modulo {p}")
        root = min(int(root), p - int(root))
    else:
        root = root_mod_p % p
        if (root * root - target) % p:
            raise InvalidInputError(f"{root_mod_p} is not a square root of {u} mod {p}")
    precision = 1
    while precision < k:
        precision = min(2 * precision, k)
        modulus = p**precision
        uu = mod_pk(u, p, precision)
        root = (root - (root * root - uu) * int(mod_inverse(2 * root, modulus))) % modulus
    return root % p**k


def padic_sqrt(x: Rational, p: int, k: int) -> Fraction | None:
    """A square root of x in Q_p accurate to relative precision p^k, or None."""
    x = Fraction(x)
    if x == 0:
        return Fraction(0)
    v = valuation(x, p)
    if v % 2:
        return None
    u = unit_part(x, p)
    if not is_unit_square(u, p):
        return None
    return Fraction(p) ** (v // 2) * hensel_sqrt(u, p, k)


def teichmuller(a: Rational, p: int, k: int) -> int:
    """Teichmuller representative of a unit modulo p^k."""
    modulus = p**k
    return pow(mod_pk(a, p, k), p ** (k - 1), modulus) if k > 0 else 0


def one_unit_sqrt(u: Rational, p: int, k: int) -> int:
    """The square root congruent to 1 mod p of a unit u ≡ 1 mod p."""
    if mod_pk(u, p, 1) != 1:
        raise InvalidInputError(f"{u} is not a principal unit at {p}")
    return hensel_sqrt(u, p, k, root_mod_p=1)


def wild_part(a: Rational, p: int, k: int) -> int:
    """The principal-unit factor <a> = a / teichmuller(a) modulo p^k."""
    modulus = p**k
    return mod_pk(a, p, k) * int(mod_inverse(teichmuller(a, p, k), modulus)) % modulus


# ─── 2x2 matrices ─────────────────────────────────────────────────────────────


IDENTITY: Mat2 = ((Fraction(1), Fraction(0)), (Fraction(0), Fraction(1)))


def mat(a: Rational, b: Rational, c: Rational, d: Rational) -> Mat2:
    return ((Fraction(a), Fraction(b)), (Fraction(c), Fraction(d)))


def mat_mul(x: Mat2, y: Mat2) -> Mat2:
    return (
        (x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]),
        (x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]),
    )


def mat_prod(*ms: Mat2) -> Mat2:
    out = IDENTITY
    for m in ms:
        out = mat_mul(out, m)
    return out


def mat_add(x: Mat2, y: Mat2) -> Mat2:
    return tuple(tuple(x[r][c] + y[r][c] for c in range(2)) for r in range(2))  # type: ignore[return-value]


def mat_scale(x: Mat2, s: Rational) -> Mat2:
    s = Fraction(s)
    return tuple(tuple(s * x[r][c] for c in range(2)) for r in range(2))  # type: ignore[return-value]


def mat_det(x: Mat2) -> Fraction:
    return x[0][0] * x[1][1] - x[0][1] * x[1][0]


def mat_trace(x: Mat2) -> Fraction:
    return x[0][0] + x[1][1]


def mat_inv(x: Mat2) -> Mat2:
    det = mat_det(x)
    if det == 0:
        raise InvalidInputError("singular 2x2 matrix")
    return mat(x[1][1] / det, -x[0][1] / det, -x[1][0] / det, x[0][0] / det)


def mat_conj(g: Mat2, x: Mat2) -> Mat2:
    """g x g^-1."""
    return mat_prod(g, x, mat_inv(g))


def mat_valuation(x: Mat2, p: int) -> int:
    return min(valuation(e, p) for row in x for e in row)


def mat_is_integral(x: Mat2, p: int) -> bool:
    return mat_valuation(x, p) >= 0


def mat_mod(x: Mat2, p: int, k: int) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    return tuple(tuple(mod_pk(e, p, k) for e in row) for row in x)  # type: ignore[return-value]


def mat_flatten(x: Mat2) -> Sequence[Fraction]:
    return (x[0][0], x[0][1], x[1][0], x[1][1])
