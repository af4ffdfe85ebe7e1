"""Tests for the p-adic utilities module."""

from fractions import Fraction

import pytest

from gross_tower.exceptions import InvalidInputError, PrecisionError
from gross_tower.padic import (
    IDENTITY,
    INFINITE_VALUATION,
    dyadic_sqrt,
    hensel_sqrt,
    is_unit_square,
    mat,
    mat_det,
    mat_inv,
    mat_mod,
    mat_mul,
    mat_valuation,
    mod_pk,
    one_unit_sqrt,
    padic_sqrt,
    teichmuller,
    unit_part,
    valuation,
    wild_part,
)


def test_valuation_of_rationals():
    assert valuation(Fraction(50, 3), 5) == 2
    assert valuation(Fraction(3, 25), 5) == -2
    assert valuation(7, 5) == 0
    assert valuation(0, 5) == INFINITE_VALUATION


def test_unit_part():
    assert unit_part(Fraction(50, 3), 5) == Fraction(2, 3)


def test_mod_pk_inverts_denominators():
    assert mod_pk(Fraction(1, 2), 5, 2) == 13
    assert mod_pk(-1, 5, 3) == 124


def test_mod_pk_rejects_non_integral():
    with pytest.raises(PrecisionError):
        mod_pk(Fraction(1, 5), 5, 2)


def test_hensel_sqrt_lifts_to_full_precision():
    r = hensel_sqrt(-1, 5, 4)
    assert (r * r + 1) % 5**4 == 0
    assert r % 5 == 2


def test_hensel_sqrt_fixed_branch():
    r = hensel_sqrt(-1, 5, 3, root_mod_p=3)
    assert r % 5 == 3
    assert (r * r + 1) % 125 == 0


def test_hensel_sqrt_non_square():
    with pytest.raises(InvalidInputError):
        hensel_sqrt(2, 5, 3)


def test_padic_sqrt():
    assert padic_sqrt(100, 5, 3) == 10
    assert padic_sqrt(5, 5, 3) is None
    assert padic_sqrt(0, 5, 3) == 0


def test_teichmuller_is_root_of_unity():
    t = teichmuller(2, 5, 3)
    assert t % 5 == 2
    assert pow(t, 4, 125) == 1


def test_wild_part_is_principal_unit():
    w = wild_part(7, 5, 3)
    assert w % 5 == 1
    assert w * teichmuller(7, 5, 3) % 125 == 7


def test_one_unit_sqrt():
    r = one_unit_sqrt(11, 5, 3)
    assert r % 5 == 1
    assert (r * r - 11) % 125 == 0


def test_matrix_helpers():
    x = mat(1, 2, 3, 4)
    assert mat_det(x) == -2
    assert mat_mul(x, mat_inv(x)) == IDENTITY
    assert mat_mod(mat(Fraction(1, 2), 5, -1, 0), 5, 1) == ((3, 0), (4, 0))
    assert mat_valuation(mat(5, 25, Fraction(1, 5), 0), 5) == -1


def test_results_are_plain_ints():
    r = hensel_sqrt(-1, 5, 4)
    w = wild_part(7, 5, 3)
    assert type(r) is int and type(w) is int
    assert Fraction(1, 3) * r == Fraction(r, 3)
    assert Fraction(1, 3) * w == Fraction(w, 3)


def test_dyadic_square_roots():
    assert is_unit_square(17, 2)
    assert not is_unit_square(5, 2)
    r = hensel_sqrt(17, 2, 6)
    assert r == dyadic_sqrt(17, 6)
    assert r % 4 == 1
    assert (r * r - 17) % 2**7 == 0
    assert padic_sqrt(68, 2, 5) == 2 * dyadic_sqrt(17, 5)
    with pytest.raises(InvalidInputError):
        dyadic_sqrt(3, 4)
