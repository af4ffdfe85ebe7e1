"""Tests for the quaternion algebra module."""

from fractions import Fraction

import pytest

from gross_tower.exceptions import InvalidInputError
from gross_tower.orders import maximal_order
from gross_tower.padic import mat_valuation
from gross_tower.quaternion import (
    INFINITY,
    QuaternionAlgebra,
    algebra_for_discriminant,
    bilinear_pairing,
    hilbert_symbol,
    padic_splitting,
)


def test_hilbert_symbols_of_hamilton_quaternions():
    assert hilbert_symbol(-1, -1, 2) == -1
    assert hilbert_symbol(-1, -1, INFINITY) == -1
    assert hilbert_symbol(-1, -1, 3) == 1


def test_hamilton_algebra():
    B = QuaternionAlgebra.from_pair(-1, -1)
    assert B.definite
    assert B.discriminant == 2
    assert B.ramified_places() == [2, INFINITY]
    assert B.product_formula_holds()


def test_multiplication_table():
    B = QuaternionAlgebra.from_pair(-1, -3)
    i, j, k = B.i, B.j, B.k
    assert i * i == B.element(-1)
    assert j * j == B.element(-3)
    assert i * j == k
    assert j * i == -k


def test_norm_trace_inverse():
    B = QuaternionAlgebra.from_pair(-1, -1)
    q = B.element(1, 2, 3, 4)
    assert q.nrd() == 30
    assert q.trd() == 2
    assert q * q.inverse() == B.one
    assert bilinear_pairing(q, q) == q.nrd()


def test_algebra_for_discriminant():
    for N in (2, 3, 11, 30):
        B = algebra_for_discriminant(N)
        assert B.discriminant == N
        assert B.definite


def test_even_parity_rejected():
    with pytest.raises(InvalidInputError, match="even parity"):
        algebra_for_discriminant(15)


def test_padic_splitting_relations():
    B = algebra_for_discriminant(11)
    sp = padic_splitting(B, 5, 6)
    assert sp.verify(B)
    assert sp.p == 5


def test_splitting_refuses_ramified_prime():
    with pytest.raises(InvalidInputError):
        padic_splitting(algebra_for_discriminant(11), 11, 4)


def test_scalar_products():
    B = QuaternionAlgebra.from_pair(-1, -1)
    assert B.i * 2 == B.element(0, 2)
    assert B.i / 2 == B.element(0, Fraction(1, 2))


def test_dyadic_splitting_maps_maximal_order_into_integral_matrices():
    B = algebra_for_discriminant(3)
    O = maximal_order(B)
    sp = padic_splitting(B, 2, 6, O.basis())
    assert sp.p == 2
    assert sp.verify(B)
    assert all(mat_valuation(sp.image(b), 2) >= 0 for b in O.basis())
