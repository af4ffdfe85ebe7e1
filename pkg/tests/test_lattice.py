"""Tests for the lattice module."""

from fractions import Fraction

import pytest

from gross_tower.exceptions import InvalidInputError
from gross_tower.lattice import QuatLattice, integral_model, ldl, lll_gram, short_vectors
from gross_tower.linalg import det, mat_mul, transpose


def test_hnf_basis_and_membership():
    L = QuatLattice.from_generators([[2, 0], [0, 3], [2, 3]])
    assert L.covolume == 6
    assert (2, 3) in L
    assert (1, 0) not in L
    assert L == QuatLattice.from_generators([[2, 3], [0, 3]])


def test_sum_intersection_dual():
    A = QuatLattice.from_generators([[2, 0], [0, 2]])
    B = QuatLattice.from_generators([[3, 0], [0, 3]])
    assert (A + B).covolume == 1
    assert A.intersection(B).covolume == 36
    assert A.dual().covolume == Fraction(1, 4)
    assert A.index_in(A + B) == 4


def test_scale_and_containment():
    Z2 = QuatLattice.from_generators([[1, 0], [0, 1]])
    assert Z2.contains_lattice(Z2.scale(5))
    assert not Z2.scale(5).contains_lattice(Z2)


def test_congruence_kernel():
    Z2 = QuatLattice.from_generators([[1, 0], [0, 1]])
    K = Z2.congruence_kernel([[1], [1]], 3)
    assert K.covolume == 3
    assert (1, 2) in K
    assert (1, 0) not in K


def test_short_vectors_of_identity_form():
    found = short_vectors([[1, 0], [0, 1]], 1)
    assert len(found) == 4
    assert all(value == 1 for _, value in found)


def test_short_vectors_after_reduction():
    gram = [[1, 10], [10, 101]]
    reduced, T = lll_gram(gram)
    assert len(T) == 2
    vectors = {x for x, value in short_vectors(gram, 1)}
    assert vectors == {(1, 0), (-1, 0), (-10, 1), (10, -1)}


def test_integral_model_reproduces_the_form():
    gram = [[2, 1], [1, Fraction(5, 2)]]
    B, s = integral_model(gram)
    assert all(type(v) is int for row in B for v in row)
    assert mat_mul(B, transpose(B)) == [[s * s * Fraction(g) for g in row] for row in gram]


def test_ldl_rejects_indefinite_forms():
    with pytest.raises(InvalidInputError):
        ldl([[1, 2], [2, 1]])


def test_lll_transform_is_unimodular_and_reduces():
    gram = [[1, 10], [10, 101]]
    reduced, T = lll_gram(gram)
    assert abs(det(T)) == 1
    assert reduced == mat_mul(mat_mul(T, gram), transpose(T))
    assert reduced == [[1, 0], [0, 1]]
