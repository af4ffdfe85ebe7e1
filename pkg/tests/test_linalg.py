"""Tests for the exact linear algebra module."""

from fractions import Fraction

import pytest

from gross_tower.exceptions import InvalidInputError
from gross_tower.linalg import (
    det,
    hnf,
    inverse,
    left_nullspace,
    mat_mul,
    mat_pow_mod,
    nullspace,
    rank_mod_p,
    rref,
    solve,
    vec_mat,
    vec_mat_mod,
)


def test_det_and_inverse():
    m = [[2, 1], [7, 4]]
    assert det(m) == 1
    assert mat_mul(m, inverse(m)) == [[1, 0], [0, 1]]


def test_solve():
    assert solve([[1, 1], [1, -1]], [3, 1]) == [2, 1]


def test_solve_singular():
    with pytest.raises(InvalidInputError):
        solve([[1, 2], [2, 4]], [1, 2])


def test_rref_pivots():
    _, pivots = rref([[1, 2, 3], [2, 4, 6], [0, 0, 1]])
    assert pivots == [0, 2]


def test_nullspaces():
    m = [[1, 1], [1, 1]]
    (v,) = nullspace(m)
    assert [sum(a * b for a, b in zip(row, v)) for row in m] == [0, 0]
    (w,) = left_nullspace([[1, 2], [2, 4]])
    assert vec_mat(w, [[1, 2], [2, 4]]) == [0, 0]


def test_hnf_is_canonical():
    assert hnf([[2, 0], [0, 3]]) == hnf([[2, 3], [0, 3]]) == [[2, 0], [0, 3]]
    assert hnf([[4, 6], [6, 9]]) == [[2, 3]]
    assert all(type(v) is int for row in hnf([[4, 6], [6, 9], [1, 1]]) for v in row)


def test_modular_helpers():
    assert mat_pow_mod([[1, 1], [0, 1]], 10, 7) == [[1, 3], [0, 1]]
    assert vec_mat_mod([1, 2], [[3, 4], [5, 6]], 5) == [3, 1]


def test_rank_mod_p():
    assert rank_mod_p([[1, 2], [2, 4]], 5) == 1
    assert rank_mod_p([[5, 0], [0, 1]], 5) == 1
    assert rank_mod_p([[1, 0], [0, 1]], 5) == 2
    assert rank_mod_p([[Fraction(0)]], 3) == 0
