"""Tests for the orders and class sets module."""

import unittest
from fractions import Fraction
from functools import lru_cache

import pytest

from gross_tower.exceptions import InvalidInputError
from gross_tower.mass import eichler_mass
from gross_tower.orders import (
    eichler_order_tower,
    is_order,
    maximal_order,
    neighbors,
    reduced_norm,
    right_class_set,
    right_order,
)
from gross_tower.quaternion import algebra_for_discriminant


@lru_cache(maxsize=None)
def desk_tower():
    return eichler_order_tower(algebra_for_discriminant(2), 1, 5, 2, 8)


def test_maximal_order_has_the_right_discriminant():
    for N in (2, 3, 7, 11, 13):
        O = maximal_order(algebra_for_discriminant(N))
        assert O.check_axioms()
        assert O.discriminant == N


def test_tower_indices():
    tower = desk_tower()
    assert tower.order(1).index_in(tower.order(0)) == 5
    assert tower.order(2).index_in(tower.order(1)) == 5
    for m in range(3):
        assert tower.check_local_shape(m)


def test_tower_with_even_tame_level():
    tower = eichler_order_tower(algebra_for_discriminant(3), 2, 5, 1)
    assert tower.order(0).discriminant == 6
    assert tower.order(0).index_in(tower.maximal) == 3
    assert tower.order(1).index_in(tower.order(0)) == 5
    assert tower.check_local_shape(1)
    classes = right_class_set(tower.order(0), avoid=(5,))
    assert classes.mass == eichler_mass(3, 2)


def test_tower_with_odd_tame_level():
    tower = eichler_order_tower(algebra_for_discriminant(2), 3, 5, 1)
    assert tower.order(0).discriminant == 6
    assert tower.order(0).index_in(tower.maximal) == 4
    for m, level in ((0, 3), (1, 15)):
        classes = right_class_set(tower.order(m), avoid=(5,))
        assert classes.mass == eichler_mass(2, level)


def test_tower_rejects_bad_prime():
    with pytest.raises(InvalidInputError):
        eichler_order_tower(algebra_for_discriminant(11), 1, 11, 1)
    with pytest.raises(InvalidInputError):
        eichler_order_tower(algebra_for_discriminant(2), 1, 4, 1)


def test_neighbors_count_and_norm():
    tower = desk_tower()
    alg = tower.algebra
    O = tower.order(0).lattice
    found = neighbors(alg, O, O, 3)
    assert len(found) == 4
    assert all(reduced_norm(alg, J) == 3 for J in found)
    assert all(is_order(alg, right_order(alg, J)) for J in found)


def test_orders_reject_level_outside_tower():
    with pytest.raises(InvalidInputError):
        desk_tower().order(5)


class TestClassSets(unittest.TestCase):
    def setUp(self):
        self.tower = desk_tower()

    def test_disc_2_level_1(self):
        classes = right_class_set(self.tower.order(0), avoid=(5,))
        assert classes.h == 1
        assert classes.mass == Fraction(1, 12)

    def test_disc_2_level_5_matches_mass(self):
        classes = right_class_set(self.tower.order(1), avoid=(5,))
        assert classes.mass == eichler_mass(2, 5)

    def test_disc_11(self):
        tower = eichler_order_tower(algebra_for_discriminant(11), 1, 5, 0)
        classes = right_class_set(tower.order(0), avoid=(5,))
        assert classes.h == 2
        assert classes.mass == Fraction(5, 6)

    def test_classify_returns_representative(self):
        classes = right_class_set(self.tower.order(0), avoid=(5,))
        alg = self.tower.algebra
        J = neighbors(alg, self.tower.order(0).lattice, classes.reps[0], 3)[0]
        i, b = classes.classify(J)
        assert i == 0
        assert reduced_norm(alg, J) == reduced_norm(alg, classes.reps[0]) * b.nrd()
