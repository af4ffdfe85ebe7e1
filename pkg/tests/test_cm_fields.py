"""Tests for the CM fields module."""

import unittest
from functools import lru_cache
from fractions import Fraction

import pytest

from gross_tower.cm_fields import (
    BinaryQF,
    GaloisElement,
    ImagQuadField,
    anticyclotomic_layer,
    anticyclotomic_tower,
    check_heegner_hypothesis,
    class_number_formula,
    d_of_n,
    principal_form,
    reduced_forms,
    ring_class_group,
)
from gross_tower.exceptions import InvalidInputError
from gross_tower.lattice import QuatLattice


def test_field_from_discriminant():
    K = ImagQuadField.from_discriminant(-11)
    assert K.D == 11
    assert ImagQuadField.from_discriminant(-20).D == 5
    assert ImagQuadField.from_D(5).D_K == -20


def test_non_fundamental_discriminant_rejected():
    with pytest.raises(InvalidInputError):
        ImagQuadField.from_discriminant(-12)


def test_unit_counts():
    assert ImagQuadField.from_discriminant(-3).unit_count() == 6
    assert ImagQuadField.from_discriminant(-4).unit_count() == 4
    assert ImagQuadField.from_discriminant(-11).unit_count() == 2
    assert ImagQuadField.from_discriminant(-3).unit_count(5) == 2


def test_prime_behavior():
    K = ImagQuadField.from_discriminant(-11)
    assert K.prime_behavior(2) == "inert"
    assert K.prime_behavior(5) == "split"
    assert K.prime_behavior(11) == "ramified"
    for q in (2, 3, 5, 7, 13):
        assert K.prime_behavior(q) == K.prime_behavior_by_search(q)


def test_heegner_hypothesis():
    K = ImagQuadField.from_discriminant(-11)
    holds, report = check_heegner_hypothesis(1, 2, K, 5)
    assert holds
    assert report[2] == {"divides": "N_minus", "behavior": "inert", "ok": True}
    holds, report = check_heegner_hypothesis(1, 3, K, 5)
    assert not holds
    assert report[3]["behavior"] == "split"


def test_heegner_hypothesis_needs_coprime_discriminant():
    with pytest.raises(InvalidInputError):
        check_heegner_hypothesis(1, 2, ImagQuadField.from_discriminant(-20), 5)


def test_reduced_forms():
    assert reduced_forms(-20) == [BinaryQF(1, 0, 5), BinaryQF(2, 2, 3)]
    assert reduced_forms(-3) == [BinaryQF(1, 1, 1)]
    assert principal_form(-20) == BinaryQF(1, 0, 5)


def test_composition_in_class_group_of_minus_20():
    f = BinaryQF(2, 2, 3)
    assert f * f == principal_form(-20)
    assert f.inverse() == f
    assert f ** 3 == f
    assert BinaryQF(3, 8, 7).reduced() == BinaryQF(2, 2, 3)


def test_class_numbers():
    K3 = ImagQuadField.from_discriminant(-3)
    assert class_number_formula(K3, 5) == 2
    assert ring_class_group(K3, 25).order == 10
    assert ring_class_group(ImagQuadField.from_discriminant(-11), 5).order == 4


def test_element_order_in_ring_class_group():
    group = ring_class_group(ImagQuadField.from_discriminant(-3), 25)
    assert all(group.order % group.element_order(f) == 0 for f in group.forms)
    assert group.element_order(group.identity) == 1


def test_d_of_n_for_inert_prime():
    K = ImagQuadField.from_discriminant(-3)
    assert [d_of_n(K, 5, n) for n in (1, 2)] == [2, 3]


def test_galois_elements_multiply_componentwise():
    K = ImagQuadField.from_discriminant(-3)
    x = GaloisElement(local=((5, (Fraction(1), Fraction(1))),), label="x")
    y = GaloisElement(local=((5, (Fraction(2), Fraction(0))),), label="y")
    xy = x.times(K, y)
    assert xy.component(5) == (Fraction(2), Fraction(2))
    assert xy.label == "x*y"
    assert xy.component(7) is None


class TestAnticyclotomicTower(unittest.TestCase):
    def setUp(self):
        self.K = ImagQuadField.from_discriminant(-3)
        self.layers = anticyclotomic_tower(self.K, 5, 2)

    def test_shapes(self):
        assert [layer.n for layer in self.layers] == [0, 1, 2]
        assert [layer.order for layer in self.layers] == [1, 5, 25]
        assert [layer.d for layer in self.layers] == [1, 2, 3]

    def test_identity_projects_to_zero(self):
        one = GaloisElement(local=((5, (Fraction(1), Fraction(0))),))
        assert all(layer.project(one) == 0 for layer in self.layers)

    def test_projections_are_compatible(self):
        x = GaloisElement(local=((5, (Fraction(1), Fraction(1))),))
        top, middle = self.layers[2], self.layers[1]
        assert top.project(x) % 5 == middle.project(x)


@lru_cache(maxsize=None)
def class_number_three_tower():
    return anticyclotomic_tower(ImagQuadField.from_discriminant(-23), 5, 2)


def test_layer_over_class_number_three_field():
    layer = anticyclotomic_layer(ImagQuadField.from_discriminant(-23), 5, 1)
    assert layer.order == 5
    assert layer.d == 2
    assert layer.class_group.order == 90
    assert layer.prime_to_p == 18
    assert not layer.experimental


class TestClassGroupLayers(unittest.TestCase):
    def setUp(self):
        self.K = ImagQuadField.from_discriminant(-23)
        self.layers = class_number_three_tower()

    def test_shapes(self):
        assert [layer.order for layer in self.layers] == [1, 5, 25]
        assert [layer.d for layer in self.layers] == [1, 2, 3]
        assert self.layers[2].class_group.order == 450

    def test_identity_projects_to_zero(self):
        one = GaloisElement(local=((5, (Fraction(1), Fraction(0))),))
        assert all(layer.project(one) == 0 for layer in self.layers)
        assert all(layer.project(GaloisElement()) == 0 for layer in self.layers)

    def test_generator_has_full_order(self):
        top = self.layers[2]
        assert top.project(top.generator_element()) % 5 != 0

    def test_projection_is_additive(self):
        top = self.layers[2]
        x = GaloisElement(local=((5, (Fraction(1), Fraction(1))),))
        y = GaloisElement(local=((5, (Fraction(2), Fraction(1))),))
        assert top.project(x.times(self.K, y)) == (top.project(x) + top.project(y)) % 25

    def test_projections_are_compatible(self):
        x = GaloisElement(local=((5, (Fraction(1), Fraction(2))),))
        top, middle = self.layers[2], self.layers[1]
        assert top.project(x) % 5 == middle.project(x)

    def test_principal_ideles_are_trivial(self):
        lam = (Fraction(2), Fraction(1))
        ideal = QuatLattice.from_generators([self.K.mul(lam, w) for w in self.K.order_lattice(1).basis])
        idele = GaloisElement(ideal=ideal, local=((5, lam),))
        assert all(layer.project(idele) == 0 for layer in self.layers)
