"""Tests for the theta elements module."""

import unittest
from functools import lru_cache

import pytest

from gross_tower.cm_fields import ImagQuadField, anticyclotomic_tower
from gross_tower.exceptions import InvalidInputError, NonexistenceError, PreconditionError
from gross_tower.heegner import build_family
from gross_tower.orders import eichler_order_tower
from gross_tower.quaternion import algebra_for_discriminant
from gross_tower.shimura import HeckeMatrix
from gross_tower.theta import (
    CyclotomicInteger,
    ThetaElement,
    chi_special_value,
    heegner_orbit,
    hensel_root,
    j_element,
    lp_truncation,
    orbit_chi_value,
    ordinary_eigen,
    ordinary_projector,
    theta_audits,
    theta_element,
)

CURVE_11A = {2: -2, 3: -1, 5: 1}


def delta(k: int, n: int = 1, p: int = 5, modulus: int = 125) -> ThetaElement:
    coeffs = [0] * p**n
    coeffs[k] = 1
    return ThetaElement(n, p, modulus, tuple(coeffs))


def test_group_ring_arithmetic():
    assert delta(1) * delta(4) == delta(0)
    assert delta(1).star() == delta(4)
    assert delta(1).translate(2) == delta(3)
    assert (delta(1) + delta(2)).augmentation() == 2
    assert ThetaElement.zero(1, 5, 125) + delta(3) == delta(3)


def test_star_is_an_anti_involution():
    a = ThetaElement(1, 5, 125, (1, 2, 0, 7, 3))
    b = ThetaElement(1, 5, 125, (0, 4, 1, 1, 9))
    assert (a * b).star() == a.star() * b.star()
    assert a.star().star() == a
    assert (a * b).augmentation() == a.augmentation() * b.augmentation() % 125


def test_truncation_is_star_symmetric():
    theta = ThetaElement(2, 5, 625, tuple(range(25)))
    L = lp_truncation(theta)
    assert L.star() == L
    assert L.project() == lp_truncation(theta.project())


def test_projection():
    theta = ThetaElement(2, 5, 125, tuple(range(25)))
    projected = theta.project()
    assert projected.n == 1
    assert projected.coefficients == (50, 55, 60, 65, 70)
    assert theta.project(0).coefficients == (sum(range(25)) % 125,)
    with pytest.raises(InvalidInputError):
        theta.project(3)


def test_rings_do_not_mix():
    with pytest.raises(InvalidInputError):
        delta(1) + delta(1, modulus=25)


def test_cyclotomic_roots():
    one = CyclotomicInteger.root_power(5, 1, 125, 0)
    assert CyclotomicInteger.root_power(5, 1, 125, 5) == one
    assert CyclotomicInteger.root_power(5, 1, 125, 2) * CyclotomicInteger.root_power(5, 1, 125, 3) == one
    total = CyclotomicInteger.reduce(5, 1, 125, [0])
    for e in range(5):
        total = total + CyclotomicInteger.root_power(5, 1, 125, e)
    assert total.to_list() == [0, 0, 0, 0]


def test_characters_are_multiplicative():
    a = ThetaElement(1, 5, 125, (1, 2, 0, 7, 3))
    b = ThetaElement(1, 5, 125, (0, 4, 1, 1, 9))
    for j in range(5):
        assert chi_special_value(a * b, j) == chi_special_value(a, j) * chi_special_value(b, j)
    assert chi_special_value(a, 0).to_list() == [13, 0, 0, 0]


def test_hensel_root():
    x = hensel_root([1, 0, -2], 3, 7, 4)
    assert (x * x - 2) % 7**4 == 0
    assert x % 7 == 3


def test_hensel_root_needs_simple_root():
    with pytest.raises(InvalidInputError):
        hensel_root([1, 0, 0], 0, 5, 3)


def test_ordinary_projector_on_diagonal_operator():
    U = HeckeMatrix(op="U", param=5, m=1, matrix=[[1, 0], [0, 5]])
    decomposition = ordinary_projector(U, 3)
    assert decomposition.idempotent == [[1, 0], [0, 0]]
    assert decomposition.ordinary_rank == 1
    assert decomposition.unit_roots == 1
    assert all(decomposition.checks.values())
    assert decomposition.project([4, 7]) == [4, 0]


def test_ordinary_projector_needs_u_p():
    with pytest.raises(PreconditionError):
        ordinary_projector(HeckeMatrix(op="T", param=3, m=1, matrix=[[4]]), 3)


@lru_cache(maxsize=None)
def theta_family():
    tower = eichler_order_tower(algebra_for_discriminant(11), 1, 5, 1, 5)
    return build_family(tower, ImagQuadField.from_discriminant(-3), c=1, m_max=1, precision=5, r_max=2)


@lru_cache(maxsize=None)
def theta_eigen():
    shimura = theta_family().shimura
    decomposition = ordinary_projector(shimura.hecke("U", 5, 1), 5)
    return ordinary_eigen(shimura, 1, CURVE_11A, 5, decomposition=decomposition)


class TestThetaInstance(unittest.TestCase):
    def setUp(self):
        self.family = theta_family()
        self.eig = theta_eigen()
        self.layers = anticyclotomic_tower(self.family.cm_field, 5, 1)

    def test_unit_root(self):
        alpha = self.eig.alpha
        assert alpha % 5 == 1
        assert (alpha * alpha - alpha + 5) % 5**5 == 0

    def test_no_eigensystem_for_impossible_eigenvalue(self):
        with pytest.raises(NonexistenceError):
            ordinary_eigen(self.family.shimura, 1, {2: 100}, 5)

    def test_audits_pass(self):
        results = theta_audits(self.family, self.layers, self.eig)
        assert results["passed"], results["audits"]
        assert "compatibility[1]" in results["audits"]
        assert [theta.n for theta in results["thetas"]] == [0, 1]

    def test_character_values_agree(self):
        theta = theta_audits(self.family, self.layers, self.eig)["thetas"][1]
        assert chi_special_value(theta, 1) == orbit_chi_value(self.family, self.layers[1], self.eig, 1)

    def test_theta_zero_from_j_element(self):
        theta0 = theta_audits(self.family, self.layers[:1], self.eig)["thetas"][0]
        J = j_element(self.family, self.eig)
        assert theta0.coefficients[0] == self.eig.alpha * J.augmentation() % self.eig.modulus

    def test_shifted_orbit_translates_theta(self):
        layer = self.layers[1]
        tau = layer.generator_element()
        s = layer.project(tau)
        assert s % 5 != 0
        plain = heegner_orbit(self.family, layer)
        shifted = heegner_orbit(self.family, layer, tau)
        assert [k for k, _ in shifted] == [k for k, _ in plain]
        theta = theta_element(self.family, layer, self.eig, orbit=plain)
        assert theta_element(self.family, layer, self.eig, orbit=shifted) == theta.translate(s)

    def test_orbit_needs_deep_enough_family(self):
        deeper = anticyclotomic_tower(self.family.cm_field, 5, 2)[2]
        with pytest.raises(PreconditionError):
            heegner_orbit(self.family, deeper)
