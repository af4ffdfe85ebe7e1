"""Tests for the Eichler mass module."""

from fractions import Fraction

from gross_tower.mass import eichler_mass


def test_maximal_order_masses():
    assert eichler_mass(2, 1) == Fraction(1, 12)
    assert eichler_mass(3, 1) == Fraction(1, 6)
    assert eichler_mass(11, 1) == Fraction(5, 6)


def test_level_factors():
    assert eichler_mass(2, 5) == Fraction(1, 2)
    assert eichler_mass(2, 25) == Fraction(5, 2)
    assert eichler_mass(11, 5) == 5
