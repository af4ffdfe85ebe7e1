"""Tests for the Shimura sets and Hecke operators module."""

import unittest
from fractions import Fraction
from functools import lru_cache

import pytest
from sympy import Matrix

from gross_tower.exceptions import InvalidInputError
from gross_tower.lattice import short_vectors
from gross_tower.orders import (
    eichler_order_tower,
    lattice_inverse,
    lattice_product,
    norm_gram,
    reduced_norm,
)
from gross_tower.quaternion import algebra_for_discriminant
from gross_tower.shimura import Divisor, ShimuraTower, TildePoint, is_self_adjoint, weighted_pairing


@lru_cache(maxsize=None)
def desk_shimura():
    return ShimuraTower(eichler_order_tower(algebra_for_discriminant(2), 1, 5, 2, 8))


@lru_cache(maxsize=None)
def disc11_shimura():
    return ShimuraTower(eichler_order_tower(algebra_for_discriminant(11), 1, 5, 1, 8))


def test_divisor_arithmetic():
    a, b = TildePoint(0, 1), TildePoint(1, 2)
    D = Divisor.point(1, a) + Divisor.point(1, b, 3)
    assert D.degree() == 4
    assert (D - D).coeffs == {}
    assert D.scale(2).degree() == 8
    assert D.support() == [a, b]
    assert D.to_dict() == [[0, 1, 1], [1, 2, 3]]


def test_divisors_of_different_levels_do_not_mix():
    with pytest.raises(InvalidInputError):
        Divisor.point(0, TildePoint(0, 0)) + Divisor.point(1, TildePoint(0, 1))


def test_t2_eigenvalues_disc_11():
    T2 = disc11_shimura().hecke("T", 2, 0)
    assert T2.column_sums() == [3, 3]
    assert set(Matrix(T2.matrix).eigenvals()) == {3, -2}


def test_unknown_operator():
    with pytest.raises(InvalidInputError):
        desk_shimura().hecke("V", 2, 0)


def test_t_ell_needs_prime_to_level():
    with pytest.raises(InvalidInputError):
        desk_shimura().hecke("T", 5, 1)


class TestDeskLevels(unittest.TestCase):
    def setUp(self):
        self.shimura = desk_shimura()

    def test_level_zero_is_one_point(self):
        level = self.shimura.level(0)
        assert level.h == 1
        assert level.tilde_size == 1

    def test_u_p_column_sums(self):
        for m in (1, 2):
            assert all(s == 5 for s in self.shimura.hecke("U", 5, m).column_sums())

    def test_t_ell_column_sums(self):
        for m in (0, 1, 2):
            for ell in (3, 7):
                assert all(s == ell + 1 for s in self.shimura.hecke("T", ell, m).column_sums())

    def test_diamond_one_is_identity(self):
        D1 = self.shimura.hecke("diamond", 1, 1)
        n = D1.size
        assert D1.matrix == [[int(r == c) for c in range(n)] for r in range(n)]

    def test_operators_commute(self):
        for m in (1, 2):
            ops = [
                self.shimura.hecke("T", 3, m),
                self.shimura.hecke("T", 7, m),
                self.shimura.hecke("U", 5, m),
                self.shimura.hecke("diamond", 2, m),
            ]
            for a in ops:
                for b in ops:
                    assert a.commutes_with(b), (a.op, a.param, b.op, b.param, m)

    def test_scalar_operator_is_diamond(self):
        for m in (1, 2):
            assert self.shimura.hecke("scalar", 3, m).matrix == self.shimura.hecke("diamond", 3, m).matrix

    def test_diamond_minus_one_is_trivial(self):
        for m in (1, 2):
            D = self.shimura.hecke("diamond", -1, m)
            assert D.matrix == [[int(r == c) for c in range(D.size)] for r in range(D.size)]

    def test_pushforward_commutes_with_u_p(self):
        alpha = self.shimura.pushforward_matrix(2)
        assert alpha @ self.shimura.hecke("U", 5, 2) == self.shimura.hecke("U", 5, 1) @ alpha

    def test_pushforward_commutes_with_diamonds(self):
        for m in (1, 2):
            alpha = self.shimura.pushforward_matrix(m)
            for d in (2, 3):
                assert alpha @ self.shimura.hecke("diamond", d, m) == self.shimura.hecke("diamond", d, m - 1) @ alpha

    def test_cached_operators(self):
        self.shimura.hecke("T", 3, 1)
        assert any(T.op == "T" and T.param == 3 for T in self.shimura.cached(1))

    def test_pushforward_preserves_degree(self):
        level = self.shimura.level(2)
        D = Divisor.point(2, level.points[0], 2) + Divisor.point(2, level.points[-1])
        pushed = self.shimura.pushforward(D)
        assert pushed.level == 1
        assert pushed.degree() == 3


def test_t2_is_self_adjoint_for_the_weights():
    shimura = disc11_shimura()
    level = shimura.level(0)
    T2 = shimura.hecke("T", 2, 0)
    assert sorted(level.weights()) == [Fraction(1, 3), Fraction(1, 2)]
    assert is_self_adjoint(level, T2)
    D1 = Divisor.point(0, level.points[0])
    D2 = Divisor.point(0, level.points[1], 2)
    assert weighted_pairing(level, T2.apply(D1, level), D2) == weighted_pairing(level, D1, T2.apply(D2, level))
    assert weighted_pairing(level, D1, D1) == level.stabilizer_size(level.points[0])


def test_t_ell_is_self_adjoint_at_level_one():
    shimura = desk_shimura()
    level = shimura.level(1)
    D1 = Divisor.point(1, level.points[0])
    D2 = Divisor.point(1, level.points[-1], 3)
    for T in (shimura.hecke("T", 3, 1), shimura.hecke("T", 7, 1)):
        assert is_self_adjoint(level, T)
        assert weighted_pairing(level, T.apply(D1, level), D2) == weighted_pairing(level, D1, T.apply(D2, level))


def brandt_by_counting(level, ell):
    """T_ℓ at level 0 from norm counts in I_i⁻¹·I_j, divided by the units of O_r(I_i)."""
    classes = level.classes
    alg = classes.algebra
    size = classes.h
    out = [[0] * size for _ in range(size)]
    for i in range(size):
        inverse = lattice_inverse(alg, classes.reps[i])
        n_i = reduced_norm(alg, classes.reps[i])
        for j in range(size):
            target = ell * reduced_norm(alg, classes.reps[j]) / n_i
            quotient = lattice_product(alg, inverse, classes.reps[j])
            hits = sum(1 for _, value in short_vectors(norm_gram(alg, quotient), target) if value == target)
            out[level.index(level.canonical(i, 0))][level.index(level.canonical(j, 0))] = hits // len(
                classes.unit_groups[i]
            )
    return out


def test_brandt_matrices_match_norm_counts():
    shimura = disc11_shimura()
    for ell in (2, 3, 7):
        assert shimura.hecke("T", ell, 0).matrix == brandt_by_counting(shimura.level(0), ell)
