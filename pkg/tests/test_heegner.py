"""Tests for the Heegner families module."""

import unittest
from dataclasses import replace
from functools import lru_cache

import pytest

from gross_tower.cm_fields import ImagQuadField
from gross_tower.exceptions import InvalidInputError, PreconditionError
from gross_tower.heegner import (
    IdentityCheck,
    VerificationReport,
    build_family,
    consistency_checks,
    euler_relations,
    galois_checks,
    pi_matrix,
    verify_compatibilities,
    verify_heegner_point,
)
from gross_tower.orders import eichler_order_tower
from gross_tower.padic import mat_mul
from gross_tower.quaternion import algebra_for_discriminant
from gross_tower.shimura import Divisor, TildePoint


@lru_cache(maxsize=None)
def desk_tower():
    return eichler_order_tower(algebra_for_discriminant(2), 1, 5, 2, 8)


@lru_cache(maxsize=None)
def desk_family():
    K = ImagQuadField.from_discriminant(-11)
    return build_family(desk_tower(), K, c=1, m_max=2, precision=8, ell=7, r_max=1)


def test_report_counts_and_status():
    report = VerificationReport()
    D = Divisor.point(0, TildePoint(0, 0))
    report.add(IdentityCheck("same", 0, "pass", D, D))
    report.add(IdentityCheck("later", 1, "skip", reason="needs m ≥ 2"))
    assert report.passed
    other = VerificationReport()
    other.add(IdentityCheck("broken", 0, "fail", D, D.scale(2)))
    report.extend(other)
    assert not report.passed
    data = report.to_dict()
    assert data["counts"] == {"pass": 1, "fail": 1, "skip": 1}
    assert data["checks"][2]["lhs"] == [[0, 0, 1]]
    assert data["checks"][2]["rhs"] == [[0, 0, 2]]
    assert [c.name for c in report.failures()] == ["broken"]


def test_family_needs_heegner_hypothesis():
    with pytest.raises(InvalidInputError):
        build_family(desk_tower(), ImagQuadField.from_discriminant(-7), m_max=1)


def test_family_needs_inert_chain_prime():
    with pytest.raises(PreconditionError):
        build_family(desk_tower(), ImagQuadField.from_discriminant(-11), m_max=1, ell=3)


def test_family_needs_precision_headroom():
    with pytest.raises(PreconditionError):
        build_family(desk_tower(), ImagQuadField.from_discriminant(-11), m_max=2, precision=3, r_max=1)


class TestDeskFamily(unittest.TestCase):
    def setUp(self):
        self.family = desk_family()

    def test_points_have_expected_conductors(self):
        for m in range(3):
            P = self.family.point(1, m)
            assert P.level == m
            assert P.conductor == 5**m
        assert self.family.point(5, 1).conductor == 25
        assert self.family.point(7, 0).conductor == 7

    def test_points_pass_the_heegner_conditions(self):
        for m in range(3):
            result = verify_heegner_point(self.family, self.family.point(1, m))
            assert result["passed"]
            assert result["certificate"].certified

    def test_point_outside_family(self):
        with pytest.raises(PreconditionError):
            self.family.point(3, 1)
        with pytest.raises(PreconditionError):
            self.family.point(1, 3)

    def test_point_serialization(self):
        data = self.family.point(1, 1).to_dict()
        assert data["conductor"] == 5
        assert len(data["point"]) == 2
        assert data["label"] == "P(1,1)"

    def test_stored_adelic_data_is_consistent(self):
        report = consistency_checks(self.family)
        assert report.passed
        names = {c.name for c in report.checks}
        assert names == {"R_m-ideal", "optimal embedding", "unit condition at p"}
        conductors = {c.params["conductor"] for c in report.checks}
        assert conductors == {1, 5, 7}

    def test_consistency_catches_a_shifted_model(self):
        models = dict(self.family.models)
        models[5] = mat_mul(pi_matrix(5), models[5])
        shifted = replace(self.family, models=models, _points={})
        report = consistency_checks(shifted)
        assert not report.passed
        assert "optimal embedding" in {c.name for c in report.failures()}

    def test_compatibilities(self):
        report = verify_compatibilities(self.family)
        assert report.passed
        names = {c.name for c in report.checks if c.status == "pass"}
        assert {"vertical", "horizontal", "T_ell"} <= names

    def test_euler_relations(self):
        assert euler_relations(self.family).passed

    def test_galois_action(self):
        report = galois_checks(self.family, 1)
        assert report.passed
        assert [c.name for c in report.checks] == ["diamond action", "free action", "action law"]

    def test_galois_checks_skip_level_zero(self):
        report = galois_checks(self.family, 0)
        assert report.checks[0].status == "skip"
