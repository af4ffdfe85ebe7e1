"""Tests for the instance configuration module."""

import pytest

from gross_tower.config import (
    DESK_INSTANCE,
    THETA_INSTANCE,
    InstanceConfig,
    is_fundamental_discriminant,
    is_squarefree,
    working_precision,
)
from gross_tower.exceptions import (
    GrossTowerError,
    InternalInvariantError,
    InvalidInputError,
    NonexistenceError,
    PrecisionError,
    PreconditionError,
)


def test_exit_codes():
    assert InvalidInputError("x").exit_code == 2
    assert PreconditionError("x").exit_code == 2
    assert NonexistenceError("x").exit_code == 3
    assert InternalInvariantError("x").exit_code == 4
    assert PrecisionError("x").exit_code == 4
    assert issubclass(PreconditionError, InvalidInputError)


def test_error_to_dict():
    err = InvalidInputError("bad p", details={"prime": 4})
    assert isinstance(err, GrossTowerError)
    assert err.to_dict() == {
        "error": "InvalidInputError",
        "message": "bad p",
        "exit_code": 2,
        "details": {"prime": 4},
    }


def test_discriminant_helpers():
    assert is_squarefree(30)
    assert not is_squarefree(12)
    assert is_fundamental_discriminant(-3)
    assert is_fundamental_discriminant(-20)
    assert not is_fundamental_discriminant(-12)
    assert not is_fundamental_discriminant(5)
    assert working_precision(8) > 8


def test_shipped_instances_validate():
    InstanceConfig(**DESK_INSTANCE).validate(require_field=True)
    InstanceConfig(**THETA_INSTANCE).validate(require_field=True)


def test_even_tame_level_accepted():
    config = InstanceConfig(N_minus=3, N_plus=2, p=5).validate()
    assert config.N == 6


def test_even_parity_rejected():
    with pytest.raises(InvalidInputError, match="even parity"):
        InstanceConfig(N_minus=15).validate()


@pytest.mark.parametrize(
    "kwargs",
    [
        {"N_minus": 4},
        {"N_plus": 0},
        {"N_plus": 3, "N_minus": 3},
        {"p": 3},
        {"p": 9},
        {"m_max": -1},
        {"precision": 0},
        {"c": 0},
        {"D_K": -12},
        {"D_K": -20},
    ],
)
def test_invalid_instances(kwargs):
    with pytest.raises(InvalidInputError):
        InstanceConfig(**kwargs).validate()


def test_field_required_when_asked():
    InstanceConfig().validate()
    with pytest.raises(InvalidInputError):
        InstanceConfig().validate(require_field=True)


def test_round_trip_through_dict():
    config = InstanceConfig(N_minus=11, D_K=-3, eigensystem={2: -2, 5: 1})
    data = config.to_dict()
    assert data["eigensystem"] == {"2": -2, "5": 1}
    assert InstanceConfig.from_dict(data) == config
