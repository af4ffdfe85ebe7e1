"""Gross Tower - exact Heegner points on towers of definite Shimura sets."""

__version__ = "0.1.0"

from gross_tower.exceptions import (
    GrossTowerError,
    InternalInvariantError,
    InvalidInputError,
    NonexistenceError,
    PreconditionError,
    PrecisionError,
)
from gross_tower.config import InstanceConfig
from gross_tower.quaternion import QuaternionAlgebra, Quaternion, algebra_for_discriminant
from gross_tower.orders import EichlerTower, eichler_order_tower, right_class_set
from gross_tower.shimura import Divisor, HeckeMatrix, ShimuraTower, TildePoint
from gross_tower.cm_fields import ImagQuadField, anticyclotomic_tower, ring_class_group
from gross_tower.heegner import HeegnerFamily, build_family, verify_compatibilities
from gross_tower.theta import ThetaElement, lp_truncation, ordinary_eigen, ordinary_projector, theta_element
from gross_tower.metrics import MetricsCollector
from gross_tower.audit import PrecisionAudit
from gross_tower.report import JsonReport

__all__ = [
    # Errors
    "GrossTowerError",
    "InvalidInputError",
    "PreconditionError",
    "NonexistenceError",
    "InternalInvariantError",
    "PrecisionError",
    # Configuration
    "InstanceConfig",
    # Algebras and orders
    "QuaternionAlgebra",
    "Quaternion",
    "algebra_for_discriminant",
    "EichlerTower",
    "eichler_order_tower",
    "right_class_set",
    # Shimura sets
    "Divisor",
    "HeckeMatrix",
    "ShimuraTower",
    "TildePoint",
    # CM fields
    "ImagQuadField",
    "anticyclotomic_tower",
    "ring_class_group",
    # Heegner points
    "HeegnerFamily",
    "build_family",
    "verify_compatibilities",
    # Theta elements
    "ThetaElement",
    "lp_truncation",
    "ordinary_eigen",
    "ordinary_projector",
    "theta_element",
    # Instrumentation
    "MetricsCollector",
    "PrecisionAudit",
    "JsonReport",
]
