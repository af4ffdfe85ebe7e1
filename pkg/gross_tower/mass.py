"""Closed-form Eichler mass, kept apart from the class-set search it audits."""

from __future__ import annotations

from fractions import Fraction

from sympy import factorint


def eichler_mass(N_minus: int, level: int) -> Fraction:
    """Sum over ideal classes of 1/#(Γ/±1) for an Eichler order of the given level."""
    mass = Fraction(1, 12)
    for q in factorint(N_minus):
        mass *= q - 1
    for q, e in factorint(level).items():
        mass *= q ** (e - 1) * (q + 1)
    return mass
