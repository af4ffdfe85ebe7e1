"""Command handlers behind the CLI.

Each handler takes a validated InstanceConfig and a RunContext and returns
plain result data; the CLI wraps it into a JsonReport. Handlers raise
GrossTowerError subclasses, which the registry turns into exit codes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from sympy import Matrix, Poly, nextprime, primitive_root

from gross_tower.audit import PrecisionAudit
from gross_tower.cm_fields import ImagQuadField, anticyclotomic_tower, check_heegner_hypothesis, d_of_n
from gross_tower.config import THETA_INSTANCE, InstanceConfig
from gross_tower.exceptions import InternalInvariantError, InvalidInputError, PreconditionError
from gross_tower.heegner import (
    HeegnerFamily,
    VerificationReport,
    build_family,
    consistency_checks,
    euler_relations,
    galois_checks,
    verify_compatibilities,
    verify_heegner_point,
)
from gross_tower.mass import eichler_mass
from gross_tower.metrics import MetricsCollector
from gross_tower.orders import EichlerTower, eichler_order_tower
from gross_tower.quaternion import algebra_for_discriminant
from gross_tower.registry import CommandRegistry
from gross_tower.shimura import ShimuraTower
from gross_tower.theta import (
    ThetaElement,
    X,
    chi_special_value,
    j_element,
    lp_truncation,
    ordinary_eigen,
    ordinary_projector,
    orbit_chi_value,
    theta_audits,
)

logger = logging.getLogger(__name__)

SUITES = ("tower", "euler", "galois", "consistency", "all", "none")

# Choices that shape the numbers in every report.
DECISIONS = {
    "eta": "evaluation against the ordinary eigen functional",
    "p_component": "a_p0 = intertwiner(phi(sqrt(-D)), phi_p(omega_i)) * phi_p(beta)",
    "lift_norms": "Teichmuller-normalized",
    "precision": "fixed at tower construction",
}


@dataclass
class RunContext:
    """Per-run instrumentation shared by the handlers."""

    metrics: MetricsCollector = field(default_factory=MetricsCollector)
    audit: Optional[PrecisionAudit] = None

    def for_config(self, config: InstanceConfig) -> "RunContext":
        if self.audit is None:
            self.audit = PrecisionAudit(default_precision=config.precision)
        return self


registry = CommandRegistry()


# ─── Shared builders ──────────────────────────────────────────────────────────


def build_tower(config: InstanceConfig, m_max: Optional[int] = None) -> EichlerTower:
    alg = algebra_for_discriminant(config.N_minus)
    return eichler_order_tower(
        alg, config.N_plus, config.p, config.m_max if m_max is None else m_max, config.precision
    )


def build_config_family(
    config: InstanceConfig,
    ctx: RunContext,
    *,
    m_max: Optional[int] = None,
    r_max: int = 1,
    c: Optional[int] = None,
) -> HeegnerFamily:
    config.validate(require_field=True)
    ctx.for_config(config)
    m_max = config.m_max if m_max is None else m_max
    K = ImagQuadField.from_discriminant(config.D_K)
    tower = build_tower(config, m_max)
    with ctx.metrics.timer("family_ms"):
        family = build_family(
            tower,
            K,
            c=config.c if c is None else c,
            m_max=m_max,
            precision=config.precision,
            ell=config.ell,
            r_max=r_max,
        )
    ctx.audit.record("local_embedding", config.p, family.precision, detail={"D_K": config.D_K})
    return family


def _rational_eigenvalues(matrix: list[list[int]]) -> tuple[list[Fraction], list[str]]:
    _, factors = Poly(Matrix(matrix).charpoly(X).as_expr(), X).factor_list()
    roots, described = [], []
    for f, k in factors:
        described.append(f"({f.as_expr()})^{k}")
        if f.degree() == 1:
            a, b = f.all_coeffs()
            roots.append(Fraction(-int(b), int(a)))
    return sorted(roots), described


def _report_dict(report: VerificationReport) -> dict:
    out = report.to_dict()
    out["passed"] = report.passed
    return out


# ─── Commands ─────────────────────────────────────────────────────────────────


@registry.command("classset", description="class sets, tilde sizes and the mass audit per level")
def cmd_classset(config: InstanceConfig, ctx: RunContext) -> dict:
    config.validate()
    ctx.for_config(config)
    tower = build_tower(config)
    shimura = ShimuraTower(tower)
    levels = []
    for m in range(config.m_max + 1):
        with ctx.metrics.timer("class_set_ms", tags={"m": m}):
            level = shimura.level(m)
        classes = level.classes
        expected = eichler_mass(config.N_minus, config.N_plus * config.p**m)
        ok = classes.mass == expected
        ctx.metrics.gauge("class_number", classes.h, tags={"m": m})
        ctx.metrics.gauge("tilde_size", level.tilde_size, tags={"m": m})
        ctx.audit.record("class_set", config.p, tower.precision, certified=ok, detail={"m": m})
        if not ok:
            raise InternalInvariantError(
                "class set mass does not match the Eichler mass",
                details={"m": m, "mass": str(classes.mass), "expected": str(expected)},
            )
        levels.append({
            "m": m,
            "h": classes.h,
            "h_tilde": level.tilde_size,
            "unit_orders": [len(g) for g in classes.unit_groups],
            "mass": classes.mass,
            "mass_expected": expected,
            "flags": list(level.flags),
        })
    return {"levels": levels, "algebra": {"a": tower.algebra.a, "b": tower.algebra.b}}


def _expected_degree(op: str, param: int, p: int) -> int:
    return {"T": param + 1, "U": p}.get(op, 1)


@registry.command("hecke", description="a Hecke matrix with column-sum and commutativity audits")
def cmd_hecke(config: InstanceConfig, ctx: RunContext, *, op: str = "T", param: int = 2, m: int = 0) -> dict:
    config.validate()
    ctx.for_config(config)
    if m > config.m_max:
        config = InstanceConfig.from_dict({**config.to_dict(), "m_max": m})
    p = config.p
    shimura = ShimuraTower(build_tower(config))
    with ctx.metrics.timer("hecke_ms", tags={"op": op}):
        T = shimura.hecke(op, param, m)
    # companions for the commutativity audit
    ell = 2
    while (config.N * p) % ell == 0 or ell == param:
        ell = nextprime(ell)
    shimura.hecke("T", ell, m)
    if m >= 1:
        shimura.hecke("U", p, m)
        shimura.hecke("diamond", int(primitive_root(p**m)), m)
    degree = _expected_degree(op, param, p)
    sums = T.column_sums()
    commutes = {f"{S.op}_{S.param}": T.commutes_with(S) for S in shimura.cached(m) if S is not T}
    eigenvalues, factors = _rational_eigenvalues(T.matrix)
    ctx.metrics.gauge("matrix_size", T.size, tags={"op": op})
    return {
        "operator": {"op": op, "param": param, "m": m},
        "matrix": T.matrix,
        "column_sums": sums,
        "expected_degree": degree,
        "column_sum_audit": all(s == degree for s in sums),
        "commutativity_audit": commutes,
        "eigenvalues": eigenvalues,
        "charpoly_factors": factors,
    }


@registry.command("heegner", description="the certified Heegner family and its adelic consistency")
def cmd_heegner(config: InstanceConfig, ctx: RunContext) -> dict:
    ctx.for_config(config)
    family = build_config_family(config, ctx)
    K = family.cm_field
    _, hypothesis = check_heegner_hypothesis(config.N_plus, config.N_minus, K, config.p)
    points = []
    conductors = [family.c * config.p**h for h in range(family.r_max + 1)]
    if family.ell is not None:
        conductors.append(family.c * family.ell)
    for conductor in conductors:
        for m in range(family.m_max + 1):
            P = family.point(conductor, m)
            check = verify_heegner_point(family, P)
            ctx.audit.record(
                "optimality", config.p, family.precision, certified=check["passed"], detail={"conductor": conductor, "m": m}
            )
            ctx.metrics.increment("heegner_points")
            points.append({
                **P.to_dict(),
                "certificate": {**check["certificate"].to_dict(), "optimal": check["optimal"]},
                "local": check["local"],
            })
    audits = consistency_checks(family)
    return {
        "family": family.to_dict(),
        "hypothesis": {str(q): r for q, r in hypothesis.items()},
        "points": points,
        "audits": _report_dict(audits),
        "passed": audits.passed,
    }


@registry.command("verify", description="compatibility, Euler-system and Galois identity suites")
def cmd_verify(config: InstanceConfig, ctx: RunContext, *, suite: str = "all") -> dict:
    if suite not in SUITES:
        raise InvalidInputError(f"unknown suite {suite!r}", details={"choices": list(SUITES)})
    ctx.for_config(config)
    if suite == "none":
        config.validate(require_field=True)
        return {"suite": suite, "report": VerificationReport().to_dict(), "passed": True}
    family = build_config_family(config, ctx)
    report = VerificationReport()
    selected = SUITES[:4] if suite == "all" else (suite,)
    for name in selected:
        with ctx.metrics.timer("suite_ms", tags={"suite": name}):
            if name == "tower":
                report.extend(verify_compatibilities(family, config.ell))
            elif name == "euler":
                report.extend(euler_relations(family, config.ell))
            elif name == "galois":
                report.extend(galois_checks(family, min(1, family.m_max)))
            else:
                report.extend(consistency_checks(family))
    ctx.audit.record("verification", config.p, family.precision, certified=report.passed, detail={"suite": suite})
    return {"suite": suite, "report": _report_dict(report), "passed": report.passed}


def _targets(config: InstanceConfig) -> dict[int, int]:
    if config.eigensystem:
        return dict(config.eigensystem)
    theta_keys = ("N_minus", "N_plus", "p", "D_K")
    if all(getattr(config, k) == THETA_INSTANCE[k] for k in theta_keys):
        return {2: -2, 3: -1, 5: 1}
    raise PreconditionError("an --eigensystem such as 2:-2,5:1 is required")


@registry.command("theta", description="theta elements, their L-truncations and audits")
def cmd_theta(config: InstanceConfig, ctx: RunContext) -> dict:
    config.validate(require_field=True)
    ctx.for_config(config)
    if config.c != 1:
        raise PreconditionError("theta elements are built from the conductor-one family")
    p, M = config.p, config.precision
    K = ImagQuadField.from_discriminant(config.D_K)
    d_max = d_of_n(K, p, config.n_max) if config.n_max > 0 else 1
    if M < d_max + 3:
        raise PreconditionError(
            f"theta_{config.n_max} needs conductor p^{d_max}; raise --precision to at least {d_max + 3}",
            details={"required_d": d_max, "precision": M},
        )
    family = build_config_family(config, ctx, m_max=1, r_max=d_max)
    shimura = family.shimura
    with ctx.metrics.timer("ordinary_ms"):
        decomposition = ordinary_projector(shimura.hecke("U", p, 1), M)
    ctx.audit.record("ordinary_projector", p, M, detail={"exponent": decomposition.exponent})
    eig = ordinary_eigen(shimura, 1, _targets(config), M, decomposition=decomposition)
    ctx.audit.record("unit_root", p, M, detail={"alpha": eig.alpha})
    layers = anticyclotomic_tower(K, p, config.n_max)
    with ctx.metrics.timer("theta_ms"):
        results = theta_audits(family, layers, eig)
    audits = results["audits"]
    top, theta = layers[-1], results["thetas"][-1]
    characters = {}
    if top.n > 0:
        direct = chi_special_value(theta, 1)
        characters = {"j": 1, "value": direct.to_list(), "layer": top.n}
        audits["chi_two_ways"] = direct == orbit_chi_value(family, top, eig, 1)
        audits["chi_multiplicative"] = chi_special_value(lp_truncation(theta), 1) == direct * chi_special_value(theta, -1)
    J = j_element(family, eig)
    audits["theta0_from_J"] = results["thetas"][0].coefficients[0] == eig.alpha * J.augmentation() % eig.modulus
    passed = all(audits.values())
    ctx.audit.record("theta", p, M, certified=passed, detail={"n_max": config.n_max})
    return {
        "decomposition": decomposition.to_dict(),
        "eigen": eig.to_dict(),
        "layers": results["layers"],
        "generator_prime": top.generator_prime,
        "characters": characters,
        "J": J.to_dict(),
        "audits": audits,
        "passed": passed,
    }


@registry.command("selftest", description="quick smoke checks of every module")
def cmd_selftest(config: InstanceConfig, ctx: RunContext) -> dict:
    ctx.for_config(config)
    checks: dict[str, bool] = {}
    desk = InstanceConfig(N_minus=2, N_plus=1, p=5, m_max=1)
    tower = build_tower(desk)
    shimura = ShimuraTower(tower)
    checks["mass(2) = 1/12"] = eichler_mass(2, 1) == Fraction(1, 12)
    checks["h(2, m=0) = 1"] = shimura.level(0).classes.h == 1
    identity = shimura.hecke("diamond", 1, 1)
    checks["<1> = identity"] = all(
        v == (1 if r == c else 0) for r, row in enumerate(identity.matrix) for c, v in enumerate(row)
    )
    checks["U_5 degree"] = all(s == 5 for s in shimura.hecke("U", 5, 1).column_sums())
    checks["T_3 degree"] = all(s == 4 for s in shimura.hecke("T", 3, 0).column_sums())
    try:
        InstanceConfig(N_minus=15).validate()
        checks["even parity rejected"] = False
    except InvalidInputError:
        checks["even parity rejected"] = True
    theta = ThetaElement(1, 5, 5**3, (1, 2, 0, 0, 3))
    L = lp_truncation(theta)
    checks["L* = L"] = L.star() == L
    checks["augmentation"] = L.augmentation() == theta.augmentation() ** 2 % theta.modulus
    passed = all(checks.values())
    if not passed:
        raise InternalInvariantError("selftest failed", details={k: v for k, v in checks.items() if not v})
    return {"checks": checks, "passed": passed}
