"""Command-line entry point: ``gross-tower <command> [flags]``.

Exit codes: 0 success, 2 invalid input or precondition, 3 the requested
object does not exist, 4 a certified check failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from typing import Optional, Sequence

from gross_tower.commands import DECISIONS, SUITES, RunContext, registry
from gross_tower.config import DEFAULT_PRECISION, InstanceConfig
from gross_tower.exceptions import InvalidInputError
from gross_tower.report import JsonReport

logger = logging.getLogger("gross_tower")


def parse_eigensystem(text: str) -> dict[int, int]:
    """"2:-2,5:1" → {2: -2, 5: 1}."""
    out: dict[int, int] = {}
    if not text:
        return out
    for item in text.split(","):
        try:
            ell, a = item.split(":")
            out[int(ell)] = int(a)
        except ValueError:
            raise InvalidInputError(f"cannot read eigenvalue {item!r}; expected ell:a_ell")
    return out


def _instance_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--nminus", type=int, default=2, help="discriminant N- of the algebra")
    parser.add_argument("--nplus", type=int, default=1, help="tame level N+")
    parser.add_argument("--p", type=int, default=5, help="the prime p")
    parser.add_argument("--mmax", "--m", dest="m_max", type=int, default=1, help="deepest level m")
    parser.add_argument("--dk", type=int, default=None, help="fundamental discriminant of K")
    parser.add_argument("--c", type=int, default=1, help="base conductor")
    parser.add_argument("--ell", type=int, default=None, help="inert prime for the T_ell chain")
    parser.add_argument("--precision", type=int, default=DEFAULT_PRECISION, help="p-adic precision M")
    parser.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    parser.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gross-tower", description="Heegner points on definite Shimura towers")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("classset", "heegner", "selftest"):
        _instance_flags(sub.add_parser(name, help=registry.get_command(name).description))
    hecke = sub.add_parser("hecke", help=registry.get_command("hecke").description)
    _instance_flags(hecke)
    hecke.add_argument("--op", choices=("T", "U", "diamond", "scalar"), default="T")
    hecke.add_argument("--param", type=int, default=2)
    hecke.add_argument("--level", type=int, default=0)
    verify = sub.add_parser("verify", help=registry.get_command("verify").description)
    _instance_flags(verify)
    verify.add_argument("--suite", choices=SUITES, default="all")
    theta = sub.add_parser("theta", help=registry.get_command("theta").description)
    _instance_flags(theta)
    theta.add_argument("--nmax", type=int, default=1)
    theta.add_argument("--eigensystem", default="", help="targets such as 2:-2,3:-1,5:1")
    return parser


def config_from_args(args: argparse.Namespace) -> InstanceConfig:
    return InstanceConfig(
        N_minus=args.nminus,
        N_plus=args.nplus,
        p=args.p,
        m_max=args.m_max,
        D_K=args.dk,
        c=args.c,
        precision=args.precision,
        output=args.out,
        ell=args.ell,
        n_max=getattr(args, "nmax", 1),
        eigensystem=parse_eigensystem(getattr(args, "eigensystem", "")),
    )


def run(args: argparse.Namespace) -> JsonReport:
    ctx = RunContext()
    registry.metrics = ctx.metrics
    started = time.time()
    try:
        config = config_from_args(args)
    except InvalidInputError as e:
        return JsonReport(command=args.command, instance={}, exit_code=e.exit_code, error=e.to_dict())
    kwargs = {}
    if args.command == "hecke":
        kwargs = {"op": args.op, "param": args.param, "m": args.level}
    elif args.command == "verify":
        kwargs = {"suite": args.suite}
    result = registry.execute(args.command, config, ctx, **kwargs)
    exit_code = result.exit_code
    if result.success and isinstance(result.data, dict) and result.data.get("passed") is False:
        exit_code = 4
    report = JsonReport(
        command=args.command,
        instance={**config.to_dict(), "decisions": DECISIONS, "arguments": kwargs},
        results=result.data,
        precision=ctx.audit.summary() if ctx.audit else {"default_precision": config.precision},
        timing={"started": started, "elapsed_ms": round(result.execution_time_ms, 3)},
        metrics=ctx.metrics.summary(),
        exit_code=exit_code,
        error=None if result.success else {"message": result.error, "details": result.details},
    )
    return report


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    report = run(args)
    if args.out:
        report.write(args.out)
        logger.info("report written to %s", args.out)
    else:
        sys.stdout.write(report.to_json() + "\n")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
