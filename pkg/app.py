# app.py

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Optional

from src import (
    CapPolicy,
    FieldSpec,
    InputError,
    QcohVerifierClass,
    Report,
    Scenario,
    load_settings,
    parse_window,
)

EXIT_OK, EXIT_MISMATCH, EXIT_INCONCLUSIVE, EXIT_INPUT = 0, 1, 2, 3

logger = logging.getLogger("qcv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcv",
        description="Exact verification of quasicoherent sheaf computations on the plane with double origin.",
    )
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p: argparse.ArgumentParser):
        p.add_argument("--window", help="degree window LO:HI")
        p.add_argument("--den-cap", type=int, help="initial denominator cap")
        p.add_argument("--field", help="ground field, Q or Fp:P")
        p.add_argument("--format", choices=("json", "table"), default="json")
        p.add_argument("--out", help="write the report here instead of stdout")

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("file")
    add_run_flags(run)

    builtin = sub.add_parser("builtin", help="run a built-in scenario")
    builtin.add_argument("name")
    add_run_flags(builtin)

    sub.add_parser("list", help="list the built-in scenarios")
    return parser


def apply_overrides(s: Scenario, args: argparse.Namespace) -> Scenario:
    """CLI flags win over the scenario file."""
    update = {}
    try:
        if args.window:
            update["window"] = parse_window(args.window)
        if args.field:
            update["field"] = FieldSpec.parse(args.field)
    except ValueError as e:
        raise InputError(str(e)) from None
    if args.den_cap is not None:
        if args.den_cap < 0:
            raise InputError(f"--den-cap must be nonnegative, got {args.den_cap}")
        update["caps"] = CapPolicy(start=args.den_cap, step=s.caps.step, escalations=s.caps.escalations)
    return s.model_copy(update=update) if update else s


def exit_code(report: Report) -> int:
    if any(check.verdict == "inconclusive" for check in report.checks):
        return EXIT_INCONCLUSIVE
    if not all(check.as_expected for check in report.checks):
        return EXIT_MISMATCH
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = load_settings()
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    verifier = QcohVerifierClass(settings)

    if args.command == "list":
        for name in verifier.list_builtins():
            print(name)
        return EXIT_OK

    try:
        if args.command == "run":
            scenario = verifier.load_file(args.file)
        else:
            scenario = verifier.load_builtin(args.name)
        scenario = apply_overrides(scenario, args)
        report = asyncio.run(verifier.run_scenario(scenario))
        text = verifier.render(report, args.format)
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    except InputError as e:
        logger.error(f"input error: {e}")
        return EXIT_INPUT
    except OSError as e:
        logger.error(f"cannot read or write: {e}")
        return EXIT_INPUT

    code = exit_code(report)
    for check in report.checks:
        if not check.as_expected:
            logger.warning(f"{check.name}: got {check.verdict}, expected {check.expected}")
    logger.info(f"exit code {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
