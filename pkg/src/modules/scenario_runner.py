"""
Dispatches the checks of a scenario to the algebra and collects a Report.
CapExhausted and GluingMismatch become verdicts; input errors surface while
the scenario is parsed, before any check runs.
"""
import logging
import time

from src.constants.report_models import (
    COMPUTED,
    DEFECT,
    DEFECT_FREE,
    GLUING_MISMATCH,
    INCONCLUSIVE,
    NO_WITNESS,
    NONZERO_H1,
    WITNESS_FOUND,
    ZERO_H1,
    CheckResult,
    Report,
    degree_ranges,
)
from src.constants.scenario_models import CheckSpec, Scenario
from src.constants.settings import VERSION
from .errors import CapExhausted, GluingMismatch
from .glued_scheme import (
    SheafMap,
    flat_quotient_obstruction,
    flat_sections_defect,
    overlap_status,
    sequence_report,
    sheaf_sections_flagged,
    witness_nonaffine,
)
from .graded_modules import FPGradedModule
from .localization_cech import common_sections, h1_window
from .matlis import bidual_pipeline
from .scenario_parser import STRUCTURE, ScenarioContext, _split_list, build_context

logger = logging.getLogger(__name__)


def _sections_check(ctx: ScenarioContext, check: CheckSpec) -> CheckResult:
    opts = check.options
    lo, hi = ctx.window
    if "sheaf" in opts:
        open_ = opts.get("open", "W")
        module, flags = sheaf_sections_flagged(ctx.sheaf(opts["sheaf"]), open_, ctx.window, ctx.caps)
        label = f"G({open_},{opts['sheaf']})"
    else:
        name = opts.get("module", STRUCTURE)
        (module,), flags = common_sections([ctx.module(name)], ctx.open, ctx.window, ctx.caps)
        label = f"G(W,{name})"
    return CheckResult(name=check.label, kind=check.kind, tables={label: module.dims(lo, hi)},
                       flags=flags, verdict=COMPUTED)


def _h1_check(ctx: ScenarioContext, check: CheckSpec) -> CheckResult:
    name = check.options.get("module", STRUCTURE)
    table = h1_window(ctx.module(name), ctx.open, ctx.window, ctx.caps)
    nonzero = [d for d, v in table.dims.items() if v]
    flags = table.flags + [f"nonzero-at:{r}" for r in degree_ranges(nonzero)]
    return CheckResult(name=check.label, kind=check.kind, tables={f"H1(W,{name})": table.dims}, flags=flags,
                       verdict=NONZERO_H1 if nonzero else ZERO_H1)


def _obstruction_check(ctx: ScenarioContext, check: CheckSpec) -> CheckResult:
    buffer = check.options.get("buffer")
    cert = flat_quotient_obstruction(ctx.sheaf(check.options["sheaf"]), ctx.window, ctx.caps,
                                     int(buffer) if buffer is not None else None)
    return CheckResult(name=check.label, kind=check.kind,
                       tables={"sections": cert.sections, "codim": cert.codim, "codim_V": cert.codim_V},
                       flags=cert.flags, verdict=cert.verdict)


def _sheaf_maps(ctx: ScenarioContext, check: CheckSpec) -> list[SheafMap]:
    sheaves = [ctx.sheaf(name) for name in _split_list(check.options["sheaves"])]
    names = _split_list(check.options["maps"])
    return [SheafMap(a, b, ctx.map(name)) for a, b, name in zip(sheaves, sheaves[1:], names)]


def _sequence_check(ctx: ScenarioContext, check: CheckSpec) -> CheckResult:
    report = sequence_report(_sheaf_maps(ctx, check), check.options.get("open", "W"), ctx.window, ctx.caps)
    return CheckResult(name=check.label, kind=check.kind, tables=report.tables(), flags=report.flags,
                       verdict=report.verdict)


def _bidual_check(ctx: ScenarioContext, check: CheckSpec) -> CheckResult:
    report = bidual_pipeline(_sheaf_maps(ctx, check), ctx.window, ctx.caps)
    tables = {f"U+:{k}": v for k, v in report.plus_over_U.tables().items()}
    tables.update({f"V++:{k}": v for k, v in report.plusplus_over_V.tables().items()})
    flags = [f"U+:{report.plus_over_U.verdict}"] + report.flags
    return CheckResult(name=check.label, kind=check.kind, tables=tables, flags=flags, verdict=report.verdict)


def _flat_sections_modules(ctx: ScenarioContext, check: CheckSpec) -> list[FPGradedModule]:
    modules = [ctx.module(name) for name in _split_list(check.options.get("modules", ""))]
    family = check.options.get("free_family")
    if family:
        max_rank, max_shift = (int(p) for p in family.split(":"))
        for r in range(1, max_rank + 1):
            for a in range(-max_shift, max_shift + 1):
                modules.append(FPGradedModule.free(ctx.ring, (a,) * r, f"R({-a})^{r}"))
    return modules


def _flat_sections_check(ctx: ScenarioContext, check: CheckSpec) -> CheckResult:
    tables, flags = {}, []
    for m in _flat_sections_modules(ctx, check):
        report = flat_sections_defect(m, ctx.open, ctx.window, ctx.caps)
        tables[f"defect:{m.name}"] = report.defect
        flags += [f"defect:{m.name}:{r}" for r in degree_ranges([d for d, v in report.defect.items() if v])]
        flags += [flag for flag in report.flags if flag not in flags]
    verdict = DEFECT if any(f.startswith("defect:") for f in flags) else DEFECT_FREE
    return CheckResult(name=check.label, kind=check.kind, tables=tables, flags=flags, verdict=verdict)


def _witness_check(ctx: ScenarioContext, check: CheckSpec) -> CheckResult:
    name = check.options.get("module", STRUCTURE)
    module = ctx.module(name)
    witness = witness_nonaffine(ctx.open, ctx.window, module, ctx.caps)
    if witness is None:
        table = h1_window(module, ctx.open, ctx.window, ctx.caps)
        return CheckResult(name=check.label, kind=check.kind, tables={f"H1(W,{name})": table.dims},
                           flags=table.flags, verdict=NO_WITNESS)
    flags = witness.flags + [f"witness-degree:{witness.degree}",
                             "coboundary-check:" + ("passed" if witness.verified else "failed")]
    return CheckResult(name=check.label, kind=check.kind, tables={f"H1(W,{name})": witness.h1}, flags=flags,
                       verdict=WITNESS_FOUND if witness.verified else NO_WITNESS)


def _overlap_check(ctx: ScenarioContext, check: CheckSpec) -> CheckResult:
    status = overlap_status(ctx.open, ctx.window, ctx.caps)
    return CheckResult(name=check.label, kind=check.kind, flags=[f"overlap:{status}"], verdict=COMPUTED)


_DISPATCH = {
    "sections": _sections_check,
    "h1": _h1_check,
    "obstruction": _obstruction_check,
    "star-sequence": _sequence_check,
    "bidual": _bidual_check,
    "lemma21": _flat_sections_check,
    "nonaffine-witness": _witness_check,
    "overlap": _overlap_check,
}


def run_check(ctx: ScenarioContext, check: CheckSpec) -> CheckResult:
    started = time.perf_counter()
    logger.info(f"check {check.label} ({check.kind}) started")
    try:
        result = _DISPATCH[check.kind](ctx, check)
    except CapExhausted as e:
        logger.warning(f"check {check.label}: {e}")
        result = CheckResult(name=check.label, kind=check.kind, flags=[f"cap-exhausted:{e.max_cap}"],
                             verdict=INCONCLUSIVE)
    except GluingMismatch as e:
        logger.warning(f"check {check.label}: {e}")
        result = CheckResult(name=check.label, kind=check.kind, flags=["gluing-mismatch"],
                             verdict=GLUING_MISMATCH)
    result.expected = ctx.scenario.expect.get(check.label)
    logger.info(f"check {check.label} finished in {time.perf_counter() - started:.2f}s: {result.verdict}")
    return result


def assemble_report(scenario: Scenario, results: list[CheckResult]) -> Report:
    return Report(scenario=scenario.name, window=tuple(scenario.window), checks=results, version=VERSION)


def run_scenario(s: Scenario) -> Report:
    """
    Runs every check in scenario order.

    Args:
        s (Scenario): A parsed scenario.

    Returns:
        Report: One result per check; CapExhausted and GluingMismatch come back as verdicts.
    """
    ctx = build_context(s)
    return assemble_report(s, [run_check(ctx, check) for check in s.checks])
