import logging

from src.constants.report_models import Report
from .errors import InputError

logger = logging.getLogger(__name__)

FORMATS = ("json", "table")


def _table_lines(tables: dict[str, dict[int, int]], lo: int, hi: int) -> list[str]:
    degrees = list(range(lo, hi + 1))
    names = list(tables)
    head = max([len("degree")] + [len(n) for n in names])
    width = max([len(str(d)) for d in degrees] +
                [len(str(v)) for table in tables.values() for v in table.values()])
    lines = ["  " + "degree".ljust(head) + " " + " ".join(str(d).rjust(width) for d in degrees)]
    for name in names:
        cells = [str(tables[name][d]) if d in tables[name] else "." for d in degrees]
        lines.append("  " + name.ljust(head) + " " + " ".join(c.rjust(width) for c in cells))
    return lines


def _render_table(r: Report) -> str:
    lo, hi = r.window
    out = [f"scenario {r.scenario}  window [{lo}, {hi}]  version {r.version}", ""]
    for check in r.checks:
        line = f"{check.name} ({check.kind}): {check.verdict}"
        if not check.as_expected:
            line += f"  [expected {check.expected}]"
        out.append(line)
        if check.tables:
            out += _table_lines(check.tables, lo, hi)
        for flag in check.flags:
            out.append(f"  - {flag}")
        out.append("")
    return "\n".join(out).rstrip() + "\n"


def emit_report(r: Report, fmt: str = "json") -> str:
    """Renders a report as deterministic JSON or as aligned text tables."""
    if fmt == "json":
        return r.to_json_schema() + "\n"
    if fmt == "table":
        return _render_table(r)
    raise InputError(f"unknown format '{fmt}', expected one of {', '.join(FORMATS)}")
