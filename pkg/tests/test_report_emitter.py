import json

import pytest

from src.constants import VERSION, CheckResult, Report
from src.modules.errors import InputError
from src.modules.report_emitter import emit_report


@pytest.fixture
def report():
    checks = [
        CheckResult(name="h1-O", kind="h1", tables={"H1(W,O)": {0: 0, -2: 1, -1: 0}},
                    flags=["cap-stabilized:5", "nonzero-at:-2"], verdict="nonzero-h1", expected="nonzero-h1"),
        CheckResult(name="overlap", kind="overlap", flags=["overlap:unknown"], verdict="computed",
                    expected="exact"),
    ]
    return Report(scenario="demo", window=(-2, 0), checks=checks, version=VERSION)


def test_json_layout(report):
    text = emit_report(report, "json")
    assert text.endswith("\n")
    data = json.loads(text)
    assert list(data) == ["scenario", "window", "checks", "version"]
    assert data["window"] == [-2, 0]
    first = data["checks"][0]
    assert list(first) == ["name", "tables", "flags", "verdict"]
    assert list(first["tables"]["H1(W,O)"]) == ["-2", "-1", "0"]
    assert data["checks"][1]["tables"] == {}


def test_json_leaves_out_expectations(report):
    assert "expected" not in emit_report(report, "json")


def test_table_layout(report):
    text = emit_report(report, "table")
    lines = text.splitlines()
    assert lines[0] == f"scenario demo  window [-2, 0]  version {VERSION}"
    assert "h1-O (h1): nonzero-h1" in lines
    assert "overlap (overlap): computed  [expected exact]" in lines
    assert "  - nonzero-at:-2" in lines
    header = next(line for line in lines if line.strip().startswith("degree"))
    assert header.split()[1:] == ["-2", "-1", "0"]
    row = next(line for line in lines if line.strip().startswith("H1(W,O)"))
    assert row.split()[1:] == ["1", "0", "0"]


def test_missing_degrees_print_as_dots():
    check = CheckResult(name="c", kind="sections", tables={"G": {1: 2}}, verdict="computed")
    text = emit_report(Report(scenario="s", window=(0, 1), checks=[check], version=VERSION), "table")
    row = next(line for line in text.splitlines() if line.strip().startswith("G"))
    assert row.split()[1:] == [".", "2"]


def test_unknown_format(report):
    with pytest.raises(InputError):
        emit_report(report, "yaml")
