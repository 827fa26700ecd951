import json

from app import EXIT_INCONCLUSIVE, EXIT_INPUT, EXIT_MISMATCH, EXIT_OK, exit_code, main
from src.constants import VERSION, CheckResult, Report

SCENARIO = """
[scenario]
name = cli
[scheme]
cover = x; y
[module C]
generators = 0
relations = y
[check h1 h1-C]
module = C
[window]
lo = -2
hi = 1
[expect]
h1-C = {verdict}
"""


def _write(tmp_path, verdict="zero-h1-in-window"):
    path = tmp_path / "cli.scenario"
    path.write_text(SCENARIO.format(verdict=verdict), encoding="utf-8")
    return str(path)


def test_builtin_run(capsys):
    assert main(["builtin", "h1-punctured", "--window", "-4:0"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["scenario"] == "h1-punctured"
    assert data["window"] == [-4, 0]
    assert data["version"] == VERSION


def test_list(capsys):
    assert main(["list"]) == EXIT_OK
    names = capsys.readouterr().out.split()
    assert "double-origin-flat" in names
    assert len(names) == 6


def test_run_file_as_table(tmp_path, capsys):
    assert main(["run", _write(tmp_path), "--format", "table"]) == EXIT_OK
    assert "h1-C (h1): zero-h1-in-window" in capsys.readouterr().out


def test_out_file(tmp_path):
    out = tmp_path / "report.json"
    assert main(["run", _write(tmp_path), "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text(encoding="utf-8"))["checks"][0]["name"] == "h1-C"


def test_mismatch(tmp_path):
    assert main(["run", _write(tmp_path, "nonzero-h1")]) == EXIT_MISMATCH


def test_inconclusive(monkeypatch):
    monkeypatch.setenv("QCV_CAP_ESCALATIONS", "1")
    assert main(["builtin", "h1-punctured", "--window", "-3:1", "--den-cap", "1"]) == EXIT_INCONCLUSIVE


def test_input_errors(tmp_path):
    assert main(["run", str(tmp_path / "missing.scenario")]) == EXIT_INPUT
    assert main(["run", _write(tmp_path), "--window", "3:1"]) == EXIT_INPUT
    assert main(["run", _write(tmp_path), "--field", "Fp:9"]) == EXIT_INPUT
    assert main(["run", _write(tmp_path), "--den-cap", "-1"]) == EXIT_INPUT
    assert main(["builtin", "nope"]) == EXIT_INPUT


def test_sequence_that_is_not_a_complex(tmp_path, capsys):
    path = tmp_path / "not-a-complex.scenario"
    path.write_text(
        "[scheme]\ncover = x; y\n"
        "[module A]\ngenerators = 1\n"
        "[module C]\ngenerators = 0\nrelations = y\n"
        "[map x: A -> O]\nimages = x\n"
        "[map q: O -> C]\nimages = 1\n"
        "[sheaf At]\nmodule = A\n"
        "[sheaf Ct]\nmodule = C\n"
        "[check star-sequence s]\nsheaves = At, O, Ct\nmaps = x, q\n",
        encoding="utf-8",
    )
    assert main(["run", str(path)]) == EXIT_INPUT
    assert capsys.readouterr().out == ""


def test_prime_field_override():
    assert main(["builtin", "sections-star", "--window", "-2:1", "--field", "Fp:7"]) == EXIT_OK


def test_exit_code_precedence():
    def report(*pairs):
        checks = [CheckResult(name=f"c{i}", kind="h1", verdict=v, expected=e) for i, (v, e) in enumerate(pairs)]
        return Report(scenario="s", window=(0, 0), checks=checks, version=VERSION)

    assert exit_code(report(("exact", "exact"))) == EXIT_OK
    assert exit_code(report(("exact", None))) == EXIT_OK
    assert exit_code(report(("exact", "not-exact"))) == EXIT_MISMATCH
    assert exit_code(report(("exact", "not-exact"), ("inconclusive", None))) == EXIT_INCONCLUSIVE
