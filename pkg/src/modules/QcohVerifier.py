import asyncio
import logging
import time
from pathlib import Path
from typing import Optional

from src.constants import Report, Scenario, VerifierSettings, load_settings
from .report_emitter import emit_report
from .scenario_parser import build_context, builtin_names, load_builtin, parse_scenario
from .scenario_runner import assemble_report, run_check

logger = logging.getLogger(__name__)


class QcohVerifierClass:
    def __init__(self, settings: Optional[VerifierSettings] = None) -> None:
        self.settings = settings or load_settings()
        self.reports: dict[str, Report] = {}  # scenario name -> last report

    def list_builtins(self) -> list[str]:
        return builtin_names()

    def load_text(self, text: str) -> Scenario:
        """
        Parses scenario text, filling unset fields from the verifier's settings.

        Args:
            text (str): Scenario text in the line-oriented grammar.

        Returns:
            Scenario: The validated scenario.
        """
        return parse_scenario(text, self.settings)

    def load_file(self, path: str) -> Scenario:
        return self.load_text(Path(path).read_text(encoding="utf-8"))

    def load_builtin(self, name: str) -> Scenario:
        """
        Parses one of the scenarios shipped with the package.

        Args:
            name (str): Built-in name, as listed by list_builtins.

        Returns:
            Scenario: The validated scenario.
        """
        return self.load_text(load_builtin(name))

    async def run_scenario(self, scenario: Scenario) -> Report:
        """
        Runs every check of the scenario in its own worker thread.

        Args:
            scenario: A parsed scenario.

        Returns:
            Report: Check results in scenario order.
        """
        started = time.perf_counter()
        logger.info(f"scenario {scenario.name}: {len(scenario.checks)} checks")
        ctx = await asyncio.to_thread(build_context, scenario)

        tasks = [asyncio.to_thread(run_check, ctx, check) for check in scenario.checks]
        results = await asyncio.gather(*tasks)

        report = assemble_report(scenario, list(results))
        self.reports[scenario.name] = report
        logger.info(f"scenario {scenario.name} finished in {time.perf_counter() - started:.2f}s")
        return report

    def render(self, report: Report, fmt: str = "json") -> str:
        """
        Serializes a report.

        Args:
            report (Report): A finished report.
            fmt (str): "json" or "table".

        Returns:
            str: Byte-stable text ending in a newline.
        """
        return emit_report(report, fmt)
