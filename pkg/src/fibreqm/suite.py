"""Suite orchestration: run many scenario configs and aggregate the verdicts."""

from __future__ import annotations

import json
import time
from pathlib import Path as FsPath
from typing import List, Sequence

from .checks import run_scenario
from .report import SuiteReport
from .scenario import ConfigError, ScenarioConfig, load_catalog, load_scenario

__all__ = ["resolve_suite_inputs", "run_configs", "run_suite"]


def resolve_suite_inputs(target) -> List[ScenarioConfig]:
    """Resolve a suite target: 'catalog', a directory, or a manifest file.

    A manifest is a JSON object {"scenarios": [<config path>, ...]} with paths
    relative to the manifest; a directory means every *.json file in it in
    sorted order.
    """
    if target == "catalog":
        return load_catalog()
    path = FsPath(target)
    if path.is_dir():
        return [load_scenario(p) for p in sorted(path.glob("*.json"))]
    if path.is_file():
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
        if not isinstance(raw, dict) or "scenarios" not in raw:
            raise ConfigError(f"{path}: manifest must be an object with a 'scenarios' list")
        entries = raw["scenarios"]
        if not isinstance(entries, list):
            raise ConfigError(f"{path}: 'scenarios' must be a list of config paths")
        return [load_scenario(path.parent / entry) for entry in entries]
    raise ConfigError(f"{target}: not a directory, manifest file, or 'catalog'")


def run_configs(configs: Sequence[ScenarioConfig]) -> SuiteReport:
    """Run scenarios in order; isolation means order never affects records."""
    started = time.perf_counter()
    warnings = []
    if not configs:
        warnings.append("suite is empty; overall pass is vacuous")
    reports = [run_scenario(cfg) for cfg in configs]
    return SuiteReport(reports, warnings, time.perf_counter() - started)


def run_suite(target) -> SuiteReport:
    """Resolve a suite target and run every scenario in it."""
    return run_configs(resolve_suite_inputs(target))
