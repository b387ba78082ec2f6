"""Scenario files, check execution and verification reports."""
from .model import Scenario, ScenarioError, builtin_names, load_scenario
from .report import CheckRecord, VerificationReport, suite_from_json, suite_to_json
from .runner import CoverageError, run_check, run_scenario, run_suite, validate_coverage

__all__ = [
    "Scenario",
    "ScenarioError",
    "builtin_names",
    "load_scenario",
    "CheckRecord",
    "VerificationReport",
    "suite_from_json",
    "suite_to_json",
    "CoverageError",
    "run_check",
    "run_scenario",
    "run_suite",
    "validate_coverage",
]
