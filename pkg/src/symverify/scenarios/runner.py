"""Running scenarios and the builtin suite."""
from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources

from .checks import HANDLERS
from .model import Scenario, ScenarioError, builtin_names, load_scenario
from .report import CheckRecord, VerificationReport

__all__ = ["run_check", "run_scenario", "run_suite", "load_coverage", "validate_coverage", "CoverageError"]


class CoverageError(RuntimeError):
    pass


def run_check(sc: Scenario, c: dict, seed: int) -> CheckRecord:
    expect = c.get("expect", "zero")
    policy = c.get("policy", "must-pass")
    try:
        out = HANDLERS[c["kind"]](sc, c, seed)
    except Exception as exc:  # noqa: BLE001 - a raising check is a result, not a crash
        if expect == "error":
            ok, res, details = True, None, f"raised as expected: {type(exc).__name__}: {exc}"
        else:
            ok, res, details = False, None, f"error: {type(exc).__name__}: {exc}"
    else:
        res, details = out.max_residual, out.details
        if expect == "zero":
            ok = out.holds
        elif expect == "nonzero":
            ok = not out.holds
        else:
            ok = False
            details = "expected an error but none was raised; " + details
    if policy == "report-only":
        verdict = "report-only"
    else:
        verdict = "pass" if ok else "fail"
    return CheckRecord(c["id"], c["kind"], policy, expect, bool(ok), verdict, res, details, seed, c.get("description", ""))


def run_scenario(ref, seed: int | None = None) -> VerificationReport:
    sc = load_scenario(ref)
    seed = sc.seed if seed is None else seed
    t0 = time.perf_counter()
    records = [run_check(sc, c, seed) for c in sc.checks]
    return VerificationReport(sc.name, seed, records, time.perf_counter() - t0)


def load_coverage() -> dict:
    return json.loads(resources.files(__package__).joinpath("coverage.json").read_text())


def validate_coverage(coverage: dict | None = None) -> None:
    """Every claim must point at an existing builtin scenario and check id."""
    coverage = load_coverage() if coverage is None else coverage
    names = set(builtin_names())
    problems = []
    for claim, entry in coverage.items():
        if entry["scenario"] not in names:
            problems.append(f"{claim}: scenario {entry['scenario']!r} missing")
            continue
        ids = {c["id"] for c in load_scenario(entry["scenario"]).checks}
        problems += [f"{claim}: check {i!r} missing from {entry['scenario']}" for i in entry["checks"] if i not in ids]
        if not entry["checks"]:
            problems.append(f"{claim}: no checks listed")
    if problems:
        raise CoverageError("coverage manifest incomplete:\n  " + "\n  ".join(problems))


def _run_named(args):
    name, seed = args
    return run_scenario(name, seed)


def run_suite(names=None, seed: int | None = None, jobs: int = 1) -> list[VerificationReport]:
    validate_coverage()
    names = sorted(names or builtin_names())
    for n in names:
        if n not in builtin_names():
            raise ScenarioError(f"unknown scenario {n!r}")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            reports = list(ex.map(_run_named, [(n, seed) for n in names]))
    else:
        reports = [run_scenario(n, seed) for n in names]
    return sorted(reports, key=lambda r: r.scenario)
