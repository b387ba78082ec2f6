"""Command-line interface: ``symverify run-suite | check-symmetry | reduce | verify-solution``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .expr import parse, to_text
from .jet import Equation, EquationSystem, JetSpace
from .reduction import apply_ansatz
from .sampling import SamplingConfig
from .scenarios import ScenarioError, VerificationReport, load_scenario, run_check, run_suite, suite_to_json
from .scenarios.runner import CoverageError
from .symmetry import VectorField, check_conditional_symmetry, check_symmetry

REDUCE_KINDS = {"corresponding-system", "implicit-derivative", "reduce-and-compare", "compatibility", "hodograph"}
SOLUTION_KINDS = {"verify-solution", "backlund"}


def _emit(reports: list[VerificationReport], out: str | None) -> int:
    for r in reports:
        print(r.summary())
    if out:
        text = reports[0].to_json() if len(reports) == 1 else suite_to_json(reports)
        Path(out).write_text(text + "\n")
    return 0 if all(r.passed for r in reports) else 1


def _subset(ref: str, kinds: set, seed: int | None) -> VerificationReport:
    import time

    sc = load_scenario(ref)
    seed = sc.seed if seed is None else seed
    t0 = time.perf_counter()
    records = [run_check(sc, c, seed) for c in sc.checks if c["kind"] in kinds]
    return VerificationReport(sc.name, seed, records, time.perf_counter() - t0)


def cmd_run_suite(args) -> int:
    reports = run_suite(args.scenario or None, args.seed, args.jobs)
    return _emit(reports, args.out)


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def cmd_check_symmetry(args) -> int:
    sys_data = _read_json(args.system)
    op_data = _read_json(args.operator)
    fns = {**sys_data.get("functions", {}), **op_data.get("functions", {})}
    space = JetSpace(tuple(sys_data["independent"]), tuple(sys_data["dependent"]))
    eqs = []
    for e in sys_data["equations"]:
        eqs.append(Equation.from_text(e["text"], fns, lead=e.get("lead")))
    system = EquationSystem(tuple(eqs), space)
    if "coefficients" in op_data:
        vf = VectorField.from_text(op_data["coefficients"], fns)
    else:
        vf = VectorField(characteristics={k: parse(v, fns) for k, v in op_data["characteristic"].items()})
    params = {k: v for k, v in sys_data.get("parameters", {}).items()}
    boxes = {k: tuple(v) for k, v in sys_data.get("boxes", {}).items()}
    config = SamplingConfig(parameters=params, boxes=boxes, seed=args.seed)
    check = check_conditional_symmetry if args.conditional else check_symmetry
    rep = check(vf, system, config)
    print(rep.describe())
    return 0 if rep.passed else 1


def cmd_reduce(args) -> int:
    report = _subset(args.scenario, REDUCE_KINDS, args.seed)
    if args.show_steps:
        sc = load_scenario(args.scenario)
        for c in sc.checks:
            if c["kind"] != "reduce-and-compare":
                continue
            target = sc.system(c["system"]) if "system" in c else sc.equation(c["equation"])
            red = apply_ansatz(target, sc.ansatz(c["ansatz"]))
            print(f"{c['id']}:")
            for step in red.steps:
                print(f"  {step}")
            for eq in red.equations:
                print(f"  => {to_text(eq)} = 0")
    return _emit([report], args.out)


def cmd_verify_solution(args) -> int:
    return _emit([_subset(args.scenario, SOLUTION_KINDS, args.seed)], args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symverify", description="Verify symmetry reductions of PDEs.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run-suite", help="run builtin scenarios")
    s.add_argument("--scenario", action="append", help="builtin scenario name (repeatable; default all)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="write the report JSON here")
    s.add_argument("--jobs", type=int, default=1, help="parallel scenario processes")
    s.set_defaults(func=cmd_run_suite)

    s = sub.add_parser("check-symmetry", help="check one operator against one system")
    s.add_argument("--system", required=True, help="JSON: independent, dependent, equations, functions, parameters")
    s.add_argument("--operator", required=True, help="JSON: coefficients or characteristic")
    s.add_argument("--conditional", action="store_true", help="add the invariant-surface conditions")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_check_symmetry)

    s = sub.add_parser("reduce", help="run the reduction checks of a scenario")
    s.add_argument("--scenario", required=True, help="scenario file or builtin name")
    s.add_argument("--show-steps", action="store_true")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("verify-solution", help="run the solution checks of a scenario")
    s.add_argument("--scenario", required=True, help="scenario file or builtin name")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_verify_solution)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, CoverageError, KeyError, ValueError) as exc:
        print(f"symverify: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
