import json
import re
from pathlib import Path

import pytest

from symverify.cli import main
from symverify.scenarios import (
    CoverageError,
    ScenarioError,
    VerificationReport,
    builtin_names,
    load_scenario,
    run_scenario,
    suite_from_json,
    suite_to_json,
    validate_coverage,
)
from symverify.scenarios.runner import load_coverage

ROOT = Path(__file__).resolve().parents[1]


def demo_scenario() -> dict:
    text = (ROOT / "docs" / "scenario_schema.md").read_text()
    block = re.search(r"```json\n(\{\n  \"name\": \"wave-demo\".*?)\n```", text, re.S).group(1)
    return json.loads(block)


def tiny(checks):
    return {
        "name": "tiny",
        "spaces": {"u": {"independent": ["x1", "x2"], "dependent": ["u"]}},
        "equations": {"free": {"text": "diff(u,x1,x2) = 0", "lead": "diff(u,x1,x2)", "space": "u"}},
        "systems": {"free": {"space": "u", "equations": ["free"]}},
        "operators": {"d1": {"coefficients": {"x1": "1", "x2": "0", "u": "0"}}},
        "checks": checks,
    }


def test_builtin_list():
    assert builtin_names() == sorted(
        [
            "backlund-sine-gordon",
            "cond-sym-14d1",
            "eq2-reduction",
            "eq8d-solution",
            "eq9d-reduction",
            "hodograph-17d",
            "lb29d-family",
            "wave19d-invariance",
        ]
    )


def test_schema_violation():
    with pytest.raises(ScenarioError):
        load_scenario({"name": "bad"})
    with pytest.raises(ScenarioError):
        load_scenario(tiny([{"id": "a", "kind": "no-such-kind"}]))


def test_unknown_reference():
    with pytest.raises(ScenarioError) as err:
        load_scenario(tiny([{"id": "a", "kind": "check-symmetry", "operator": "missing", "system": "free"}]))
    assert "missing" in str(err.value)


def test_unknown_builtin():
    with pytest.raises(ScenarioError):
        load_scenario("no-such-scenario")


def test_empty_check_list_passes():
    rep = run_scenario(tiny([]))
    assert rep.status == "pass" and rep.checks == []


def test_policies_and_expectations():
    rep = run_scenario(
        tiny(
            [
                {"id": "sym", "kind": "check-symmetry", "operator": "d1", "system": "free"},
                {"id": "ctl", "kind": "check-symmetry", "operator": "d1", "system": "free", "expect": "nonzero"},
                {"id": "note", "kind": "check-symmetry", "operator": "d1", "system": "free", "expect": "nonzero", "policy": "report-only"},
            ]
        )
    )
    assert [c.verdict for c in rep.checks] == ["pass", "fail", "report-only"]
    assert rep.status == "fail"


def test_expected_error_without_error_fails():
    rep = run_scenario(tiny([{"id": "e", "kind": "check-symmetry", "operator": "d1", "system": "free", "expect": "error"}]))
    assert rep.checks[0].verdict == "fail"


def test_documented_example_runs():
    rep = run_scenario(demo_scenario())
    assert rep.status == "pass"
    assert rep.check("stretch").verdict == "pass" and rep.check("stretch").expect == "nonzero"


def test_report_round_trip():
    rep = run_scenario(demo_scenario())
    again = VerificationReport.from_json(rep.to_json())
    assert again.to_json() == rep.to_json()
    both = suite_from_json(suite_to_json([rep, rep]))
    assert [r.to_json() for r in both] == [rep.to_json()] * 2


def test_report_shape():
    data = json.loads(run_scenario(demo_scenario()).to_json())
    assert data["scenario"] == "wave-demo" and data["status"] == "pass"
    for c in data["checks"]:
        assert {"id", "kind", "verdict", "max_residual", "details", "seed"} <= set(c)
        assert c["verdict"] in ("pass", "fail", "report-only")
        assert c["seed"] == 3


def test_seeded_reports_are_deterministic():
    a = run_scenario("cond-sym-14d1", seed=11).to_json(timing=False)
    b = run_scenario("cond-sym-14d1", seed=11).to_json(timing=False)
    assert a == b
    assert "wall_time" not in json.loads(a)


def test_coverage_manifest_complete():
    validate_coverage()
    cov = load_coverage()
    for name in builtin_names():
        ids = {c["id"] for c in load_scenario(name).checks}
        listed = set().union(*[set(e["checks"]) for e in cov.values() if e["scenario"] == name])
        assert ids <= listed, name


def test_coverage_missing_entry():
    cov = load_coverage()
    claim = next(iter(cov))
    broken = {**cov, claim: {"scenario": cov[claim]["scenario"], "checks": ["not-a-check"]}}
    with pytest.raises(CoverageError):
        validate_coverage(broken)
    with pytest.raises(CoverageError):
        validate_coverage({**cov, "ghost": {"scenario": "nowhere", "checks": ["x"]}})


def test_cli_exit_codes(tmp_path, capsys):
    good = tmp_path / "demo.json"
    good.write_text(json.dumps(demo_scenario()))
    out = tmp_path / "report.json"
    assert main(["verify-solution", "--scenario", str(good), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["status"] == "pass"
    assert main(["reduce", "--scenario", str(good), "--show-steps"]) == 0
    assert "=>" in capsys.readouterr().out

    assert main(["run-suite", "--scenario", "hodograph-17d"]) == 0
    assert main(["reduce", "--scenario", str(tmp_path / "missing.json")]) == 2
    assert main(["run-suite", "--scenario", "nope"]) == 2


def test_cli_failing_scenario(tmp_path):
    data = tiny(
        [{"id": "cs", "kind": "corresponding-system", "equation": "free", "expected": ["diff(v1,x2) = diff(v2,x1)", "diff(v1,x2) = 1"]}]
    )
    p = tmp_path / "t.json"
    p.write_text(json.dumps(data))
    assert main(["reduce", "--scenario", str(p)]) == 1


def test_cli_check_symmetry():
    docs = ROOT / "docs" / "cli"
    assert main(["check-symmetry", "--system", str(docs / "system3.json"), "--operator", str(docs / "operator_Q.json")]) == 0
