"""Verification reports and their JSON form."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

__all__ = ["CheckRecord", "VerificationReport", "suite_to_json", "suite_from_json"]


@dataclass
class CheckRecord:
    id: str
    kind: str
    policy: str
    expect: str
    passed: bool
    verdict: str  # pass, fail or report-only
    max_residual: float | None
    details: str
    seed: int = 0
    description: str = ""

    def line(self) -> str:
        res = "-" if self.max_residual is None else f"{self.max_residual:.3g}"
        return f"  [{self.verdict:>11}] {self.id} ({self.kind}, max residual {res}): {self.details}"


@dataclass
class VerificationReport:
    scenario: str
    seed: int
    checks: list[CheckRecord] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def status(self) -> str:
        return "pass" if all(c.passed for c in self.checks if c.policy == "must-pass") else "fail"

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def check(self, check_id: str) -> CheckRecord:
        for c in self.checks:
            if c.id == check_id:
                return c
        raise KeyError(check_id)

    def to_dict(self, timing: bool = True) -> dict:
        d = {"scenario": self.scenario, "seed": self.seed, "status": self.status, "checks": [asdict(c) for c in self.checks]}
        if timing:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        return cls(d["scenario"], d["seed"], [CheckRecord(**c) for c in d["checks"]], d.get("wall_time", 0.0))

    @classmethod
    def from_json(cls, text: str) -> "VerificationReport":
        return cls.from_dict(json.loads(text))

    def summary(self) -> str:
        head = f"{self.scenario}: {self.status.upper()} ({sum(c.passed for c in self.checks)}/{len(self.checks)} checks, {self.wall_time:.1f}s)"
        return "\n".join([head] + [c.line() for c in self.checks])


def suite_to_json(reports, timing: bool = True) -> str:
    return json.dumps([r.to_dict(timing) for r in reports], indent=2, sort_keys=True)


def suite_from_json(text: str) -> list[VerificationReport]:
    return [VerificationReport.from_dict(d) for d in json.loads(text)]
