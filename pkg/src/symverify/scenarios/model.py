"""Scenario files: schema validation, reference checks and object construction."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema

from ..expr import parse, symbol
from ..jet import Equation, EquationSystem, JetSpace
from ..reduction import Ansatz
from ..sampling import SamplingConfig
from ..symmetry import VectorField

__all__ = ["Scenario", "ScenarioError", "load_scenario", "builtin_names", "builtin_path", "SCHEMA"]


class ScenarioError(ValueError):
    pass


SCHEMA = json.loads(resources.files(__package__).joinpath("schema.json").read_text())
_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)

# entity references a check may carry, and the section each must name
_REFS = {
    "operator": "operators",
    "left": "operators",
    "right": "operators",
    "expected_operator": "operators",
    "system": "systems",
    "equation": "equations",
    "ansatz": "ansatze",
    "space": "spaces",
}


class Scenario:
    def __init__(self, data: dict, source: str = "<memory>"):
        errors = sorted(_VALIDATOR.iter_errors(data), key=lambda e: list(e.path))
        if errors:
            e = errors[0]
            where = "/".join(str(p) for p in e.path) or "<root>"
            raise ScenarioError(f"{source}: schema violation at {where}: {e.message}")
        self.data = data
        self.source = source
        self._check_references()

    @property
    def name(self) -> str:
        return self.data["name"]

    @property
    def seed(self) -> int:
        return int(self.data.get("seed", 0))

    @property
    def checks(self) -> list[dict]:
        return self.data["checks"]

    @property
    def functions(self) -> dict[str, int]:
        return dict(self.data.get("functions", {}))

    def _check_references(self):
        d = self.data
        ids = [c["id"] for c in d["checks"]]
        if len(set(ids)) != len(ids):
            raise ScenarioError(f"{self.source}: duplicate check ids")
        for sec in ("equations", "systems", "ansatze"):
            for name, item in d.get(sec, {}).items():
                if item["space"] not in d.get("spaces", {}):
                    raise ScenarioError(f"{self.source}: {sec}/{name} names unknown space {item['space']!r}")
        for name, sys_ in d.get("systems", {}).items():
            for eq in sys_["equations"]:
                if eq not in d.get("equations", {}):
                    raise ScenarioError(f"{self.source}: system {name} names unknown equation {eq!r}")
        for c in d["checks"]:
            for key, sec in _REFS.items():
                if key in c and c[key] not in d.get(sec, {}):
                    raise ScenarioError(f"{self.source}: check {c['id']} names unknown {key} {c[key]!r}")
        # every expression must parse with the declared functions
        for sec in ("equations",):
            for name, item in d.get(sec, {}).items():
                try:
                    self.equation(name)
                except Exception as exc:  # noqa: BLE001 - reported as a schema problem
                    raise ScenarioError(f"{self.source}: equation {name}: {exc}") from exc

    def parse(self, text: str, extra: dict | None = None):
        fns = self.functions
        if extra:
            fns.update(extra)
        return parse(text, fns)

    def space(self, name: str) -> JetSpace:
        s = self.data["spaces"][name]
        return JetSpace(tuple(s["independent"]), tuple(s["dependent"]))

    def equation(self, name: str) -> Equation:
        e = self.data["equations"][name]
        text = e["text"]
        if "=" in text:
            lhs, rhs = text.split("=", 1)
            residual = self.parse(lhs) - self.parse(rhs)
        else:
            residual = self.parse(text)
        from ..expr import canonical

        eq = Equation(canonical(residual), name=name)
        if "lead" in e:
            eq = eq.solved_for(e["lead"])
        return eq

    def equation_space(self, name: str) -> JetSpace:
        return self.space(self.data["equations"][name]["space"])

    def system(self, name: str) -> EquationSystem:
        s = self.data["systems"][name]
        return EquationSystem(tuple(self.equation(e) for e in s["equations"]), self.space(s["space"]), name)

    def operator(self, name: str) -> VectorField:
        o = self.data["operators"][name]
        if "coefficients" in o:
            return VectorField({symbol(k): self.parse(v) for k, v in o["coefficients"].items()}, name=name)
        return VectorField(characteristics={k: self.parse(v) for k, v in o["characteristic"].items()}, name=name)

    def ansatz(self, name: str) -> Ansatz:
        a = self.data["ansatze"][name]
        fns = {u: self.functions[u] for u in a["unknowns"]}
        return Ansatz(
            a["kind"],
            self.space(a["space"]),
            {k: self.parse(v) for k, v in a["prescriptions"].items()},
            fns,
            variable=a.get("variable"),
            invariants={k: self.parse(v) for k, v in a.get("invariants", {}).items()},
            directions=a.get("directions", {}),
            basis=tuple(self.parse(b) for b in a.get("basis", ["1"])),
            arguments=tuple(a.get("arguments", ())),
        )

    def sampling(self, check: dict, seed: int) -> SamplingConfig:
        params = {k: v["samples"] for k, v in self.data.get("parameters", {}).items() if "samples" in v}
        s = check.get("sampling", {})
        params.update(s.get("parameters", {}))
        kw = {"seed": seed, "parameters": params}
        if "samples" in s:
            kw["samples"] = s["samples"]
        if "tolerance" in s:
            kw["tolerance"] = s["tolerance"]
        if "box" in s:
            kw["box"] = tuple(s["box"])
        if "boxes" in s:
            kw["boxes"] = {k: tuple(v) for k, v in s["boxes"].items()}
        if "cross_check" in s:
            kw["cross_check"] = s["cross_check"]
        return SamplingConfig(**kw)


def builtin_path(name: str):
    return resources.files(__package__).joinpath("builtin", f"{name}.json")


def builtin_names() -> list[str]:
    root = resources.files(__package__).joinpath("builtin")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(ref) -> Scenario:
    """Scenario from a dict, a JSON file path, or a builtin name."""
    if isinstance(ref, Scenario):
        return ref
    if isinstance(ref, dict):
        return Scenario(ref)
    p = Path(str(ref))
    if p.suffix == ".json" or p.exists():
        if not p.exists():
            raise ScenarioError(f"scenario file {p} not found")
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{p}: invalid JSON: {exc}") from exc
        return Scenario(data, str(p))
    if str(ref) in builtin_names():
        return Scenario(json.loads(builtin_path(str(ref)).read_text()), f"builtin:{ref}")
    raise ScenarioError(f"unknown scenario {ref!r}; builtin scenarios: {', '.join(builtin_names())}")
