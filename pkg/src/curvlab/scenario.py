"""Scenario files: JSON documents describing a domain or an exterior plus run settings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from . import dsl
from . import riemann as rg
from .domain import DomainError, PolytopeDomain
from .exterior import ExteriorError, RotSymExterior
from .morrey import MorreyConfig

DEFAULT_TOLERANCES = {
    "surface_residual": 1e-10,
    "cross_check": 1e-8,
    "finite_difference": 1e-5,
    "proposition": 1e-8,
    "regular_value": 1e-6,
    "matching_angle": 1e-10,
    "mc_comparison": 1e-10,
    "mean_convexity": 1e-10,
    "scalar_curvature": 1e-8,
    "lemma_comparison": 1e-8,
    "active_set": 1e-9,
}


class ScenarioError(ValueError):
    """Schema violation or unparsable expression, naming the offending field."""


@dataclass
class Scenario:
    name: str
    kind: str
    raw: dict
    tolerances: dict
    domain: PolytopeDomain | None = None
    exterior: RotSymExterior | None = None
    morrey: MorreyConfig | None = None
    boundary_samples: int = 256
    grid: int = 64
    params: dict = field(default_factory=dict)


def _schema():
    return json.loads(resources.files("curvlab").joinpath("schema.json").read_text())


def _path(err) -> str:
    out = ""
    for p in err.absolute_path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _parse(text, n, where, params, var_names=None):
    try:
        return dsl.parse(text, n, params=params, var_names=var_names)
    except dsl.ParseError as e:
        head, _, detail = e.message.partition(": ")
        extra = f"{detail}, offset {e.offset}" if detail else f"offset {e.offset}"
        raise ScenarioError(f"{head} at {where} ({extra})") from e


def shipped(name: str) -> Path:
    """Path of a scenario file shipped with the package."""
    p = resources.files("curvlab").joinpath("scenarios", f"{name}.json")
    if not p.is_file():
        raise ScenarioError(f"no shipped scenario named {name!r}")
    return Path(str(p))


def shipped_names() -> list[str]:
    folder = resources.files("curvlab").joinpath("scenarios")
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file() and not path.suffix:
        path = shipped(str(path))
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ScenarioError(f"scenario file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ScenarioError(f"invalid JSON in {path}: {e.msg} at line {e.lineno}") from e
    return build_scenario(raw)


def build_scenario(raw: dict) -> Scenario:
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: (len(list(e.absolute_path)), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        raise ScenarioError(f"{_path(err)}: {err.message}")
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(raw.get("tolerances", {}))
    params = {k: float(v) for k, v in raw.get("parameters", {}).items()}
    sc = Scenario(raw["name"], raw["kind"], raw, tol, params=params)
    if raw["kind"] == "exterior":
        phi = _parse(raw["phi"], 1, "phi", set(params), ("s",))
        try:
            sc.exterior = RotSymExterior(phi, float(raw["s0"]), raw.get("s_max"), params)
        except ExteriorError as e:
            raise ScenarioError(f"s0/s_max: {e}") from e
        sc.grid = int(raw.get("grid", 64))
        return sc

    n = int(raw["dimension"])
    faces = tuple(_parse(t, n, f"defining_functions[{i}]", set(params)) for i, t in enumerate(raw["defining_functions"]))
    metric = raw.get("metric", "identity")
    if metric == "identity":
        field_ = rg.MetricField.euclidean(n)
    elif "conformal" in metric:
        field_ = rg.MetricField.conformal(_parse(metric["conformal"], n, "metric.conformal", set(params)), n, params)
    else:
        rows = metric["entries"]
        if len(rows) != n:
            raise ScenarioError(f"metric.entries: needs {n} rows, got {len(rows)}")
        nodes = []
        for i, row in enumerate(rows):
            if len(row) not in (n, n - i):
                raise ScenarioError(f"metric.entries[{i}]: needs {n - i} upper-triangular or {n} entries")
            off = i if len(row) == n else 0
            nodes.append(
                [_parse(t, n, f"metric.entries[{i}][{j}]", set(params)) for j, t in enumerate(row) if j >= off]
            )
        field_ = rg.MetricField(n, tuple(tuple(r) for r in nodes), params)
    seed = raw["seed"]
    if len(seed) != n:
        raise ScenarioError(f"seed: needs {n} coordinates, got {len(seed)}")
    try:
        sc.domain = PolytopeDomain(
            n, faces, field_, seed, params, tau_act=tol["active_set"], t_max=float(raw.get("t_max", 10.0))
        )
    except DomainError as e:
        raise ScenarioError(f"seed: {e}") from e
    m = raw.get("morrey", {})
    try:
        sc.morrey = MorreyConfig(
            sigma=float(m.get("sigma", 1.0)),
            radii=tuple(m.get("radii", ())),
            lambdas=tuple(raw.get("lambdas", (50.0, 100.0, 200.0, 400.0))),
            rays=int(raw.get("rays", 2**14)),
            weights=raw.get("weights", "g"),
        )
    except ValueError as e:
        raise ScenarioError(f"morrey: {e}") from e
    sc.boundary_samples = int(raw.get("boundary_samples", 256))
    return sc
