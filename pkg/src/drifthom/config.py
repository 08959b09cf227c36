"""Scenario configuration: JSON schema with inline defaults, validation and a stable hash."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum

from .closed_form import AnnulusSpec, scalar_radius, stokes_radius
from .errors import ConfigError, DomainError
from .mesh import GradingSpec


class ScenarioKind(str, Enum):
    SCALAR_SMOOTH = "SCALAR_SMOOTH"
    SCALAR_CONCENTRATED = "SCALAR_CONCENTRATED"
    STOKES_SMOOTH = "STOKES_SMOOTH"
    STOKES_CONCENTRATED = "STOKES_CONCENTRATED"
    CELL_Z = "CELL_Z"
    CELL_V = "CELL_V"
    CELL_WSHARP = "CELL_WSHARP"
    MANUFACTURED = "MANUFACTURED"


SCALAR_KINDS = {ScenarioKind.SCALAR_SMOOTH, ScenarioKind.SCALAR_CONCENTRATED, ScenarioKind.CELL_Z}
STOKES_KINDS = {ScenarioKind.STOKES_SMOOTH, ScenarioKind.STOKES_CONCENTRATED, ScenarioKind.CELL_V, ScenarioKind.CELL_WSHARP}

# per-kind defaults; "mesh" holds either {"per_eps": k}, {"n": k} or {"grading": {...}}
DEFAULTS = {
    ScenarioKind.SCALAR_SMOOTH: {"amplitude": 1.0, "mesh": {"per_eps": 16}, "f": "one", "hom_n": 256},
    ScenarioKind.SCALAR_CONCENTRATED: {"mu": 50.0, "R": 0.4, "mesh": {"grading": {}}, "f": "one", "hom_n": 256},
    ScenarioKind.STOKES_SMOOTH: {"amplitude": 1.0, "mesh": {"per_eps": 8}, "f": "rotational", "hom_n": 32},
    ScenarioKind.STOKES_CONCENTRATED: {"gamma": 50.0, "R": 1.0, "mesh": {"grading": {"target_h": 0.1}}, "f": "channel", "hom_n": 32},
    ScenarioKind.CELL_Z: {"mu": 50.0, "R": 0.4, "mesh": {"grading": {"segments": 192}}},
    ScenarioKind.CELL_V: {"gamma": 50.0, "R": 1.0, "mesh": {"grading": {"target_h": 0.05}}},
    ScenarioKind.CELL_WSHARP: {"gamma": 50.0, "R": 1.0, "mesh": {"grading": {"target_h": 0.05}}, "lambda": [1.0, 0.0]},
    ScenarioKind.MANUFACTURED: {"space": "P1", "mesh": {}},
}
COMMON = {"interior_margin": 0.1, "tol": 1e-10}
ALLOWED_KEYS = {"name", "kind", "mu", "gamma", "eps_list", "R", "amplitude", "mesh", "f", "interior_margin", "tol", "hom_n", "lambda", "space"}
SCALAR_PRESETS = {"one", "sinsin"}
STOKES_PRESETS = {"rotational", "channel", "unit_x"}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    kind: ScenarioKind
    eps_list: tuple
    mu: float | None = None
    gamma: float | None = None
    R: float | None = None
    amplitude: float = 1.0
    mesh: dict = field(default_factory=dict)
    f: object = None
    interior_margin: float = 0.1
    tol: float = 1e-10
    hom_n: int = 32
    lam: tuple = (1.0, 0.0)
    space: str = "P1"

    def grading(self) -> GradingSpec:
        return GradingSpec(**self.mesh.get("grading", {}))

    def radius(self, eps: float) -> float:
        if self.kind in (ScenarioKind.SCALAR_CONCENTRATED, ScenarioKind.CELL_Z):
            return scalar_radius(self.mu, eps, self.R)
        if self.kind in (ScenarioKind.STOKES_CONCENTRATED, ScenarioKind.CELL_V, ScenarioKind.CELL_WSHARP):
            return stokes_radius(self.gamma, eps)
        return float("nan")

    def annulus(self, eps: float) -> AnnulusSpec:
        return AnnulusSpec(self.R, self.radius(eps))


def _num(value, path, positive=True):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(path, f"expected a finite number, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(path, f"must be positive, got {value!r}")
    return float(value)


def _check_f(value, path, kind):
    presets = STOKES_PRESETS if kind in STOKES_KINDS else SCALAR_PRESETS
    if isinstance(value, str):
        if value not in presets:
            raise ConfigError(path, f"unknown preset {value!r}; expected one of {sorted(presets)}")
        return value
    if isinstance(value, dict) and set(value) == {"poly"}:
        terms = value["poly"]
        comps = terms if kind in STOKES_KINDS else [terms]
        if kind in STOKES_KINDS and len(comps) != 2:
            raise ConfigError(f"{path}.poly", "need one term list per velocity component")
        for ci, comp in enumerate(comps):
            for ti, term in enumerate(comp):
                tp = f"{path}.poly[{ci}][{ti}]" if kind in STOKES_KINDS else f"{path}.poly[{ti}]"
                if not (isinstance(term, list) and len(term) == 3):
                    raise ConfigError(tp, "terms are [coefficient, power_x, power_y]")
                _num(term[0], tp, positive=False)
                for p in term[1:]:
                    if not isinstance(p, int) or p < 0:
                        raise ConfigError(tp, "powers must be nonnegative integers")
        return value
    raise ConfigError(path, "expected a preset name or {'poly': [...]}")


def _check_mesh(value, path):
    if not isinstance(value, dict):
        raise ConfigError(path, "expected an object")
    extra = set(value) - {"per_eps", "n", "grading"}
    if extra:
        raise ConfigError(f"{path}.{sorted(extra)[0]}", "unknown key")
    for key in ("per_eps", "n"):
        if key in value and (not isinstance(value[key], int) or value[key] < 1):
            raise ConfigError(f"{path}.{key}", "must be a positive integer")
    if "grading" in value:
        g = value["grading"]
        if not isinstance(g, dict):
            raise ConfigError(f"{path}.grading", "expected an object")
        bad = set(g) - {"layers", "ratio", "target_h", "segments"}
        if bad:
            raise ConfigError(f"{path}.grading.{sorted(bad)[0]}", "unknown key")
        try:
            GradingSpec(**g)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}.grading", str(exc)) from exc
    return value


def fill_defaults(doc: dict) -> dict:
    """Copy of the document with every scenario's defaults filled in."""
    doc = copy.deepcopy(doc)
    for sc in doc.get("scenarios", []):
        if isinstance(sc, dict) and sc.get("kind") in ScenarioKind.__members__:
            kind = ScenarioKind(sc["kind"])
            for k, v in {**COMMON, **DEFAULTS[kind]}.items():
                sc.setdefault(k, copy.deepcopy(v))
    doc.setdefault("version", 1)
    return doc


def parse_config(doc: dict) -> list[ScenarioConfig]:
    """Validate a configuration document; raises ConfigError naming the offending field."""
    if not isinstance(doc, dict):
        raise ConfigError("$", "top level must be an object")
    extra = set(doc) - {"version", "scenarios"}
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown key")
    scenarios = doc.get("scenarios")
    if not isinstance(scenarios, list) or not scenarios:
        raise ConfigError("scenarios", "expected a non-empty list")
    doc = fill_defaults(doc)
    out = []
    names = set()
    for i, sc in enumerate(doc["scenarios"]):
        p = f"scenarios[{i}]"
        if not isinstance(sc, dict):
            raise ConfigError(p, "expected an object")
        bad = set(sc) - ALLOWED_KEYS
        if bad:
            raise ConfigError(f"{p}.{sorted(bad)[0]}", "unknown key")
        name = sc.get("name")
        if not isinstance(name, str) or not name or any(c in name for c in "/\\ "):
            raise ConfigError(f"{p}.name", "need a non-empty name without spaces or slashes")
        if name in names:
            raise ConfigError(f"{p}.name", f"duplicate scenario name {name!r}")
        names.add(name)
        if sc.get("kind") not in ScenarioKind.__members__:
            raise ConfigError(f"{p}.kind", f"expected one of {list(ScenarioKind.__members__)}")
        kind = ScenarioKind(sc["kind"])
        eps = sc.get("eps_list")
        if not isinstance(eps, list) or not eps:
            raise ConfigError(f"{p}.eps_list", "expected a non-empty list")
        eps = [_num(e, f"{p}.eps_list[{j}]") for j, e in enumerate(eps)]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError(f"{p}.eps_list", "must be strictly decreasing")
        kw = dict(name=name, kind=kind, eps_list=tuple(eps))
        for key in ("mu", "gamma", "R", "amplitude", "interior_margin", "tol"):
            if key in sc:
                kw[key] = _num(sc[key], f"{p}.{key}")
        if "interior_margin" in kw and not kw["interior_margin"] < 0.5:
            raise ConfigError(f"{p}.interior_margin", "must lie in (0, 0.5)")
        if "hom_n" in sc:
            if not isinstance(sc["hom_n"], int) or sc["hom_n"] < 2:
                raise ConfigError(f"{p}.hom_n", "must be an integer >= 2")
            kw["hom_n"] = sc["hom_n"]
        kw["mesh"] = _check_mesh(sc.get("mesh", {}), f"{p}.mesh")
        if "f" in sc:
            kw["f"] = _check_f(sc["f"], f"{p}.f", kind)
        if "lambda" in sc:
            lam = sc["lambda"]
            if not (isinstance(lam, list) and len(lam) == 2):
                raise ConfigError(f"{p}.lambda", "expected two numbers")
            kw["lam"] = tuple(_num(v, f"{p}.lambda[{j}]", positive=False) for j, v in enumerate(lam))
        if "space" in sc:
            if sc["space"] not in ("P1", "taylor_hood"):
                raise ConfigError(f"{p}.space", "expected 'P1' or 'taylor_hood'")
            kw["space"] = sc["space"]
        cfg = ScenarioConfig(**kw)
        for j, e in enumerate(cfg.eps_list):
            if kind in (ScenarioKind.SCALAR_CONCENTRATED, ScenarioKind.CELL_Z, ScenarioKind.STOKES_CONCENTRATED, ScenarioKind.CELL_V, ScenarioKind.CELL_WSHARP):
                try:
                    cfg.annulus(e)
                except DomainError as exc:
                    raise ConfigError(f"{p}.eps_list[{j}]", f"inadmissible radius: {exc}") from exc
            if kind in (ScenarioKind.SCALAR_CONCENTRATED, ScenarioKind.STOKES_SMOOTH, ScenarioKind.SCALAR_SMOOTH, ScenarioKind.STOKES_CONCENTRATED):
                pitch = 2 * e if kind == ScenarioKind.STOKES_CONCENTRATED else e
                cells = 1.0 / pitch
                if abs(cells - round(cells)) > 1e-9 * cells:
                    raise ConfigError(f"{p}.eps_list[{j}]", "the cell pitch must divide the unit square")
        out.append(cfg)
    return out


def load_config(path) -> tuple[list[ScenarioConfig], dict]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from exc
    return parse_config(doc), fill_defaults(doc)


def config_hash(doc: dict) -> str:
    """sha256 of the canonical (sorted-key, default-filled) JSON form."""
    canon = json.dumps(fill_defaults(doc), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
