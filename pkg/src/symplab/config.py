"""Experiment configuration: flat TOML with dotted keys, strictly validated.

A config names one task, one map family with its parameters, and a section
of task parameters named after the task::

    task = "periodic-search"
    seed = 0
    map.family = "toral-automorphism"
    periodic-search.n = 2
"""
from __future__ import annotations

import copy
import inspect
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError
from .maps import FAMILIES
from .periodic import N_MAX, TOL_HYP, TOL_RES

TOP_LEVEL = {"task", "seed", "output", "map"}

TASKS = {
    "periodic-search": {
        "n": 1, "seed_grid": 32, "tol": 1e-10, "m_max": 0,
        "tol_hyp": TOL_HYP, "tol_res": TOL_RES, "n_max": N_MAX,
    },
    "normal-form": {
        "point": [0.0, 0.0], "k": 1, "tol_hyp": TOL_HYP, "tol_res": TOL_RES,
        "sweep_param": "", "sweep_values": [],
    },
    "grow": {
        "point": [0.0, 0.0], "k": 1, "stability": "unstable", "side": 1,
        "budget": 10.0, "max_gap": 0.01, "max_angle": 0.3,
    },
    "detect-homoclinic": {
        "point": [0.5, 0.0], "k": 1, "side_u": 1, "side_s": 1,
        "budget_u": 100.0, "budget_s": 10.0, "max_gap": 0.01, "max_angle": 0.3, "min_angle": 1e-6,
    },
    "gates": {
        "point": [0.0, 0.0], "k": 1, "eps": 0.0, "rho": 0.05, "side_u": 1, "side_s": 1,
        "budget": 1000.0, "samples": 10_000,
    },
    "ph-check": {
        "starts": [[0.1, 0.2, 0.05, 0.0]], "length": 1000, "n": 100, "r": 2.0, "cone_angle": 0.5235987755982988,
    },
    "perturb-sweep": {
        "point": [0.0, 0.0], "k": 1, "shifts": [0.0, 0.01, 0.05], "radius": 0.0,
        "mode": "hamiltonian-flow", "samples": 1000,
    },
}


@dataclass
class ExperimentConfig:
    task: str
    map: dict
    params: dict
    seed: int = 0
    output: str = ""
    source: str = "<string>"
    raw: dict = field(default_factory=dict)


def parse_value(text):
    """Parse an override value as a TOML literal, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _set_path(table, path, value):
    keys = path.split(".")
    node = table
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {path}: {k} is not a table", path)
    node[keys[-1]] = value


def _check_map(table, path="map"):
    if not isinstance(table, dict) or "family" not in table:
        raise ConfigError("a map table with a family is required", f"{path}.family")
    family = table["family"]
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}; known: {sorted(FAMILIES)}", f"{path}.family")
    if family == "product":
        allowed = {"family", "base_matrix", "fiber"}
        if "fiber" in table:
            _check_map(table["fiber"], f"{path}.fiber")
    else:
        ctor = FAMILIES[family][0]
        allowed = {"family"} | set(inspect.signature(ctor).parameters)
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key for family {family!r}", f"{path}.{key}")


def _check_types(section, params, defaults):
    for key, value in params.items():
        default = defaults[key]
        if isinstance(default, bool) or default is None:
            continue
        if isinstance(default, (int, float)) and not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", f"{section}.{key}")
        if isinstance(default, str) and not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", f"{section}.{key}")
        if isinstance(default, list) and not isinstance(value, list):
            raise ConfigError(f"expected a list, got {value!r}", f"{section}.{key}")


def build_config(raw: dict, source="<string>", overrides=()):
    raw = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value", item)
        key, value = item.split("=", 1)
        _set_path(raw, key.strip(), parse_value(value.strip()))
    if not raw:
        raise ConfigError("empty config", "task")
    task = raw.get("task")
    if task is None:
        raise ConfigError("missing task", "task")
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; known: {sorted(TASKS)}", "task")
    for key in raw:
        if key not in TOP_LEVEL and key != task:
            raise ConfigError("unknown key", key)
    if "map" not in raw:
        raise ConfigError("missing map table", "map")
    _check_map(raw["map"])
    section = raw.get(task, {})
    if not isinstance(section, dict):
        raise ConfigError("task parameters must be a table", task)
    defaults = TASKS[task]
    for key in section:
        if key not in defaults:
            raise ConfigError("unknown key", f"{task}.{key}")
    _check_types(task, section, defaults)
    params = {**copy.deepcopy(defaults), **section}
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer", "seed")
    return ExperimentConfig(task, raw["map"], params, seed, str(raw.get("output", "")), source, raw)


def load_config(path, overrides=()):
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"no such config file: {path}", str(path)) from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"unparseable config: {exc}", str(path)) from exc
    return build_config(raw, str(path), overrides)


def loads_config(text, overrides=()):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"unparseable config: {exc}", "<string>") from exc
    return build_config(raw, "<string>", overrides)
