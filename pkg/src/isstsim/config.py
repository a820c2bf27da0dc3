"""Scenario files: YAML documents with a fixed schema and strict validation.

Layout (all times in minutes since opening, rates in arrivals per hour)::

    day:        {open, close, walkin_open, walkin_close}
    arrivals:   {student_general: [8 rates], student_advisory: [...], phone_call: [...]}
    service:
      reception: {distribution: triangular, min, mode, max}
      advisory:  {distribution: exponential, mean}
    resources:  {reception, advisory, split_reception_queues}
    rules:      {stop_numbers_enabled, ..., quick_service: {min, mode, max}}
    mode:       des | hybrid
    scripted_arrivals: [[time, kind], ...]   # optional

Any key outside this layout is rejected with its full dotted path.
"""

from __future__ import annotations

import copy
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml

from isstsim.behavior import BehaviorRuleSet
from isstsim.kernel import ArrivalSchedule, ExponentialParams, TriangularParams
from isstsim.model import ConfigError, ScenarioConfig
from isstsim.queueing import EntityKind

DEFAULT_SCENARIO = "isst-default"

ARRIVAL_KEYS = {
    "student_general": EntityKind.STUDENT_GENERAL,
    "student_advisory": EntityKind.STUDENT_ADVISORY,
    "phone_call": EntityKind.PHONE_CALL,
}
KIND_BY_NAME = {**ARRIVAL_KEYS, **{k.value: k for k in EntityKind}}

_SCHEMA: dict[str, Any] = {
    "day": {"open": float, "close": float, "walkin_open": float, "walkin_close": float},
    "arrivals": {k: list for k in ARRIVAL_KEYS},
    "service": {
        "reception": {"distribution": str, "min": float, "mode": float, "max": float, "mean": float},
        "advisory": {"distribution": str, "min": float, "mode": float, "max": float, "mean": float},
    },
    "resources": {"reception": int, "advisory": int, "split_reception_queues": bool},
    "rules": {
        "stop_numbers_enabled": bool,
        "speedup_enabled": bool,
        "skip_enabled": bool,
        "stop_slack_minutes": float,
        "speedup_factor": float,
        "speedup_close": float,
        "skip_threshold_len": int,
        "quick_enquiry_prob": float,
        "quick_resolves_advisory": bool,
        "quick_service": {"min": float, "mode": float, "max": float},
    },
    "mode": str,
    "scripted_arrivals": list,
}


def _check(doc: Any, schema: Any, path: str) -> None:
    if isinstance(schema, dict):
        if not isinstance(doc, Mapping):
            raise ConfigError(f"{path or '<root>'}: expected a mapping, got {type(doc).__name__}")
        for key, value in doc.items():
            where = f"{path}.{key}" if path else str(key)
            if key not in schema:
                raise ConfigError(f"{where}: unknown key")
            _check(value, schema[key], where)
        return
    if schema is float:
        ok = isinstance(doc, (int, float)) and not isinstance(doc, bool)
    elif schema is int:
        ok = isinstance(doc, int) and not isinstance(doc, bool)
    else:
        ok = isinstance(doc, schema)
    if not ok:
        raise ConfigError(f"{path}: expected {schema.__name__}, got {doc!r}")


def _service(d: Mapping[str, Any], path: str):
    dist = d.get("distribution", "triangular")
    try:
        if dist == "triangular":
            extra = set(d) - {"distribution", "min", "mode", "max"}
            if extra:
                raise ConfigError(f"{path}.{sorted(extra)[0]}: not a triangular parameter")
            return TriangularParams(float(d["min"]), float(d["mode"]), float(d["max"]))
        if dist == "exponential":
            extra = set(d) - {"distribution", "mean"}
            if extra:
                raise ConfigError(f"{path}.{sorted(extra)[0]}: not an exponential parameter")
            return ExponentialParams(float(d["mean"]))
    except KeyError as exc:
        raise ConfigError(f"{path}.{exc.args[0]}: missing") from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None
    raise ConfigError(f"{path}.distribution: expected 'triangular' or 'exponential', got {dist!r}")


def scenario_from_dict(doc: Mapping[str, Any]) -> ScenarioConfig:
    _check(doc, _SCHEMA, "")
    day = doc.get("day", {})
    arrivals = {}
    for key, kind in ARRIVAL_KEYS.items():
        rates = doc.get("arrivals", {}).get(key, [0.0] * 8)
        try:
            arrivals[kind] = ArrivalSchedule(tuple(rates))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"arrivals.{key}: {exc}") from None
    service = doc.get("service", {})
    for name in ("reception", "advisory"):
        if name not in service:
            raise ConfigError(f"service.{name}: missing")

    rules_doc = dict(doc.get("rules", {}))
    if "quick_service" in rules_doc:
        rules_doc["quick_service"] = _service(rules_doc["quick_service"], "rules.quick_service")
    try:
        rules = BehaviorRuleSet(**rules_doc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    scripted = doc.get("scripted_arrivals")
    if scripted is not None:
        parsed = []
        for i, item in enumerate(scripted):
            if not (isinstance(item, (list, tuple)) and len(item) == 2):
                raise ConfigError(f"scripted_arrivals[{i}]: expected [time, kind]")
            t, kind = item
            if kind not in KIND_BY_NAME:
                raise ConfigError(f"scripted_arrivals[{i}]: unknown kind {kind!r}")
            parsed.append((float(t), KIND_BY_NAME[kind]))
        scripted = tuple(parsed)

    res = doc.get("resources", {})
    cfg = ScenarioConfig(
        arrivals=arrivals,
        reception_service=_service(service["reception"], "service.reception"),
        advisory_service=_service(service["advisory"], "service.advisory"),
        rules=rules,
        day_open=float(day.get("open", 0.0)),
        day_close=float(day.get("close", 480.0)),
        walkin_open=float(day.get("walkin_open", 240.0)),
        walkin_close=float(day.get("walkin_close", 420.0)),
        reception_capacity=res.get("reception", 1),
        advisory_capacity=res.get("advisory", 2),
        split_reception_queues=res.get("split_reception_queues", False),
        mode=doc.get("mode", "des"),
        scripted_arrivals=scripted,
    )
    return cfg.validate()


def _service_dict(s) -> dict[str, Any]:
    if isinstance(s, ExponentialParams):
        return {"distribution": "exponential", "mean": s.mean_minutes}
    return {"distribution": "triangular", "min": s.min_minutes, "mode": s.mode_minutes, "max": s.max_minutes}


def scenario_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    r = cfg.rules
    doc: dict[str, Any] = {
        "day": {"open": cfg.day_open, "close": cfg.day_close,
                "walkin_open": cfg.walkin_open, "walkin_close": cfg.walkin_close},
        "arrivals": {key: list(cfg.arrivals[kind].hourly_rates) for key, kind in ARRIVAL_KEYS.items()},
        "service": {"reception": _service_dict(cfg.reception_service),
                    "advisory": _service_dict(cfg.advisory_service)},
        "resources": {"reception": cfg.reception_capacity, "advisory": cfg.advisory_capacity,
                      "split_reception_queues": cfg.split_reception_queues},
        "rules": {
            "stop_numbers_enabled": r.stop_numbers_enabled,
            "speedup_enabled": r.speedup_enabled,
            "skip_enabled": r.skip_enabled,
            "stop_slack_minutes": r.stop_slack_minutes,
            "speedup_factor": r.speedup_factor,
            "speedup_close": r.speedup_close,
            "skip_threshold_len": r.skip_threshold_len,
            "quick_enquiry_prob": r.quick_enquiry_prob,
            "quick_resolves_advisory": r.quick_resolves_advisory,
            "quick_service": {k: v for k, v in _service_dict(r.quick_service).items() if k != "distribution"},
        },
        "mode": cfg.mode,
    }
    if cfg.scripted_arrivals is not None:
        doc["scripted_arrivals"] = [[t, k.value] for t, k in cfg.scripted_arrivals]
    return doc


def apply_overrides(doc: dict[str, Any], overrides: Iterable[str]) -> dict[str, Any]:
    """Apply ``dotted.key=value`` assignments; values are parsed as YAML scalars."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected dotted.key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node_schema: Any = _SCHEMA
        node = doc
        for depth, part in enumerate(parts):
            where = ".".join(parts[: depth + 1])
            if not isinstance(node_schema, dict) or part not in node_schema:
                raise ConfigError(f"{where}: unknown key")
            node_schema = node_schema[part]
            if depth == len(parts) - 1:
                node[part] = yaml.safe_load(raw)
            else:
                node = node.setdefault(part, {})
                if not isinstance(node, dict):
                    raise ConfigError(f"{where}: expected a mapping")
    return doc


def resolve_scenario_path(name_or_path: str | Path) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    if p.suffix == "" and p.parent == Path("."):
        packaged = resources.files("isstsim") / "scenarios" / f"{p.name}.yaml"
        if packaged.is_file():
            return Path(str(packaged))
    raise FileNotFoundError(f"scenario not found: {name_or_path}")


def load_scenario_doc(name_or_path: str | Path) -> dict[str, Any]:
    path = resolve_scenario_path(name_or_path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return doc


def load_scenario(name_or_path: str | Path = DEFAULT_SCENARIO, overrides: Iterable[str] = ()) -> ScenarioConfig:
    doc = apply_overrides(load_scenario_doc(name_or_path), overrides)
    return scenario_from_dict(doc)
