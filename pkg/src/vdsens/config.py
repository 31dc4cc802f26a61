"""YAML experiment configuration.

Top-level sections: ``model``, ``params``, ``st_params``, ``scenario``,
``integrator``, ``controller``.  Unknown keys are rejected at every level.
Per-wheel parameters may be given as a four-entry list (``r: [...]``) or per
wheel (``r_fl: ...``) in the order fl, fr, rl, rr.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .params import MagicFormulaCoeffs, ParamSet, ParamValidationError, StParams, validate_params, validate_st_params
from .scenario import (
    FaultEvent,
    Reference,
    Scenario,
    ScenarioError,
    circle_scenario,
    steering_step_scenario,
    synth_odd_trajectory,
)
from .sim import ControllerGains, IntegratorConfig

WHEELS = ("fl", "fr", "rl", "rr")
PER_WHEEL = ("J_w", "r", "S")
TOP_KEYS = {"model", "params", "st_params", "scenario", "integrator", "controller"}
SCENARIO_COMMON = {"kind", "duration", "h", "sensitivity", "rear_steering", "name", "faults"}
SCENARIO_EXTRA = {
    "circle": {"radius", "speed"},
    "steering-step": {"speed", "delta_f", "t_step"},
    "odd-synthetic": {"seed", "a_limit"},
    "trajectory-replay": {"reference"},
}
REFERENCE_KEYS = {"t", "v", "kappa", "a_x", "delta_f", "delta_r", "inputs"}
FAULT_KEYS = {"time", "wheel", "kind", "angle"}


class ConfigError(ValueError):
    """Invalid configuration file."""


@dataclass
class Config:
    model: str = "dt"
    params: ParamSet = field(default_factory=ParamSet)
    st_params: StParams | None = None
    scenario: Scenario | None = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    controller: ControllerGains = field(default_factory=ControllerGains)


def _reject_unknown(section: str, data: dict, allowed) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"section '{section}' must be a mapping")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {', '.join(unknown)}")


def _field_names(cls) -> set:
    return {f.name for f in dataclasses.fields(cls)}


def parse_params(data: dict) -> ParamSet:
    data = dict(data or {})
    allowed = _field_names(ParamSet) | {f"{g}_{w}" for g in PER_WHEEL for w in WHEELS}
    _reject_unknown("params", data, allowed)
    for g in PER_WHEEL:
        split = [f"{g}_{w}" for w in WHEELS]
        given = [k for k in split if k in data]
        if given:
            if g in data:
                raise ConfigError(f"'{g}' given both as a list and per wheel")
            base = list(getattr(ParamSet(), g))
            data[g] = tuple(float(data.pop(k)) if k in data else base[i] for i, k in enumerate(split))
    for name in ("tire_lat", "tire_lon"):
        if name in data:
            _reject_unknown(f"params.{name}", data[name], {"B", "C", "D", "E"})
            data[name] = MagicFormulaCoeffs(**{**dataclasses.asdict(getattr(ParamSet(), name)), **data[name]})
    try:
        return validate_params(ParamSet(**data))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParamValidationError):
            raise
        raise ConfigError(f"params: {exc}") from exc


def parse_st_params(data: dict | None) -> StParams | None:
    if data is None:
        return None
    _reject_unknown("st_params", data, _field_names(StParams))
    return validate_st_params(StParams(**data))


def parse_faults(items) -> tuple:
    out = []
    for i, item in enumerate(items or []):
        _reject_unknown(f"scenario.faults[{i}]", item, FAULT_KEYS)
        out.append(FaultEvent(**item))
    return tuple(out)


def parse_scenario(data: dict) -> Scenario:
    if not isinstance(data, dict) or "kind" not in data:
        raise ConfigError("scenario needs a 'kind'")
    kind = data["kind"]
    if kind not in SCENARIO_EXTRA:
        raise ConfigError(f"unknown scenario kind {kind!r}")
    _reject_unknown("scenario", data, SCENARIO_COMMON | SCENARIO_EXTRA[kind])
    common = {k: data[k] for k in ("h", "sensitivity", "rear_steering", "name") if k in data}
    common["faults"] = parse_faults(data.get("faults"))
    duration = float(data.get("duration", 10.0))
    try:
        if kind == "circle":
            sc = circle_scenario(float(data.get("radius", 50.0)), float(data.get("speed", 10.0)), duration, **common)
        elif kind == "steering-step":
            sc = steering_step_scenario(
                float(data.get("speed", 10.0)), float(data.get("delta_f", 0.02)), float(data.get("t_step", 1.0)), duration, **common
            )
        elif kind == "odd-synthetic":
            ref = synth_odd_trajectory(int(data.get("seed", 0)), duration, float(data.get("a_limit", 3.0)))
            sc = Scenario(kind, duration, ref, **common)
        else:
            ref_data = data.get("reference")
            if ref_data is None:
                raise ConfigError("trajectory-replay scenario needs a 'reference'")
            _reject_unknown("scenario.reference", ref_data, REFERENCE_KEYS)
            n = len(ref_data["t"])
            ref_data = {"v": np.zeros(n), "kappa": np.zeros(n), **ref_data}
            sc = Scenario(kind, duration, Reference(**ref_data), **common)
        return sc.validate()
    except ScenarioError as exc:
        raise ConfigError(f"scenario: {exc}") from exc


def load_config(source) -> Config:
    """Parse a YAML file path or an already-loaded mapping.

    Raises:
        ConfigError: on unknown keys or malformed sections.
        ParamValidationError: on parameter invariant violations.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    else:
        data = dict(source)
    _reject_unknown("top level", data, TOP_KEYS)
    cfg = Config()
    cfg.model = data.get("model", "dt")
    if cfg.model not in ("dt", "st"):
        raise ConfigError(f"model must be 'dt' or 'st' (got {cfg.model!r})")
    cfg.params = parse_params(data.get("params"))
    cfg.st_params = parse_st_params(data.get("st_params"))
    if "scenario" in data:
        cfg.scenario = parse_scenario(data["scenario"])
    integ = data.get("integrator", {}) or {}
    _reject_unknown("integrator", integ, _field_names(IntegratorConfig))
    if cfg.scenario is not None:
        integ = {"h": cfg.scenario.h, "sensitivity": cfg.scenario.sensitivity, **integ}
    try:
        cfg.integrator = IntegratorConfig(**integ)
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from exc
    ctrl = data.get("controller", {}) or {}
    _reject_unknown("controller", ctrl, _field_names(ControllerGains))
    cfg.controller = ControllerGains(**ctrl)
    return cfg
