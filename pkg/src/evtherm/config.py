"""YAML run configuration: strict parsing, defaults, dotted overrides.

A config file holds up to six sections (plant, actuator, heat_pump,
scenario, controllers, sim); anything omitted falls back to the dataclass
defaults, and any key that does not name a known field is rejected.  The
cabin/battery setpoints live in the scenario and propagate to the
heat-pump law and both MPC layers unless a controller section overrides
them explicitly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .controllers import LowerMpcConfig, RuleConfig, UpperMpcConfig
from .errors import ConfigError
from .plant import ActuatorLimits, HeatPumpLaw, PlantParams
from .scenario import DoorEvent, PassengerEvent, Scenario
from .simulate import SimConfig

TOP_SECTIONS = ("plant", "actuator", "heat_pump", "scenario", "controllers", "sim")
CONTROLLER_SECTIONS = ("upper", "lower", "rule", "air_total")


@dataclass
class RunConfig:
    plant: PlantParams = field(default_factory=PlantParams)
    limits: ActuatorLimits = field(default_factory=ActuatorLimits)
    hp_band: float = 0.5
    scenario: Scenario = field(default_factory=Scenario)
    upper: UpperMpcConfig = field(default_factory=UpperMpcConfig)
    lower: LowerMpcConfig = field(default_factory=LowerMpcConfig)
    rule: RuleConfig = field(default_factory=RuleConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    air_total: float = 0.16

    @property
    def law(self) -> HeatPumpLaw:
        return HeatPumpLaw(t_set_cab=self.scenario.t_set_cab,
                           t_set_bat=self.scenario.t_set_bat, band=self.hp_band)


def _build(cls, section: dict, where: str, **transforms):
    """Instantiate a dataclass from a mapping, rejecting unknown keys."""
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(section) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = dict(section)
    for key, fn in transforms.items():
        if key in kwargs:
            kwargs[key] = fn(kwargs[key])
    try:
        return cls(**kwargs)
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _events(cls, rows, where: str):
    if rows is None:
        return ()
    return tuple(_build(cls, row, f"{where}[{i}]") for i, row in enumerate(rows))


def _profile(rows, where: str):
    try:
        return tuple((float(t), float(v)) for t, v in rows)
    except Exception as exc:
        raise ConfigError(f"{where}: expected [[time, value], ...]") from exc


def parse_config(doc: dict, where: str = "config") -> RunConfig:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: top level must be a mapping")
    unknown = sorted(set(doc) - set(TOP_SECTIONS))
    if unknown:
        raise ConfigError(f"{where}: unknown sections {unknown}")

    plant = _build(PlantParams, doc.get("plant", {}), "plant",
                   a_cb_sec=np.asarray, m_s=np.asarray, m_c_node=np.asarray)
    limits = _build(ActuatorLimits, doc.get("actuator", {}), "actuator")

    hp = doc.get("heat_pump", {})
    if not isinstance(hp, dict) or set(hp) - {"band"}:
        raise ConfigError("heat_pump: only the key 'band' is accepted")
    hp_band = float(hp.get("band", 0.5))

    scenario = _build(
        Scenario, doc.get("scenario", {}), "scenario",
        door_events=lambda rows: _events(DoorEvent, rows, "scenario.door_events"),
        passenger_events=lambda rows: _events(PassengerEvent, rows,
                                              "scenario.passenger_events"),
        t_amb_profile=lambda rows: _profile(rows, "scenario.t_amb_profile"),
        q_sol_profile=lambda rows: _profile(rows, "scenario.q_sol_profile"),
        drive_cycle=lambda rows: _profile(rows, "scenario.drive_cycle"),
    )

    ctrl = doc.get("controllers", {})
    if not isinstance(ctrl, dict):
        raise ConfigError("controllers: expected a mapping")
    unknown = sorted(set(ctrl) - set(CONTROLLER_SECTIONS))
    if unknown:
        raise ConfigError(f"controllers: unknown keys {unknown}")
    upper_doc = dict(ctrl.get("upper", {}))
    lower_doc = dict(ctrl.get("lower", {}))
    upper_doc.setdefault("t_set_c", scenario.t_set_cab)
    upper_doc.setdefault("t_set_b", scenario.t_set_bat)
    lower_doc.setdefault("t_set_c", scenario.t_set_cab)
    upper = _build(UpperMpcConfig, upper_doc, "controllers.upper",
                   t_cab_soft=tuple, t_bat_soft=tuple)
    lower = _build(LowerMpcConfig, lower_doc, "controllers.lower",
                   alpha_sec=tuple)
    rule = _build(RuleConfig, ctrl.get("rule", {}), "controllers.rule",
                  mdot_battery_phase=tuple, mdot_cabin_phase=tuple)
    air_total = float(ctrl.get("air_total", 0.16))

    sim = _build(SimConfig, doc.get("sim", {}), "sim")
    if upper.dt_ctrl != sim.dt_ctrl or lower.dt_ctrl != sim.dt_ctrl:
        raise ConfigError("sim.dt_ctrl must match the controller dt_ctrl values")
    return RunConfig(plant=plant, limits=limits, hp_band=hp_band,
                     scenario=scenario, upper=upper, lower=lower, rule=rule,
                     sim=sim, air_total=air_total)


def load_config(path: str | Path, overrides: list[str] | None = None) -> RunConfig:
    """Parse a YAML config file, optionally applying ``key=value`` overrides."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    doc = doc or {}
    for item in overrides or []:
        doc = apply_override(doc, item)
    return parse_config(doc, where=str(path))


def apply_override(doc: dict, item: str) -> dict:
    """Apply one ``dotted.path=value`` override to a config mapping."""
    if "=" not in item:
        raise ConfigError(f"override {item!r}: expected key=value")
    dotted, raw = item.split("=", 1)
    keys = dotted.strip().split(".")
    if not all(keys):
        raise ConfigError(f"override {item!r}: empty key component")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {item!r}: bad value: {exc}") from exc
    node = doc
    for key in keys[:-1]:
        nxt = node.get(key)
        if nxt is None:
            nxt = node[key] = {}
        elif not isinstance(nxt, dict):
            raise ConfigError(f"override {item!r}: {key} is not a section")
        node = nxt
    node[keys[-1]] = value
    return doc


def reference_config() -> RunConfig:
    """The benchmark drive: 1800 s at -7 degC, door and boarding at 600 s."""
    return parse_config(reference_config_dict(), where="reference")


def reference_config_dict() -> dict:
    return {
        "scenario": {
            "duration": 1800.0,
            "t_amb_profile": [[0.0, -7.0]],
            "t_set_cab": 23.0,
            "t_set_bat": 20.0,
            "door_events": [{"t_open": 600.0, "duration": 10.0, "section": 4}],
            "passenger_events": [{"t_board": 600.0, "section": 4,
                                  "q_occ_person": 60.0}],
            "drive_cycle": [[0.0, 0.0], [60.0, 15000.0], [120.0, 8000.0],
                            [300.0, 12000.0], [600.0, 6000.0], [900.0, 14000.0],
                            [1200.0, 7000.0], [1500.0, 10000.0],
                            [1800.0, 5000.0]],
        },
    }
