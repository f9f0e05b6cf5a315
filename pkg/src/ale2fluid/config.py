"""Run configuration: `key = value` text files with per-scenario defaults."""

import math
from dataclasses import dataclass, field
from pathlib import Path

from .params import PhysicalParams, SchemeConfig


class ConfigError(ValueError):
    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(message + (f" [{', '.join(where)}]" if where else ""))


SCENARIOS = ("gravity_relaxation", "couette_gnbc", "gcl_suite")

# key -> (type, default factory per scenario or shared constant)
_SHARED_DEFAULTS = {
    "motion_scheme": "M1",
    "gravity_domain": "next",
    "solver": "direct",
    "gmres_tol": 1e-10,
    "gmres_restart": 50,
    "gmres_max_iter": 2000,
    "m2_relaxation": 0.7,
    "m2_tol": 1e-8,
    "m2_max_iter": 50,
    "n_min": 0.1,
    "quad_volume": 5,
    "quad_edge": 5,
    "snapshot_every": 0,
    "out": None,
    "csv_path": None,
    "seed": 7,
    "trials": 20,
}

_SCENARIO_DEFAULTS = {
    "gravity_relaxation": {
        "nx": 40, "ny": 20, "dt": 0.025, "end_time": 3.0,
        "rho1": 1.0, "rho2": 0.91, "eta1": 0.01, "eta2": 0.0091,
        "g": 100.0, "gamma": 0.0, "beta1": 0.0, "beta2": 0.0,
        "theta_s": math.pi / 2, "u_b_top": 0.0, "u_b_bottom": 0.0,
        "H": None, "L": None, "V": None,
    },
    "couette_gnbc": {
        "nx": 64, "ny": 8, "dt": 0.5, "end_time": 160.0,
        "rho1": 0.81, "rho2": 0.81, "eta1": 1.95, "eta2": 1.95,
        "g": 0.0, "gamma": 5.5, "beta1": 1.5, "beta2": 1.5,
        "theta_s": math.pi / 2, "H": 13.6, "L": 27.2, "V": 0.25,
        "u_b_top": None, "u_b_bottom": None,
    },
    "gcl_suite": {
        "nx": 40, "ny": 20, "dt": 0.025, "end_time": 1.0,
        "rho1": 1.0, "rho2": 0.91, "eta1": 0.01, "eta2": 0.0091,
        "g": 100.0, "gamma": 0.0, "beta1": 0.0, "beta2": 0.0,
        "theta_s": math.pi / 2, "u_b_top": 0.0, "u_b_bottom": 0.0,
        "H": None, "L": None, "V": None,
    },
}

_TYPES = {
    "scenario": str, "motion_scheme": str, "gravity_domain": str, "solver": str,
    "out": str, "csv_path": str,
    "nx": int, "ny": int, "snapshot_every": int, "gmres_restart": int,
    "gmres_max_iter": int, "m2_max_iter": int, "quad_volume": int,
    "quad_edge": int, "seed": int, "trials": int,
    "dt": float, "end_time": float, "rho1": float, "rho2": float,
    "eta1": float, "eta2": float, "g": float, "gamma": float,
    "beta1": float, "beta2": float, "theta_s": float, "H": float, "L": float,
    "V": float, "u_b_top": float, "u_b_bottom": float,
    "gmres_tol": float, "m2_relaxation": float, "m2_tol": float, "n_min": float,
}


@dataclass
class RunConfig:
    scenario: str
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name)

    @property
    def physical(self):
        v = self.values
        u_b = {"top": v["u_b_top"], "bottom": v["u_b_bottom"]}
        return PhysicalParams(
            rho1=v["rho1"], rho2=v["rho2"], eta1=v["eta1"], eta2=v["eta2"],
            gamma=v["gamma"], beta1=v["beta1"], beta2=v["beta2"],
            theta_s=v["theta_s"], g=v["g"], u_b=u_b)

    @property
    def scheme(self):
        v = self.values
        return SchemeConfig(
            motion_scheme=v["motion_scheme"], gravity_domain=v["gravity_domain"],
            dt=v["dt"], motion_axis=0 if self.scenario == "couette_gnbc" else 1,
            m2_relaxation=v["m2_relaxation"], m2_tol=v["m2_tol"],
            m2_max_iter=v["m2_max_iter"], solver=v["solver"],
            gmres_tol=v["gmres_tol"], gmres_restart=v["gmres_restart"],
            gmres_max_iter=v["gmres_max_iter"], n_min=v["n_min"],
            quad_volume=v["quad_volume"], quad_edge=v["quad_edge"])

    def resolved_text(self):
        """Echo of every resolved key; reparses to the same configuration."""
        lines = [f"scenario = {self.scenario}"]
        for key in sorted(self.values):
            val = self.values[key]
            if val is None:
                continue
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"


def _parse_value(key, raw, line_no):
    typ = _TYPES[key]
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r}", key=key, line=line_no)


def parse_config(text, overrides=None):
    """Parse `key = value` lines into a fully-resolved RunConfig.

    Unknown keys are rejected with their line number.  overrides is an
    optional {key: raw-string} mapping applied after the file (CLI flags).
    """
    given = {}
    lines_of = {}
    for i, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected `key = value`", line=i)
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key != "scenario" and key not in _TYPES:
            raise ConfigError("unknown key", key=key, line=i)
        given[key] = raw
        lines_of[key] = i
    for key, raw in (overrides or {}).items():
        if key != "scenario" and key not in _TYPES:
            raise ConfigError("unknown key", key=key)
        given[key] = str(raw)
        lines_of.setdefault(key, None)

    scenario = given.pop("scenario", "gravity_relaxation")
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}", key="scenario",
                          line=lines_of.get("scenario"))
    values = dict(_SHARED_DEFAULTS)
    values.update(_SCENARIO_DEFAULTS[scenario])
    for key, raw in given.items():
        values[key] = _parse_value(key, raw, lines_of.get(key))

    if scenario == "couette_gnbc":
        if values["u_b_top"] is None:
            values["u_b_top"] = values["V"]
        if values["u_b_bottom"] is None:
            values["u_b_bottom"] = -values["V"]
    if values["out"] is None:
        values["out"] = f"runs/{scenario}"
    if values["csv_path"] is None:
        values["csv_path"] = str(Path(values["out"]) / "energy.csv")

    cfg = RunConfig(scenario=scenario, values=values)
    _validate(cfg, lines_of)
    return cfg


def _validate(cfg, lines_of):
    v = cfg.values

    def bad(key, msg):
        raise ConfigError(msg, key=key, line=lines_of.get(key))

    if v["end_time"] <= 0:
        bad("end_time", "end_time must be positive")
    if v["dt"] <= 0:
        bad("dt", "dt must be positive")
    if v["nx"] < 2 or v["ny"] < 2:
        bad("nx", "mesh needs at least 2x2 cells")
    if v["snapshot_every"] < 0:
        bad("snapshot_every", "snapshot_every must be >= 0")
    try:
        cfg.physical
    except ValueError as exc:
        raise ConfigError(str(exc), key="physical parameters")
    try:
        cfg.scheme
    except ValueError as exc:
        raise ConfigError(str(exc), key="scheme parameters")


def load_config(path, overrides=None):
    return parse_config(Path(path).read_text(encoding="utf-8"), overrides)
