"""JSON configuration: unit-tagged values, defaults and validation.

Physical quantities must carry a unit key, e.g. ``{"dbm": -60}`` or
``{"watt": 1e-9}`` for powers, ``{"per_m2": 0.0008}`` for densities and
``{"m": 1000}`` for lengths. Dimensionless values are plain numbers.
A user file is deep-merged over :data:`DEFAULTS`.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from .battery import DEFAULT_DELTA0, DEFAULT_STATE_CAP, DEFAULT_THETA, BatteryMode
from .errors import ConfigError, DomainError
from .params import NetworkParams, dbm_to_watt
from .simcore import SimConfig

SECTIONS = ("network", "protocol", "battery", "simulation", "sweeps")

DEFAULTS: dict = {
    "network": {
        "lambda_ap": {"per_m2": 0.0008},
        "lambda_w": {"per_m2": 0.0012},
        "p_d": {"watt": 10.0},
        "eta": 0.4,
        "alpha": 4,
        "sigma2": {"dbm": -60},
        "beta": 5,
        "epsilon": 0.05,
        "t_slots": 100,
        "p_max": {"watt": 0.02},
    },
    "protocol": {"n_dl": 60, "p_u": {"watt": 0.02}},
    "battery": {
        "capacity": {"watt": 0.4},
        "delta0": {"watt": DEFAULT_DELTA0},
        "theta": DEFAULT_THETA,
        "state_cap": DEFAULT_STATE_CAP,
        "power_grid": 200,
        "erf_digits": 9,
    },
    "simulation": {
        "window_side": {"m": 1000},
        "interim_side": {"m": 200},
        "frames": 4000,
        "seed": 0,
        "mobility": "type1",
        "fast": True,
        "time_budget_s": None,
        "experiment": "psuc",
    },
    "sweeps": {
        "fig3": {
            "network": {"lambda_w": {"per_m2": 0.005}, "t_slots": 3},
            "protocol": {"n_dl": 2},
            "lambda_ap": {"per_m2": [1e-4, 2e-4, 3e-4, 4e-4, 5e-4, 7e-4, 1e-3]},
            "scenarios": [
                {"interim_side": {"m": 20}, "p_u": {"watt": 1e-6}},
                {"interim_side": {"m": 100}, "p_u": {"watt": 1e-5}},
            ],
            "frames": 4000,
        },
        "fig4": {
            "network": {"lambda_ap": {"per_m2": 0.0005}, "lambda_w": {"per_m2": 0.005},
                        "t_slots": 3},
            "protocol": {"n_dl": 2, "p_u": {"watt": 1e-5}},
            "l": {"m": list(range(1, 21))},
            "frames": 4000,
        },
        "fig5": {
            "capacity": {"watt": [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2]},
        },
        "fig6": {
            "lambda_w": {"per_m2": [0.0012, 0.002]},
            "lambda_ap": {"per_m2": {"logspace": [2e-4, 4e-3, 61]}},
        },
        "fig7": {"capacity": {"watt": 0.04}},
    },
}

_POWER_UNITS = {"watt": 1.0, "w": 1.0, "mw": 1e-3, "uw": 1e-6}
_DENSITY_UNITS = {"per_m2": 1.0, "per_km2": 1e-6}
_LENGTH_UNITS = {"m": 1.0, "km": 1e3}


def _deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and not _is_quantity(v):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _is_quantity(v: Any) -> bool:
    known = set(_POWER_UNITS) | set(_DENSITY_UNITS) | set(_LENGTH_UNITS) | {"dbm"}
    return isinstance(v, dict) and len(v) == 1 and next(iter(v)) in known


def _expand(values, where: str):
    if isinstance(values, dict) and set(values) == {"logspace"}:
        lo, hi, n = values["logspace"]
        if not (lo > 0 and hi > lo and int(n) == n and n >= 2):
            raise ConfigError(f"{where}: logspace needs [lo > 0, hi > lo, n >= 2]")
        r = math.log(hi / lo)
        return [lo * math.exp(r * i / (n - 1)) for i in range(int(n))]
    return values


def _number(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise ConfigError(f"{where}: expected a finite number, got {x!r}")
    return float(x)


def _quantity(v, units: dict, where: str, allow_dbm: bool = False):
    """Convert a unit-tagged value (scalar or list) to SI."""
    if not isinstance(v, dict) or len(v) != 1:
        raise ConfigError(f"{where}: expected a single unit key, got {v!r}")
    (unit, raw), = v.items()
    raw = _expand(raw, where)
    if unit == "dbm" and allow_dbm:
        conv = dbm_to_watt
    elif unit in units:
        conv = lambda x, s=units[unit]: x * s  # noqa: E731
    else:
        allowed = sorted(units) + (["dbm"] if allow_dbm else [])
        raise ConfigError(f"{where}: unit {unit!r} not one of {allowed}")
    if isinstance(raw, list):
        return [conv(_number(x, where)) for x in raw]
    return conv(_number(raw, where))


def power(v, where: str):
    return _quantity(v, _POWER_UNITS, where, allow_dbm=True)


def density(v, where: str):
    return _quantity(v, _DENSITY_UNITS, where)


def length(v, where: str):
    return _quantity(v, _LENGTH_UNITS, where)


def _integer(x, where: str, lo: int = 0) -> int:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or int(x) != x or x < lo:
        raise ConfigError(f"{where}: expected an integer >= {lo}, got {x!r}")
    return int(x)


def network_from(section: dict, where: str = "network") -> NetworkParams:
    known = {"lambda_ap", "lambda_w", "p_d", "eta", "alpha", "sigma2", "beta", "epsilon",
             "t_slots", "p_max"}
    extra = set(section) - known
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    try:
        return NetworkParams(
            lambda_ap=density(section["lambda_ap"], f"{where}.lambda_ap"),
            lambda_w=density(section["lambda_w"], f"{where}.lambda_w"),
            p_d=power(section["p_d"], f"{where}.p_d"),
            eta=_number(section["eta"], f"{where}.eta"),
            alpha=_number(section["alpha"], f"{where}.alpha"),
            sigma2=power(section["sigma2"], f"{where}.sigma2"),
            beta=_number(section["beta"], f"{where}.beta"),
            epsilon=_number(section["epsilon"], f"{where}.epsilon"),
            t_slots=_integer(section["t_slots"], f"{where}.t_slots", 2),
            p_max=power(section["p_max"], f"{where}.p_max"),
        )
    except KeyError as exc:
        raise ConfigError(f"{where}: missing key {exc}") from exc
    except DomainError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class RunConfig:
    """Resolved configuration with validated typed views."""

    raw: dict
    seed: int

    @property
    def params(self) -> NetworkParams:
        return network_from(self.raw["network"])

    def figure_params(self, fig: str) -> NetworkParams:
        over = self.raw["sweeps"].get(fig, {}).get("network", {})
        return network_from(_deep_merge(self.raw["network"], over), f"sweeps.{fig}.network")

    def protocol(self, fig: Optional[str] = None) -> dict:
        sec = self.raw["protocol"]
        if fig is not None:
            sec = _deep_merge(sec, self.raw["sweeps"].get(fig, {}).get("protocol", {}))
        return {"n_dl": _integer(sec["n_dl"], "protocol.n_dl", 1),
                "p_u": power(sec["p_u"], "protocol.p_u")}

    @property
    def battery(self) -> dict:
        b = self.raw["battery"]
        return {
            "capacity": power(b["capacity"], "battery.capacity"),
            "delta0": power(b["delta0"], "battery.delta0"),
            "theta": _number(b["theta"], "battery.theta"),
            "state_cap": _integer(b["state_cap"], "battery.state_cap", 2),
            "power_grid": _integer(b["power_grid"], "battery.power_grid", 1),
            "erf_digits": _integer(b["erf_digits"], "battery.erf_digits", 1),
        }

    def sim(self, mode: Optional[BatteryMode] = None, **over) -> SimConfig:
        s = self.raw["simulation"]
        budget = s.get("time_budget_s")
        kw = dict(
            window_side=length(s["window_side"], "simulation.window_side"),
            interim_side=length(s["interim_side"], "simulation.interim_side"),
            frames=_integer(s["frames"], "simulation.frames", 1),
            seed=self.seed,
            mobility=s["mobility"],
            fast=bool(s["fast"]),
            time_budget_s=None if budget is None else _number(budget, "simulation.time_budget_s"),
            mode=mode or BatteryMode.free(),
        )
        kw.update(over)
        try:
            return SimConfig(**kw)
        except DomainError as exc:
            raise ConfigError(f"simulation: {exc}") from exc

    def sweep(self, fig: str) -> dict:
        return self.raw["sweeps"].get(fig, {})

    def digest(self, *extra: str) -> str:
        blob = json.dumps({"config": self.raw, "seed": self.seed, "extra": list(extra)},
                          sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def load_config(path: Optional[str], seed: Optional[int] = None) -> RunConfig:
    """Read, merge over defaults and validate a configuration file."""
    user: dict = {}
    if path is not None:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("top level must be an object")
        extra = set(user) - set(SECTIONS)
        if extra:
            raise ConfigError(f"unknown sections {sorted(extra)}")
    raw = _deep_merge(DEFAULTS, user)
    sd = seed if seed is not None else raw["simulation"].get("seed", 0)
    sd = _integer(sd, "seed")
    if sd >= 2 ** 64:
        raise ConfigError("seed must fit in 64 bits")
    raw["simulation"]["seed"] = sd
    cfg = RunConfig(raw=raw, seed=sd)
    # validate eagerly so errors surface before any work starts
    cfg.params
    cfg.protocol()
    cfg.battery
    cfg.sim()
    return cfg
