"""Scenario files: flat TOML with dotted section prefixes.

Example::

    rf.tx_power_dbm = 40
    rf.noise_power_dbm = -96
    panel.rows = 10
    panel.cols = 10
    bs.position = [-500.0, 0.0, 2.0]

Powers may be given in dBm (``*_dbm``) or watts (``*_w``); they are stored in
watts. Missing keys take the defaults below and unknown keys are rejected.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel import RfConstants, dbm_to_watts
from .experiments import MuRegion, Scenario
from .geometry import GeometryError, PanelGeometry, Point3
from .optimizer import BOUNDS, MODES


class ConfigError(ValueError):
    pass


def default_panel() -> PanelGeometry:
    return PanelGeometry(10, 10, 0.03, 0.03, Point3(0.0, 0.0, 2.0))


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario = field(default_factory=lambda: Scenario(default_panel()))
    n_trials: int = 10_000
    master_seed: int = 0
    grid_x: tuple = (-2.0, 2.0)
    grid_y: tuple = (-2.0, 2.0)
    grid_step: float = 0.1
    sizes: tuple = (2, 4, 6, 8, 10)

    @property
    def rf(self) -> RfConstants:
        return self.scenario.rf

    @property
    def panel(self) -> PanelGeometry:
        return self.scenario.panel


_RF_KEYS = {f.name for f in fields(RfConstants)} - {"tx_power", "noise_power", "direct_blocked"}
_PANEL_KEYS = {"rows", "cols", "delta_x", "delta_y", "center", "normal", "up", "n_diodes", "s_a"}
_INT_KEYS = {"panel.rows", "panel.cols", "panel.n_diodes", "panel.s_a",
             "experiment.n_trials", "experiment.master_seed"}
_POINT_KEYS = {"panel.center", "panel.normal", "panel.up", "bs.position", "region.center"}
_STR_KEYS = {
    "experiment.candidate_set_mode": MODES,
    "experiment.init_mode": ("nearest", "random"),
    "experiment.bound": BOUNDS,
}
KNOWN_KEYS = (
    {f"rf.{k}" for k in _RF_KEYS}
    | {"rf.tx_power_dbm", "rf.tx_power_w", "rf.noise_power_dbm", "rf.noise_power_w"}
    | {f"panel.{k}" for k in _PANEL_KEYS}
    | {"bs.position", "region.center", "region.radius", "region.height"}
    | {"experiment.n_trials", "experiment.master_seed", "experiment.grid_x", "experiment.grid_y",
       "experiment.grid_step", "experiment.sizes", "experiment.direct_blocked"}
    | set(_STR_KEYS)
)


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _number(key, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    return float(v)


def _check_type(key: str, v):
    if key in _INT_KEYS:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{key}: expected an integer, got {v!r}")
        return v
    if key in _POINT_KEYS:
        if not isinstance(v, list) or len(v) != 3:
            raise ConfigError(f"{key}: expected a list of 3 numbers, got {v!r}")
        return tuple(_number(key, c) for c in v)
    if key in ("experiment.grid_x", "experiment.grid_y"):
        if not isinstance(v, list) or len(v) != 2:
            raise ConfigError(f"{key}: expected [min, max], got {v!r}")
        lo, hi = (_number(key, c) for c in v)
        if hi < lo:
            raise ConfigError(f"{key}: max must be >= min")
        return (lo, hi)
    if key == "experiment.sizes":
        if not isinstance(v, list) or not v or any(isinstance(s, bool) or not isinstance(s, int) or s < 1 for s in v):
            raise ConfigError(f"{key}: expected a non-empty list of integers >= 1, got {v!r}")
        return tuple(v)
    if key == "experiment.direct_blocked":
        if not isinstance(v, bool):
            raise ConfigError(f"{key}: expected true/false, got {v!r}")
        return v
    if key in _STR_KEYS:
        if v not in _STR_KEYS[key]:
            raise ConfigError(f"{key}: expected one of {list(_STR_KEYS[key])}, got {v!r}")
        return v
    return _number(key, v)


def _power(values: dict, name: str):
    dbm, w = values.pop(f"rf.{name}_dbm", None), values.pop(f"rf.{name}_w", None)
    if dbm is not None and w is not None:
        raise ConfigError(f"rf.{name}: give either rf.{name}_dbm or rf.{name}_w, not both")
    if dbm is not None:
        return dbm_to_watts(dbm)
    return w


def from_mapping(raw: dict) -> ScenarioConfig:
    flat = _flatten(raw)
    unknown = sorted(set(flat) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    values = {k: _check_type(k, v) for k, v in flat.items()}

    rf_kwargs = {k[3:]: v for k, v in values.items() if k[3:] in _RF_KEYS and k.startswith("rf.")}
    for name in ("tx_power", "noise_power"):
        p = _power(values, name)
        if p is not None:
            rf_kwargs[name] = p
    if "experiment.direct_blocked" in values:
        rf_kwargs["direct_blocked"] = values["experiment.direct_blocked"]
    try:
        rf = RfConstants(**rf_kwargs)
    except ValueError as e:
        raise ConfigError(str(e)) from None

    base = default_panel()
    panel_kwargs = {k: getattr(base, k) for k in _PANEL_KEYS}
    panel_kwargs.update({k[6:]: v for k, v in values.items() if k.startswith("panel.")})
    try:
        panel = PanelGeometry(**panel_kwargs)
    except GeometryError as e:
        raise ConfigError(f"panel: {e}") from None

    default = ScenarioConfig()
    region_default = default.scenario.region
    try:
        region = MuRegion(
            center=values.get("region.center", region_default.center),
            radius=values.get("region.radius", region_default.radius),
            height=values.get("region.height", region_default.height),
        )
    except ValueError as e:
        raise ConfigError(f"region: {e}") from None

    sc_default = default.scenario
    try:
        scenario = Scenario(
            panel=panel,
            rf=rf,
            bs=values.get("bs.position", sc_default.bs),
            region=region,
            candidate_set_mode=values.get("experiment.candidate_set_mode", sc_default.candidate_set_mode),
            init_mode=values.get("experiment.init_mode", sc_default.init_mode),
            bound=values.get("experiment.bound", sc_default.bound),
        )
    except GeometryError as e:
        raise ConfigError(f"bs.position: {e}") from None

    n_trials = values.get("experiment.n_trials", default.n_trials)
    if n_trials < 1:
        raise ConfigError("experiment.n_trials must be >= 1")
    step = values.get("experiment.grid_step", default.grid_step)
    if not step > 0:
        raise ConfigError("experiment.grid_step must be positive")
    return ScenarioConfig(
        scenario=scenario,
        n_trials=n_trials,
        master_seed=values.get("experiment.master_seed", default.master_seed),
        grid_x=values.get("experiment.grid_x", default.grid_x),
        grid_y=values.get("experiment.grid_y", default.grid_y),
        grid_step=step,
        sizes=values.get("experiment.sizes", default.sizes),
    )


def loads(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{source}: parse error: {e}") from None
    return from_mapping(raw)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}") from None
    return loads(text, str(path))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def dumps(cfg: ScenarioConfig) -> str:
    """Effective configuration in the same flat format; powers in watts."""
    sc, rf, panel = cfg.scenario, cfg.rf, cfg.panel
    lines = [f"rf.{k} = {_fmt(getattr(rf, k))}" for k in sorted(_RF_KEYS)]
    lines += [f"rf.tx_power_w = {_fmt(rf.tx_power)}", f"rf.noise_power_w = {_fmt(rf.noise_power)}"]
    for k in sorted(_PANEL_KEYS):
        v = getattr(panel, k)
        if isinstance(v, Point3):
            v = (v.x, v.y, v.z)
        lines.append(f"panel.{k} = {_fmt(v)}")
    lines += [
        f"bs.position = {_fmt((sc.bs.x, sc.bs.y, sc.bs.z))}",
        f"region.center = {_fmt((sc.region.center.x, sc.region.center.y, sc.region.center.z))}",
        f"region.radius = {_fmt(float(sc.region.radius))}",
        f"region.height = {_fmt(float(sc.region.height))}",
        f"experiment.n_trials = {cfg.n_trials}",
        f"experiment.master_seed = {cfg.master_seed}",
        f"experiment.grid_x = {_fmt(tuple(float(v) for v in cfg.grid_x))}",
        f"experiment.grid_y = {_fmt(tuple(float(v) for v in cfg.grid_y))}",
        f"experiment.grid_step = {_fmt(float(cfg.grid_step))}",
        f"experiment.sizes = {_fmt(cfg.sizes)}",
        f"experiment.candidate_set_mode = {_fmt(sc.candidate_set_mode)}",
        f"experiment.init_mode = {_fmt(sc.init_mode)}",
        f"experiment.bound = {_fmt(sc.bound)}",
        f"experiment.direct_blocked = {_fmt(rf.direct_blocked)}",
    ]
    return "\n".join(lines) + "\n"


def with_seed(cfg: ScenarioConfig, seed: int) -> ScenarioConfig:
    return replace(cfg, master_seed=int(seed))


def dump_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(dumps(cfg), encoding="utf-8")
