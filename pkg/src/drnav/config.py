"""Experiment configuration: dataclasses plus YAML/dict loading with validation."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Any

import numpy as np
import yaml

from .controller import ControllerConfig
from .drcbf import AmbiguityConfig
from .dynamics import Control
from .geometry import Circle, ConvexPolygon, Shape, Union, circumradius
from .planner import PlannerConfig
from .stabilizer import ClfParams
from .world import LidarConfig, LocalizationModel, MovingObstacle, PedestrianParams

CONTROLLERS = ("dr-cbf", "nominal")


class ConfigError(ValueError):
    pass


# default robot: Jackal-sized rectangle
JACKAL = ConvexPolygon.box(0.254, 0.215)


@dataclass(frozen=True)
class PedestrianSpawn:
    count: int = 0
    radius: float = 0.3
    max_speed: float = 1.0
    min_start_distance: float = 2.0


@dataclass(frozen=True)
class ScenarioConfig:
    bounds: tuple[float, float, float, float] = (-8.0, 8.0, -8.0, 8.0)
    start: tuple[float, float, float] = (0.0, 0.0, 0.0)
    static: tuple[Shape, ...] = ()
    moving: tuple[MovingObstacle, ...] = ()
    pedestrians: PedestrianSpawn = field(default_factory=PedestrianSpawn)
    pedestrian_params: PedestrianParams = field(default_factory=PedestrianParams)
    speed_bound: float = 1.0
    walls: bool = False
    wall_thickness: float = 0.2


@dataclass(frozen=True)
class GoalSampling:
    mode: str = "random"
    point: tuple[float, float] | None = None
    min_distance: float = 10.0
    clearance: float = 0.8


@dataclass(frozen=True)
class GovernorConfig:
    k_gov: float = 1.0
    zeta: int = 2
    # divide k_gov by the path length so it reads as a reference speed in m/s
    per_meter: bool = True
    # arc-length cap on how far a replan may leave the reference ahead of the robot
    max_lead: float = 1.0


@dataclass(frozen=True)
class Rates:
    control: int = 50
    lidar: int = 10
    planner: int = 5


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    robot_shape: Shape = JACKAL
    controller: str = "dr-cbf"
    controller_config: ControllerConfig = field(default_factory=ControllerConfig)
    lidar: LidarConfig = field(default_factory=LidarConfig)
    localization: LocalizationModel = field(default_factory=LocalizationModel)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    governor: GovernorConfig = field(default_factory=GovernorConfig)
    grid_resolution: float = 0.1
    trial_count: int = 100
    seed: int = 0
    goal_sampling: GoalSampling = field(default_factory=GoalSampling)
    timeout_s: float = 40.0
    goal_tolerance: float = 0.1
    rates: Rates = field(default_factory=Rates)
    stall_window_s: float = 6.0
    stall_distance: float = 0.05

    def __post_init__(self):
        validate(self)

    @property
    def dt(self) -> float:
        return 1.0 / self.rates.control

    @property
    def lidar_every(self) -> int:
        return self.rates.control // self.rates.lidar

    @property
    def planner_every(self) -> int:
        return self.rates.control // self.rates.planner


def validate(cfg: ExperimentConfig) -> None:
    if cfg.controller not in CONTROLLERS:
        raise ConfigError(f"controller must be one of {CONTROLLERS}, got {cfg.controller!r}")
    if cfg.trial_count < 1:
        raise ConfigError("trial_count must be positive")
    if cfg.timeout_s <= 0:
        raise ConfigError("timeout_s must be positive")
    r = cfg.rates
    for name in ("control", "lidar", "planner"):
        if getattr(r, name) <= 0:
            raise ConfigError(f"rate {name} must be positive")
    if r.control % r.lidar or r.control % r.planner:
        raise ConfigError("lidar and planner rates must divide the control rate")
    if 1.0 / r.control > 0.1:
        raise ConfigError("control rate must be at least 10 Hz")
    xmin, xmax, ymin, ymax = cfg.scenario.bounds
    if not (xmin < xmax and ymin < ymax):
        raise ConfigError("scenario bounds must be ordered [xmin, xmax, ymin, ymax]")
    sx, sy, _ = cfg.scenario.start
    if not (xmin <= sx <= xmax and ymin <= sy <= ymax):
        raise ConfigError("start lies outside the scenario bounds")
    gs = cfg.goal_sampling
    if gs.mode not in ("random", "fixed"):
        raise ConfigError("goal_sampling.mode must be 'random' or 'fixed'")
    if gs.mode == "fixed" and gs.point is None:
        raise ConfigError("fixed goal sampling needs a point")
    if cfg.grid_resolution <= 0:
        raise ConfigError("grid_resolution must be positive")
    if cfg.planner.inflation_radius < circumradius(cfg.robot_shape):
        raise ConfigError("planner inflation_radius is smaller than the robot's circumscribed radius")
    if cfg.governor.k_gov <= 0 or cfg.governor.zeta < 1:
        raise ConfigError("governor needs k_gov > 0 and integer zeta >= 1")


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def parse_shape(d: Any) -> Shape:
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError(f"shape must be a mapping with a 'type' key, got {d!r}")
    kind = d["type"]
    try:
        if kind == "circle":
            return Circle(tuple(d["center"]), float(d["radius"]))
        if kind == "polygon":
            return ConvexPolygon(tuple(tuple(v) for v in d["vertices"]))
        if kind == "box":
            hx, hy = d["half_extents"]
            return ConvexPolygon.box(float(hx), float(hy), tuple(d.get("center", (0.0, 0.0))), float(d.get("angle", 0.0)))
        if kind == "union":
            return Union(tuple(parse_shape(m) for m in d["members"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad {kind} shape {d!r}: {exc}") from exc
    raise ConfigError(f"unknown shape type {kind!r}")


def shape_to_dict(s: Shape) -> dict:
    if isinstance(s, Circle):
        return {"type": "circle", "center": list(s.center), "radius": s.radius}
    if isinstance(s, ConvexPolygon):
        return {"type": "polygon", "vertices": [list(v) for v in s.vertices]}
    return {"type": "union", "members": [shape_to_dict(m) for m in s.members]}


def _take(d: dict, allowed: set[str], where: str) -> dict:
    if d is None:
        return {}
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a mapping")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")
    return d


def _build(cls, d: dict | None, where: str, convert: dict | None = None):
    import dataclasses

    names = {f.name for f in dataclasses.fields(cls)}
    d = _take(d, names, where)
    kwargs = {}
    for k, v in d.items():
        if convert and k in convert:
            v = convert[k](v)
        elif isinstance(v, list):
            v = tuple(v)
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


def _moving(d: dict) -> MovingObstacle:
    d = _take(d, {"shape", "waypoints", "speed", "angular_rate", "speed_bound", "phase"}, "moving obstacle")
    try:
        return MovingObstacle(
            parse_shape(d["shape"]),
            np.array(d["waypoints"], dtype=float),
            float(d.get("speed", 0.5)),
            float(d.get("angular_rate", 0.0)),
            float(d.get("speed_bound", 1.0)),
            float(d.get("phase", 0.0)),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid moving obstacle: {exc}") from exc


def _controller_config(d: dict | None) -> ControllerConfig:
    d = _take(
        d,
        {"lambda", "clf", "ambiguity", "alpha_h_gain", "v_bounds", "omega_bounds", "nominal_control", "qp_tol"},
        "controller_config",
    )
    kw: dict[str, Any] = {}
    if "lambda" in d:
        kw["lam"] = float(d["lambda"])
    if "clf" in d:
        kw["clf"] = _build(ClfParams, d["clf"], "controller_config.clf")
    if "ambiguity" in d:
        kw["ambiguity"] = _build(AmbiguityConfig, d["ambiguity"], "controller_config.ambiguity")
    for k in ("alpha_h_gain", "qp_tol"):
        if k in d:
            kw[k] = float(d[k])
    for k in ("v_bounds", "omega_bounds"):
        if k in d:
            kw[k] = tuple(float(x) for x in d[k])
    if "nominal_control" in d:
        kw["nominal_control"] = Control(*map(float, d["nominal_control"]))
    try:
        return ControllerConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid controller_config: {exc}") from exc


def _scenario(d: dict | None) -> ScenarioConfig:
    d = _take(
        d,
        {"bounds", "start", "static", "moving", "pedestrians", "pedestrian_params", "speed_bound", "walls", "wall_thickness"},
        "scenario",
    )
    kw: dict[str, Any] = {}
    if "bounds" in d:
        kw["bounds"] = tuple(float(x) for x in d["bounds"])
        if len(kw["bounds"]) != 4:
            raise ConfigError("scenario.bounds needs four numbers")
    if "start" in d:
        s = [float(x) for x in d["start"]]
        kw["start"] = tuple(s + [0.0] * (3 - len(s)))
    kw["static"] = tuple(parse_shape(s) for s in d.get("static", []) or [])
    kw["moving"] = tuple(_moving(m) for m in d.get("moving", []) or [])
    if "pedestrians" in d:
        kw["pedestrians"] = _build(PedestrianSpawn, d["pedestrians"], "scenario.pedestrians")
    if "pedestrian_params" in d:
        kw["pedestrian_params"] = _build(PedestrianParams, d["pedestrian_params"], "scenario.pedestrian_params")
    for k in ("speed_bound", "wall_thickness"):
        if k in d:
            kw[k] = float(d[k])
    if "walls" in d:
        kw["walls"] = bool(d["walls"])
    return ScenarioConfig(**kw)


TOP_KEYS = {
    "scenario",
    "robot_shape",
    "controller",
    "controller_config",
    "lidar",
    "localization",
    "planner",
    "governor",
    "grid_resolution",
    "trial_count",
    "seed",
    "goal_sampling",
    "timeout_s",
    "goal_tolerance",
    "rates",
    "stall_window_s",
    "stall_distance",
}


def config_from_dict(d: dict, **overrides) -> ExperimentConfig:
    d = copy.deepcopy(_take(d, TOP_KEYS, "config"))
    d.update({k: v for k, v in overrides.items() if v is not None})
    kw: dict[str, Any] = {}
    kw["scenario"] = _scenario(d.get("scenario"))
    if "robot_shape" in d:
        kw["robot_shape"] = parse_shape(d["robot_shape"])
    if "controller" in d:
        kw["controller"] = str(d["controller"])
    kw["controller_config"] = _controller_config(d.get("controller_config"))
    kw["lidar"] = _build(LidarConfig, d.get("lidar"), "lidar")
    kw["localization"] = _build(LocalizationModel, d.get("localization"), "localization")
    kw["planner"] = _build(PlannerConfig, d.get("planner"), "planner")
    kw["governor"] = _build(GovernorConfig, d.get("governor"), "governor")
    kw["goal_sampling"] = _build(GoalSampling, d.get("goal_sampling"), "goal_sampling")
    kw["rates"] = _build(Rates, d.get("rates"), "rates")
    for k in ("grid_resolution", "timeout_s", "goal_tolerance", "stall_window_s", "stall_distance"):
        if k in d:
            kw[k] = float(d[k])
    for k in ("trial_count", "seed"):
        if k in d:
            v = d[k]
            if isinstance(v, bool) or int(v) != v:
                raise ConfigError(f"{k} must be an integer")
            kw[k] = int(v)
    try:
        return ExperimentConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        text = FsPath(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return config_from_dict(data, **overrides)
