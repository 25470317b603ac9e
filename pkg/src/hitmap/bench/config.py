"""Scenario configuration with the two experiment presets."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from hitmap.errors import ConfigError
from hitmap.geometry import Frame, Pose2
from hitmap.planner import CostWeights
from hitmap.world import DriftModel, SensorKind, SensorModel


@dataclass
class ScenarioConfig:
    world: str = ""
    start: tuple[float, float, float] = (0.0, 0.0, 0.0)
    goal: tuple[float, float] = (0.0, 0.0)
    # intermediate goals visited in order before ``goal``
    waypoints: list = field(default_factory=list)

    sensor_kind: str = SensorKind.DEPTH_CAMERA.value
    sensor_range: float = 5.0
    sensor_fov_deg: float = 120.0
    sensor_resolution_deg: float = 1.0

    trans_drift_per_meter: float = 0.0
    rot_drift_per_meter: float = 0.0

    map_size: float = 5.0
    resolution: float = 0.1
    submap_interval: float = 5.0
    sample_interval: float = 0.3

    robot_radius: float = 0.2
    slope_threshold: float = 0.3
    roughness_threshold: float = 0.01
    min_frontier_cells: int = 3

    w_d: float = 0.8
    w_l: float = 0.2

    frames: int = 10_000
    seed: int = 0
    dt: float = 0.2
    max_speed: float = 0.5
    max_turn_rate: float = 1.5

    # place-recognition radius; None means 0.7 x submap interval
    loop_radius: float | None = None
    # bridge radius; None means 1.5 x sample interval
    connect_radius: float | None = None
    # goal attachment radius; None means the sample interval
    attach_radius: float | None = None
    loop_validation: bool = True

    stuck_window: int = 200
    stuck_distance: float = 0.25
    snapshot_every: int = 0

    def __post_init__(self):
        self.start = tuple(float(v) for v in self.start)
        self.goal = tuple(float(v) for v in self.goal)
        self.waypoints = [tuple(float(v) for v in p) for p in self.waypoints]
        self.validate()

    def validate(self) -> None:
        positive = ("sensor_range", "map_size", "resolution", "submap_interval", "sample_interval",
                    "dt", "max_speed", "max_turn_rate")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if len(self.start) != 3 or len(self.goal) != 2:
            raise ConfigError("start is (x, y, theta) and goal is (x, y)")
        if any(len(p) != 2 for p in self.waypoints):
            raise ConfigError("waypoints are (x, y) pairs")
        if self.sample_interval < self.resolution:
            raise ConfigError("sample_interval must be at least the resolution")
        if self.frames <= 0:
            raise ConfigError("frames must be positive")
        if self.robot_radius < 0:
            raise ConfigError("robot_radius must be non-negative")
        if self.connect_radius is not None and self.connect_radius < self.sample_interval:
            raise ConfigError("connect_radius must be at least the sample interval")
        try:
            SensorKind(self.sensor_kind)
            self.sensor_model()
            self.weights()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # ------------------------------------------------------------ derived

    def sensor_model(self) -> SensorModel:
        return SensorModel(self.sensor_range, math.radians(self.sensor_fov_deg),
                           math.radians(self.sensor_resolution_deg), SensorKind(self.sensor_kind))

    def drift_model(self) -> DriftModel:
        return DriftModel(self.trans_drift_per_meter, self.rot_drift_per_meter, self.seed)

    def weights(self) -> CostWeights:
        return CostWeights(self.w_d, self.w_l)

    def start_pose(self) -> Pose2:
        return Pose2(*self.start, Frame.GROUND_TRUTH)

    @property
    def effective_loop_radius(self) -> float:
        return self.loop_radius if self.loop_radius is not None else 0.7 * self.submap_interval

    @property
    def effective_connect_radius(self) -> float:
        return self.connect_radius if self.connect_radius is not None else 1.5 * self.sample_interval

    @property
    def effective_attach_radius(self) -> float:
        return self.attach_radius if self.attach_radius is not None else self.sample_interval

    @property
    def dedup_epsilon(self) -> float:
        return self.sample_interval / 3.0

    @property
    def snap_cells(self) -> int:
        return max(1, int(round(self.sample_interval / self.resolution)))

    @property
    def known_half_extent(self) -> float:
        """Half-size of a submap's traversability record: the interval plus the
        window reach on either side."""
        return self.submap_interval + 0.75 * self.map_size

    def goals(self) -> list[tuple[float, float]]:
        return [*self.waypoints, self.goal]

    # ------------------------------------------------------------ presets

    @classmethod
    def simulation(cls, **overrides) -> ScenarioConfig:
        """5 m map at 0.1 m, 5 m submaps, 0.3 m lattice, 5 m depth camera."""
        return cls(**overrides)

    @classmethod
    def real_world(cls, **overrides) -> ScenarioConfig:
        """15 m map at 0.2 m, 10 m submaps, 0.8 m lattice, 15 m lidar."""
        base = dict(
            map_size=15.0, resolution=0.2, submap_interval=10.0, sample_interval=0.8,
            sensor_range=15.0, sensor_kind=SensorKind.LIDAR.value, sensor_fov_deg=360.0,
            robot_radius=0.4, max_speed=1.0,
        )
        base.update(overrides)
        return cls(**base)

    # ------------------------------------------------------------ json

    def to_json(self) -> dict:
        d = asdict(self)
        d["start"] = list(self.start)
        d["goal"] = list(self.goal)
        d["waypoints"] = [list(p) for p in self.waypoints]
        return d

    @classmethod
    def from_json(cls, data: dict) -> ScenarioConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> ScenarioConfig:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        cfg = cls.from_json(data)
        if cfg.world and not Path(cfg.world).is_absolute():
            cfg.world = str((Path(path).parent / cfg.world).resolve())
        return cfg

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    def with_overrides(self, **kw) -> ScenarioConfig:
        return replace(self, **kw)
