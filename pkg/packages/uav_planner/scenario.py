"""
Experiment configuration and initial population.

A scenario is a JSON document validated by ``Scenario``; unknown keys are
rejected at every nesting level.
"""

import json
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .channel import ChannelParams
from .clustering import ClusteringConfig
from .energy import EnergyParams, optimal_cruise_speed
from .environment import CityConfig, Point3
from .mobility import MOTION_MODES, UavState, UserState, sector_count

logger = logging.getLogger(__name__)


class Algorithm(str, Enum):
    """Placement and assignment scheme of a run."""

    PROPOSED = "proposed"
    BT = "bt"
    BT_THROUGHPUT = "bt-throughput"
    BALANCED = "balanced"


class MobilityConfig(BaseModel):
    """User motion and search-point discretization."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    theta: float = Field(default=math.pi / 4, gt=0, description="Ray spacing, radians")
    step: float = Field(default=1.0, gt=0, description="Ring spacing, m")
    max_speed: float = Field(default=3.0, ge=0, description="User top speed, m/s")
    deadline_min: float = Field(default=2.0, gt=0, description="Lowest user deadline, s")
    deadline_max: float = Field(default=10.0, gt=0, description="Highest user deadline, s")
    motion_mode: str = Field(default="search_points", description="search_points or continuous")

    @field_validator("theta")
    @classmethod
    def _theta_divides_turn(cls, v: float) -> float:
        sector_count(v)
        return v

    @field_validator("motion_mode")
    @classmethod
    def _known_mode(cls, v: str) -> str:
        if v not in MOTION_MODES:
            raise ValueError(f"motion_mode must be one of {MOTION_MODES}")
        return v

    @model_validator(mode="after")
    def _deadline_range(self) -> "MobilityConfig":
        if self.deadline_min > self.deadline_max:
            raise ValueError("deadline_min exceeds deadline_max")
        return self


class Scenario(BaseModel):
    """Full experiment configuration."""

    model_config = ConfigDict(extra="forbid", frozen=True, use_enum_values=False)

    region_width: float = Field(default=300.0, gt=0, description="Region extent along x, m")
    region_height: float = Field(default=300.0, gt=0, description="Region extent along y, m")
    num_users: int = Field(default=400, ge=1, description="Number of users")
    num_uavs: int = Field(default=6, ge=1, description="Number of UAVs")
    capacity: int = Field(default=62, ge=1, description="Users per UAV")
    slots_per_macro: int = Field(default=10, ge=1, description="Slots per macro slot")
    num_macro_slots: int = Field(default=10, ge=1)
    slot_s: float = Field(default=1.0, gt=0, description="Slot length, s")
    handover_s: float = Field(default=0.1, ge=0, description="Handover time, s")
    relocation_deadline_s: float = Field(default=5.0, ge=0, description="Relocation deadline, s")
    uav_altitude_min: float = Field(default=22.0, gt=0)
    uav_altitude_max: float = Field(default=150.0, gt=0)
    user_altitude: float = Field(default=1.5, ge=0)
    uav_cruise_speed: float = Field(default=10.0, gt=0, description="UAV cruise speed, m/s")
    optimize_cruise_speed: bool = False
    sample_fading: bool = False
    relocation_gate: bool = Field(
        default=True,
        description="Proposed scheme relocates only when the expected data gain pays for the flight",
    )

    channel: ChannelParams = Field(default_factory=ChannelParams)
    energy: EnergyParams = Field(default_factory=EnergyParams)
    mobility: MobilityConfig = Field(default_factory=MobilityConfig)
    city: CityConfig = Field(default_factory=CityConfig)
    clustering: ClusteringConfig = Field(default_factory=ClusteringConfig)

    algorithm: Algorithm = Algorithm.PROPOSED
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_consistency(self) -> "Scenario":
        if self.handover_s >= self.slot_s:
            raise ValueError(
                f"handover_s {self.handover_s} must be shorter than slot_s {self.slot_s}"
            )
        if self.uav_altitude_min > self.uav_altitude_max:
            raise ValueError("uav_altitude_min exceeds uav_altitude_max")
        if self.user_altitude >= self.uav_altitude_min:
            raise ValueError("users must fly below the lowest UAV altitude")
        return self

    @property
    def total_slots(self) -> int:
        return self.num_macro_slots * self.slots_per_macro

    @property
    def region(self) -> Tuple[float, float]:
        return (self.region_width, self.region_height)

    def cruise_speed(self) -> float:
        """Per-UAV cruise speed, energy-optimal when requested."""
        if self.optimize_cruise_speed:
            return optimal_cruise_speed(self.energy)
        return self.uav_cruise_speed


class RandomStreams(NamedTuple):
    """Independent generators for each random concern of a run."""

    city: np.random.Generator
    users: np.random.Generator
    uavs: np.random.Generator
    motion: np.random.Generator
    fading: np.random.SeedSequence


def random_streams(seed: int) -> RandomStreams:
    """Split one seed into independent streams."""
    city, users, uavs, motion, fading = np.random.SeedSequence(seed).spawn(5)
    return RandomStreams(
        np.random.default_rng(city),
        np.random.default_rng(users),
        np.random.default_rng(uavs),
        np.random.default_rng(motion),
        fading,
    )


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read and validate a scenario file."""
    path = Path(path)
    scenario = Scenario.model_validate_json(path.read_text(encoding="utf-8"))
    logger.info("Loaded scenario %s (K=%d, M=%d)", path, scenario.num_users, scenario.num_uavs)
    return scenario


def with_override(scenario: Scenario, param: str, value: Any) -> Scenario:
    """
    Copy of a scenario with one dotted field replaced and re-validated.

    Args:
        scenario: Base scenario
        param: Dotted path such as ``channel.tx_power_dbm``
        value: New value; strings are coerced by validation

    Returns:
        Validated Scenario
    """
    data: Dict[str, Any] = json.loads(scenario.model_dump_json())
    keys = param.split(".")
    node = data
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            raise ValueError(f"unknown scenario parameter '{param}'")
        node = node[key]
    if keys[-1] not in node:
        raise ValueError(f"unknown scenario parameter '{param}'")
    node[keys[-1]] = value
    return Scenario.model_validate(data)


def spawn_users(scenario: Scenario, rng: np.random.Generator) -> List[UserState]:
    """Place users uniformly over the region with random speeds and deadlines."""
    k = scenario.num_users
    mob = scenario.mobility
    xs = rng.uniform(0.0, scenario.region_width, k)
    ys = rng.uniform(0.0, scenario.region_height, k)
    speeds = rng.uniform(0.0, mob.max_speed, k)
    deadlines = rng.uniform(mob.deadline_min, mob.deadline_max, k)
    return [
        UserState(
            id=i,
            position=Point3(float(xs[i]), float(ys[i]), scenario.user_altitude),
            speed=float(speeds[i]),
            max_speed=mob.max_speed,
            deadline=float(deadlines[i]),
        )
        for i in range(k)
    ]


def spawn_uavs(scenario: Scenario, rng: np.random.Generator) -> List[UavState]:
    """Launch positions uniform over the region, altitudes uniform in the allowed band."""
    m = scenario.num_uavs
    xs = rng.uniform(0.0, scenario.region_width, m)
    ys = rng.uniform(0.0, scenario.region_height, m)
    zs = rng.uniform(scenario.uav_altitude_min, scenario.uav_altitude_max, m)
    speed = scenario.cruise_speed()
    return [
        UavState(
            id=j,
            position=Point3(float(xs[j]), float(ys[j]), float(zs[j])),
            capacity=scenario.capacity,
            cruise_speed=speed,
            energy=scenario.energy,
        )
        for j in range(m)
    ]
