"""Pytest configuration and common fixtures."""

import math
import sys
from pathlib import Path
from typing import Callable, List

import numpy as np
import pytest

# Add the project root to the Python path for local development
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from packages.uav_planner.channel import ChannelParams  # noqa: E402
from packages.uav_planner.environment import BuildingGrid, Point3  # noqa: E402
from packages.uav_planner.mobility import LinkModel, UavState, UserState  # noqa: E402
from packages.uav_planner.scenario import Scenario  # noqa: E402


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded random source."""
    return np.random.default_rng(12345)


@pytest.fixture
def flat_grid() -> BuildingGrid:
    """100 x 100 m region without buildings."""
    return BuildingGrid(100.0, 100.0, 10.0, np.zeros((10, 10)))


@pytest.fixture
def channel() -> ChannelParams:
    """Default channel parameters."""
    return ChannelParams()


@pytest.fixture
def make_user() -> Callable[..., UserState]:
    """Factory for users with sensible defaults."""

    def _make(
        uid: int = 0,
        x: float = 50.0,
        y: float = 50.0,
        speed: float = 0.0,
        deadline: float = 10.0,
        **kwargs: object,
    ) -> UserState:
        return UserState(
            id=uid,
            position=Point3(x, y, 1.5),
            speed=speed,
            max_speed=max(speed, 3.0),
            deadline=deadline,
            **kwargs,  # type: ignore[arg-type]
        )

    return _make


@pytest.fixture
def make_uav() -> Callable[..., UavState]:
    """Factory for UAVs with sensible defaults."""

    def _make(
        uid: int = 0,
        x: float = 50.0,
        y: float = 50.0,
        z: float = 50.0,
        capacity: int = 10,
        cruise_speed: float = 10.0,
    ) -> UavState:
        return UavState(
            id=uid,
            position=Point3(x, y, z),
            capacity=capacity,
            cruise_speed=cruise_speed,
        )

    return _make


@pytest.fixture
def flat_link(flat_grid: BuildingGrid, channel: ChannelParams) -> LinkModel:
    """Link model over the flat grid with 1 s slots."""
    return LinkModel(
        grid=flat_grid,
        budget=channel.budget(),
        slot=1.0,
        handover=0.1,
        theta=math.pi / 4,
        step=1.0,
    )


@pytest.fixture
def small_scenario() -> Scenario:
    """Small scenario that runs in well under a second per algorithm."""
    return Scenario(
        region_width=100.0,
        region_height=100.0,
        num_users=24,
        num_uavs=3,
        capacity=6,
        slots_per_macro=3,
        num_macro_slots=2,
        uav_altitude_min=40.0,
        uav_altitude_max=80.0,
        city={"density": 0.15, "min_height": 10.0, "max_height": 30.0},
        seed=3,
    )


@pytest.fixture
def make_grid() -> Callable[..., BuildingGrid]:
    """Factory for grids given as rows of heights, first row at y = 0."""

    def _make(rows: List[List[float]], cell: float = 10.0) -> BuildingGrid:
        heights = np.array(rows, dtype=float)
        return BuildingGrid(
            heights.shape[1] * cell, heights.shape[0] * cell, cell, heights
        )

    return _make
