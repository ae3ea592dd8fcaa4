"""
User mobility, uncertainty-circle search points and expected link data.

A user that moves at speed v during a slot of length T ends somewhere in the
disk of radius r = v*T around its slot-start position. The disk is sampled by
rings spaced ``step`` apart and rays spaced ``theta`` apart; every ring-ray
intersection is an equally likely end position. Expected rates average the
instantaneous throughput over those points using the mean channel gain.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .channel import (
    ChannelParams,
    LinkBudget,
    sample_gain_sq,
    throughput_bps,
    throughput_from_budget,
)
from .energy import EnergyParams
from .environment import BuildingGrid, Point3, los_mask

logger = logging.getLogger(__name__)

Region = Tuple[float, float]

MOTION_MODES = ("search_points", "continuous")


@dataclass
class UserState:
    """Mobile ground user.

    ``waited`` is the priority clock t_w and may reset on service; ``delay``
    accumulates every unserved second of the run and never resets.
    """

    id: int
    position: Point3
    speed: float
    max_speed: float
    deadline: float
    waited: float = 0.0
    priority: float = 0.0
    prev_uav: Optional[int] = None
    delay: float = 0.0

    def __post_init__(self) -> None:
        if self.deadline <= 0:
            raise ValueError(f"user {self.id}: deadline must be positive")
        if not 0.0 <= self.speed <= self.max_speed:
            raise ValueError(
                f"user {self.id}: speed {self.speed} outside [0, {self.max_speed}]"
            )


@dataclass
class UavState:
    """Aerial base station."""

    id: int
    position: Point3
    capacity: int
    cruise_speed: float
    energy: EnergyParams = field(default_factory=EnergyParams)

    def __post_init__(self) -> None:
        if self.capacity <= 0:
            raise ValueError(f"uav {self.id}: capacity must be positive")
        if self.cruise_speed <= 0:
            raise ValueError(f"uav {self.id}: cruise_speed must be positive")


@dataclass(frozen=True, eq=False)
class SearchPointSet:
    """Equally likely end positions of one user; ``points`` is an (n, 3) array."""

    points: np.ndarray
    probability: float
    sectors: int
    rings: int

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def as_points(self) -> List[Point3]:
        return [Point3(*map(float, row)) for row in self.points]


def sector_count(theta: float) -> int:
    """Number of rays n_k = 2*pi/theta; theta must divide the full turn."""
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta}")
    ratio = 2.0 * math.pi / theta
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-9 * ratio:
        raise ValueError(f"theta {theta} does not divide 2*pi")
    return int(n)


def reflect_into(values: np.ndarray, upper: float) -> np.ndarray:
    """Mirror coordinates back into [0, upper] at the region boundaries."""
    period = 2.0 * upper
    folded = np.mod(values, period)
    return np.where(folded > upper, period - folded, folded)


def search_points(
    user: UserState,
    slot: float,
    theta: float,
    step: float,
    bounds: Optional[Region] = None,
) -> SearchPointSet:
    """
    Build the search-point set inside a user's uncertainty circle.

    Args:
        user: User whose slot-start position is the circle center
        slot: Slot length, seconds
        theta: Angle between rays, radians; must divide 2*pi
        step: Spacing between rings, meters
        bounds: Optional (width, height); points outside are reflected inside

    Returns:
        SearchPointSet with q*n_k points of probability 1/(q*n_k), or the
        current position alone when the user does not move
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    n_k = sector_count(theta)
    center = user.position
    radius = user.speed * slot

    if radius <= 0.0:
        points = np.array([[center.x, center.y, center.z]], dtype=float)
        return SearchPointSet(points, 1.0, n_k, 0)

    # outermost ring is clamped to the circle radius
    q = max(1, math.ceil(radius / step - 1e-9))
    radii = np.minimum(np.arange(1, q + 1, dtype=float) * step, radius)
    angles = np.arange(n_k, dtype=float) * theta

    ring_r = np.repeat(radii, n_k)
    ray_a = np.tile(angles, q)
    xs = center.x + ring_r * np.cos(ray_a)
    ys = center.y + ring_r * np.sin(ray_a)
    if bounds is not None:
        xs = reflect_into(xs, bounds[0])
        ys = reflect_into(ys, bounds[1])

    points = np.column_stack([xs, ys, np.full(xs.shape, center.z)])
    return SearchPointSet(points, 1.0 / (q * n_k), n_k, q)


def _distances(source: Point3, points: np.ndarray) -> np.ndarray:
    diff = points - np.array([source.x, source.y, source.z], dtype=float)
    return np.sqrt(np.sum(diff * diff, axis=1))


def expected_rate(
    uav: UavState,
    user: UserState,
    grid: BuildingGrid,
    pts: SearchPointSet,
    params: ChannelParams,
) -> float:
    """
    Expected throughput of a link over the user's search points.

    NLoS points contribute zero; LoS points contribute the mean-gain rate.
    """
    los = los_mask(uav.position, pts.points, grid)
    if not np.any(los):
        return 0.0
    rates = throughput_bps(_distances(uav.position, pts.points[los]), 1.0, params)
    return float(pts.probability * np.sum(rates))


def handover_indicator(uav_id: int, user: UserState) -> int:
    """0 when the user stays on the UAV that served it last slot, else 1."""
    return 0 if user.prev_uav is not None and user.prev_uav == uav_id else 1


def expected_data(
    uav_id: int,
    expected_rate_value: float,
    user: UserState,
    slot: float,
    handover: float,
) -> float:
    """
    Expected bits a UAV delivers to a user during one slot.

    Args:
        uav_id: Candidate serving UAV
        expected_rate_value: Expected throughput of the link, bits per second
        user: User, whose ``prev_uav`` decides the handover penalty
        slot: Slot length, seconds
        handover: Connection-switch time, seconds (< slot)

    Returns:
        (slot - a * handover) * expected_rate_value, where a is 1 on a handover
    """
    if not 0.0 <= handover < slot:
        raise ValueError(f"handover {handover} must lie in [0, slot={slot})")
    a = handover_indicator(uav_id, user)
    return (slot - a * handover) * expected_rate_value


def advance_users(
    users: Sequence[UserState],
    region: Region,
    slot: float,
    rng: np.random.Generator,
    theta: float = math.pi / 4,
    step: float = 1.0,
    mode: str = "search_points",
) -> List[UserState]:
    """
    Move every user for one slot and redraw its speed.

    In ``search_points`` mode the end position is drawn uniformly from the
    reflected search-point set; in ``continuous`` mode a uniform direction
    and a uniform distance in [0, speed*slot] are drawn, then reflected at
    the region boundary. Speeds are redrawn uniformly in [0, max_speed].

    Returns:
        New UserState objects; the inputs are left untouched
    """
    if mode not in MOTION_MODES:
        raise ValueError(f"unknown motion mode '{mode}', expected one of {MOTION_MODES}")

    moved: List[UserState] = []
    for user in users:
        if mode == "search_points":
            pts = search_points(user, slot, theta, step, bounds=region)
            x, y, z = pts.points[int(rng.integers(len(pts)))]
        else:
            angle = rng.uniform(0.0, 2.0 * math.pi)
            dist = rng.uniform(0.0, user.speed * slot)
            x = float(reflect_into(np.array([user.position.x + dist * math.cos(angle)]), region[0])[0])
            y = float(reflect_into(np.array([user.position.y + dist * math.sin(angle)]), region[1])[0])
            z = user.position.z
        speed = float(rng.uniform(0.0, user.max_speed)) if user.max_speed > 0 else 0.0
        moved.append(replace(user, position=Point3(float(x), float(y), float(z)), speed=speed))
    return moved


@dataclass(frozen=True, eq=False)
class TrajectoryTape:
    """Pre-generated user motion shared by every compared algorithm.

    ``positions[s]`` and ``speeds[s]`` hold the state at the start of slot s.
    """

    positions: np.ndarray
    speeds: np.ndarray

    @property
    def slots(self) -> int:
        return int(self.positions.shape[0]) - 1

    def apply(self, users: Sequence[UserState], slot_index: int) -> None:
        """Move users to their recorded state at the start of ``slot_index``."""
        for k, user in enumerate(users):
            user.position = Point3(*map(float, self.positions[slot_index, k]))
            user.speed = float(self.speeds[slot_index, k])


def build_trajectory_tape(
    users: Sequence[UserState],
    region: Region,
    slots: int,
    slot: float,
    theta: float,
    step: float,
    rng: np.random.Generator,
    mode: str = "search_points",
) -> TrajectoryTape:
    """Record ``slots`` slots of motion starting from the given users."""
    positions = np.empty((slots + 1, len(users), 3), dtype=float)
    speeds = np.empty((slots + 1, len(users)), dtype=float)
    current = list(users)
    for s in range(slots + 1):
        positions[s] = [[u.position.x, u.position.y, u.position.z] for u in current]
        speeds[s] = [u.speed for u in current]
        if s < slots:
            current = advance_users(current, region, slot, rng, theta, step, mode)
    logger.debug("Recorded %d slots of motion for %d users", slots, len(users))
    return TrajectoryTape(positions, speeds)


@dataclass
class LinkModel:
    """Evaluates expected rates and data for every UAV-user pair of a slot."""

    grid: BuildingGrid
    budget: LinkBudget
    slot: float
    handover: float
    theta: float
    step: float
    rician_k: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.handover < self.slot:
            raise ValueError(f"handover {self.handover} must lie in [0, slot={self.slot})")
        sector_count(self.theta)

    @property
    def region(self) -> Region:
        return (self.grid.region_width, self.grid.region_height)

    def search_sets(self, users: Sequence[UserState]) -> List[SearchPointSet]:
        return [
            search_points(u, self.slot, self.theta, self.step, bounds=self.region)
            for u in users
        ]

    def _stacked(
        self, users: Sequence[UserState], sets: Optional[List[SearchPointSet]]
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All search points of all users with owner index and probability."""
        if sets is None:
            sets = self.search_sets(users)
        points = np.concatenate([s.points for s in sets]) if sets else np.zeros((0, 3))
        owner = np.concatenate(
            [np.full(len(s), k, dtype=int) for k, s in enumerate(sets)]
        ) if sets else np.zeros(0, dtype=int)
        prob = np.concatenate(
            [np.full(len(s), s.probability) for s in sets]
        ) if sets else np.zeros(0)
        return points, owner, prob

    def _point_rates(
        self, position: Point3, points: np.ndarray, gains: np.ndarray
    ) -> np.ndarray:
        los = los_mask(position, points, self.grid)
        rates = np.zeros(points.shape[0])
        if np.any(los):
            d = _distances(position, points[los])
            rates[los] = throughput_from_budget(d, gains[los], self.budget)
        return rates

    def rate_matrix(
        self,
        uavs: Sequence[UavState],
        users: Sequence[UserState],
        sets: Optional[List[SearchPointSet]] = None,
    ) -> np.ndarray:
        """M x K matrix of expected rates, bits per second."""
        points, owner, prob = self._stacked(users, sets)
        ones = np.ones(points.shape[0])
        rates = np.zeros((len(uavs), len(users)))
        for m, uav in enumerate(uavs):
            per_point = self._point_rates(uav.position, points, ones)
            rates[m] = np.bincount(owner, weights=prob * per_point, minlength=len(users))
        return rates

    def handover_matrix(
        self, uavs: Sequence[UavState], users: Sequence[UserState]
    ) -> np.ndarray:
        """M x K matrix of the handover indicator a."""
        return np.array(
            [[handover_indicator(uav.id, user) for user in users] for uav in uavs],
            dtype=float,
        ).reshape(len(uavs), len(users))

    def data_matrix(
        self,
        uavs: Sequence[UavState],
        users: Sequence[UserState],
        sets: Optional[List[SearchPointSet]] = None,
    ) -> np.ndarray:
        """M x K matrix of expected slot data, bits."""
        rates = self.rate_matrix(uavs, users, sets)
        return (self.slot - self.handover_matrix(uavs, users) * self.handover) * rates

    def sampled_data(
        self,
        uavs: Sequence[UavState],
        users: Sequence[UserState],
        serving: Sequence[Optional[int]],
        rng: np.random.Generator,
    ) -> np.ndarray:
        """
        Delivered bits per user with sampled small-scale fading.

        Args:
            uavs: UAVs of the slot
            users: Users of the slot
            serving: Index into ``uavs`` of each user's serving UAV, or None
            rng: Fading random source

        Returns:
            Length-K array of bits; unserved users receive 0
        """
        delivered = np.zeros(len(users))
        for k, (user, m) in enumerate(zip(users, serving)):
            if m is None:
                continue
            uav = uavs[m]
            pts = search_points(user, self.slot, self.theta, self.step, bounds=self.region)
            # NLoS points carry zero rate whatever their gain
            gains = np.asarray(sample_gain_sq(True, self.rician_k, rng, len(pts)))
            per_point = self._point_rates(uav.position, pts.points, gains)
            duration = self.slot - handover_indicator(uav.id, user) * self.handover
            delivered[k] = duration * pts.probability * float(np.sum(per_point))
        return delivered
