"""
Priority-aware, capacity-limited clustering of users around UAVs.

At every macro-slot boundary users are visited in descending priority and
handed to the Free UAV offering them the most expected data; centroids then
move to the data-weighted mean of their members. The loop repeats until the
centroids settle or the iteration cap is hit; a run stopped by the cap
returns the evaluated placement that carried the most expected data.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .environment import Point3
from .mobility import LinkModel, UavState, UserState

logger = logging.getLogger(__name__)

KMEANS_METRICS = ("pathloss", "throughput")


class ClusteringConfig(BaseModel):
    """Stopping rule and wait-clock policy of the clustering stage."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    tol: float = Field(default=0.1, gt=0, description="Centroid displacement to stop, m")
    max_iter: int = Field(default=50, ge=1, description="Iteration cap")
    reset_wait_on_service: bool = Field(
        default=True, description="Reset a user's wait clock when it is served"
    )


class AssignmentMatrix:
    """
    Binary user-UAV decision matrix with capacity bookkeeping.

    ``entries[k, m]`` is True when UAV m serves user k. Every user has at most
    one serving UAV and UAV m serves at most ``capacities[m]`` users.
    """

    def __init__(self, num_users: int, capacities: Sequence[int]):
        self.capacities = [int(c) for c in capacities]
        if any(c < 0 for c in self.capacities):
            raise ValueError("capacities must be non-negative")
        self.entries = np.zeros((num_users, len(self.capacities)), dtype=bool)
        self._load = [0] * len(self.capacities)
        self._serving: List[Optional[int]] = [None] * num_users

    @property
    def num_users(self) -> int:
        return int(self.entries.shape[0])

    @property
    def num_uavs(self) -> int:
        return int(self.entries.shape[1])

    def load(self, m: int) -> int:
        return self._load[m]

    def is_full(self, m: int) -> bool:
        return self._load[m] >= self.capacities[m]

    def serving(self, k: int) -> Optional[int]:
        """Index of the UAV serving user k, or None."""
        return self._serving[k]

    def serving_indices(self) -> List[Optional[int]]:
        return list(self._serving)

    def assign(self, k: int, m: int) -> None:
        if self._serving[k] is not None:
            raise ValueError(f"user {k} is already served by UAV {self._serving[k]}")
        if self.is_full(m):
            raise ValueError(f"UAV {m} is at capacity {self.capacities[m]}")
        self.entries[k, m] = True
        self._serving[k] = m
        self._load[m] += 1

    def members(self, m: int) -> List[int]:
        return [int(k) for k in np.nonzero(self.entries[:, m])[0]]

    def served_mask(self) -> np.ndarray:
        return self.entries.any(axis=1)

    def unserved_count(self) -> int:
        return int(self.num_users - self.entries.sum())

    def is_feasible(self) -> bool:
        """Check both constraints of the per-slot assignment problem."""
        per_user = self.entries.sum(axis=1)
        per_uav = self.entries.sum(axis=0)
        return bool(
            np.all(per_user <= 1)
            and np.all(per_uav <= np.asarray(self.capacities))
        )

    def total_data(self, data: np.ndarray) -> float:
        """Sum of ``data[m, k]`` over served pairs of an M x K data matrix."""
        return float(np.sum(data.T[self.entries]))


@dataclass(eq=False)
class ClusterState:
    """Centroids and assignment returned by a clustering run."""

    centroids: List[Point3]
    assignment: AssignmentMatrix
    iterations: int
    converged: bool
    # expected slot data of the returned assignment and of the start positions
    expected_data: float = 0.0
    stay_data: float = 0.0


def priority(waited: float, deadline: float) -> float:
    """Priority of a user: time waited over its deadline."""
    if deadline <= 0:
        raise ValueError(f"deadline must be positive, got {deadline}")
    if waited < 0:
        raise ValueError(f"waited must be non-negative, got {waited}")
    return waited / deadline


def update_centroid(
    positions: np.ndarray, weights: np.ndarray
) -> Optional[Tuple[float, float]]:
    """
    Data-weighted mean of member ground positions.

    Args:
        positions: (n, 2) or (n, 3) member positions; only x and y are used
        weights: Length-n non-negative weights (expected slot data)

    Returns:
        (x, y), or None when there are no members or all weights are zero
    """
    positions = np.asarray(positions, dtype=float)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if positions.size == 0:
        return None
    positions = np.atleast_2d(positions)
    if positions.shape[0] != weights.shape[0]:
        raise ValueError(f"{positions.shape[0]} members but {weights.shape[0]} weights")
    if np.any(weights < 0):
        raise ValueError("centroid weights must be non-negative")
    total = float(weights.sum())
    if total <= 0.0:
        return None
    x = float(np.dot(weights, positions[:, 0]) / total)
    y = float(np.dot(weights, positions[:, 1]) / total)
    return x, y


def priority_order(users: Sequence[UserState]) -> List[int]:
    """User indices by descending priority, ties by ascending id."""
    return sorted(range(len(users)), key=lambda k: (-users[k].priority, users[k].id))


def _user_positions(users: Sequence[UserState]) -> np.ndarray:
    return np.array([[u.position.x, u.position.y] for u in users], dtype=float).reshape(-1, 2)


def project_to_reach(
    point: Point3, anchor: Point3, radius: Optional[float]
) -> Point3:
    """Pull a ground position back onto the disk of ``radius`` around ``anchor``."""
    if radius is None:
        return point
    dx = point.x - anchor.x
    dy = point.y - anchor.y
    dist = math.hypot(dx, dy)
    if dist <= radius:
        return point
    scale = radius / dist
    return Point3(anchor.x + dx * scale, anchor.y + dy * scale, point.z)


def uavs_at(uavs: Sequence[UavState], centroids: Sequence[Point3]) -> List[UavState]:
    """Copies of the UAVs placed at the given positions."""
    return [replace(uav, position=c) for uav, c in zip(uavs, centroids)]


def _displacement(before: Sequence[Point3], after: Sequence[Point3]) -> float:
    if not before:
        return 0.0
    return max(math.hypot(a.x - b.x, a.y - b.y) for a, b in zip(before, after))


def _greedy_pass(
    data: np.ndarray, order: Sequence[int], capacities: Sequence[int]
) -> AssignmentMatrix:
    """One assignment sweep: each user takes its best Free UAV if it offers data."""
    num_uavs, num_users = data.shape
    assignment = AssignmentMatrix(num_users, capacities)
    free = np.array([c > 0 for c in capacities], dtype=bool)
    for k in order:
        if not free.any():
            break
        candidates = np.where(free, data[:, k], -np.inf)
        m = int(np.argmax(candidates))
        if candidates[m] <= 0.0:
            continue
        assignment.assign(k, m)
        if assignment.is_full(m):
            free[m] = False
    return assignment


def cluster(
    users: Sequence[UserState],
    uavs: Sequence[UavState],
    link: LinkModel,
    cfg: ClusteringConfig,
    reach: Optional[Sequence[float]] = None,
) -> ClusterState:
    """
    Priority-aware capacity-limited clustering.

    Args:
        users: Users at the macro-slot boundary, priorities current
        uavs: UAVs at their macro-slot start positions
        link: Link evaluator for expected slot data
        cfg: Tolerance and iteration cap
        reach: Optional per-UAV radius; centroids are kept within it of the
            UAV's start position so the plain relocation meets the deadline

    Returns:
        ClusterState (altitude of each UAV unchanged). On convergence it
        holds the last iteration's assignment and the updated centroids; at
        the iteration cap it holds the evaluated centroids and assignment
        with the largest total expected data, the start positions included.
    """
    if reach is not None and len(reach) != len(uavs):
        raise ValueError(f"{len(reach)} reach radii for {len(uavs)} UAVs")

    order = priority_order(users)
    capacities = [uav.capacity for uav in uavs]
    sets = link.search_sets(users)
    xy = _user_positions(users)

    anchors = [uav.position for uav in uavs]
    centroids = list(anchors)
    assignment = AssignmentMatrix(len(users), capacities)
    converged = False
    iterations = 0
    total = 0.0
    stay_data = 0.0
    best: Optional[Tuple[float, List[Point3], AssignmentMatrix]] = None

    for iterations in range(1, cfg.max_iter + 1):
        data = link.data_matrix(uavs_at(uavs, centroids), users, sets)
        assignment = _greedy_pass(data, order, capacities)
        total = assignment.total_data(data)
        if iterations == 1:
            stay_data = total
        # strict comparison keeps the earliest iterate on ties
        if best is None or total > best[0]:
            best = (total, list(centroids), assignment)

        updated: List[Point3] = []
        for m, current in enumerate(centroids):
            members = assignment.members(m)
            mean = update_centroid(xy[members], data[m, members])
            if mean is None:
                updated.append(current)
                continue
            target = Point3(mean[0], mean[1], current.z)
            updated.append(project_to_reach(target, anchors[m], None if reach is None else reach[m]))

        shift = _displacement(centroids, updated)
        centroids = updated
        logger.debug("Clustering iteration %d: max centroid shift %.3f m", iterations, shift)
        if shift < cfg.tol:
            converged = True
            break

    if converged or best is None:
        return ClusterState(centroids, assignment, iterations, converged, total, stay_data)

    best_total, best_centroids, best_assignment = best
    logger.warning(
        "Clustering stopped at the %d-iteration cap; keeping the placement with %.4g bits",
        cfg.max_iter,
        best_total,
    )
    return ClusterState(
        best_centroids, best_assignment, iterations, converged, best_total, stay_data
    )


def bump_priorities(
    users: Sequence[UserState],
    assignment: AssignmentMatrix,
    slot: float,
    reset_on_service: bool = True,
) -> None:
    """
    Advance wait clocks after a slot.

    Unserved users gain ``slot`` seconds of wait and delay and slot/deadline of
    priority. Served users have their wait clock and priority reset when
    ``reset_on_service`` is set.
    """
    served = assignment.served_mask()
    for k, user in enumerate(users):
        if served[k]:
            if reset_on_service:
                user.waited = 0.0
                user.priority = 0.0
            continue
        user.waited += slot
        user.delay += slot
        user.priority = priority(user.waited, user.deadline)


def metric_kmeans(
    users: Sequence[UserState],
    uavs: Sequence[UavState],
    link: LinkModel,
    metric: str,
    max_iter: int = 50,
    tol: float = 0.1,
    reach: Optional[Sequence[float]] = None,
) -> ClusterState:
    """
    Uncapacitated K-means placement used by the best-metric baseline.

    With ``pathloss`` every user joins its nearest UAV and centroids are plain
    means; with ``throughput`` every user joins the UAV offering it the most
    expected data and centroids are data-weighted means. Centroids keep
    their UAV's altitude and honour ``reach`` like ``cluster``.
    """
    if metric not in KMEANS_METRICS:
        raise ValueError(f"unknown metric '{metric}', expected one of {KMEANS_METRICS}")

    xy = _user_positions(users)
    user_xyz = np.array(
        [[u.position.x, u.position.y, u.position.z] for u in users], dtype=float
    ).reshape(-1, 3)
    sets = link.search_sets(users) if metric == "throughput" else None
    anchors = [uav.position for uav in uavs]
    centroids = list(anchors)
    labels = np.zeros(len(users), dtype=int)
    weights = np.ones(len(users))
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        if metric == "pathloss":
            c = np.array([[p.x, p.y, p.z] for p in centroids], dtype=float)
            dist = np.linalg.norm(user_xyz[:, None, :] - c[None, :, :], axis=2)
            labels = np.argmin(dist, axis=1) if len(users) else labels
        else:
            data = link.data_matrix(uavs_at(uavs, centroids), users, sets)
            labels = np.argmax(data, axis=0) if len(users) else labels
            weights = data[labels, np.arange(len(users))]

        updated: List[Point3] = []
        for m, current in enumerate(centroids):
            members = np.nonzero(labels == m)[0]
            mean = update_centroid(xy[members], weights[members])
            if mean is None:
                updated.append(current)
                continue
            target = Point3(mean[0], mean[1], current.z)
            updated.append(project_to_reach(target, anchors[m], None if reach is None else reach[m]))

        shift = _displacement(centroids, updated)
        centroids = updated
        if shift < tol:
            converged = True
            break

    assignment = AssignmentMatrix(len(users), [len(users)] * len(uavs))
    for k, m in enumerate(labels):
        assignment.assign(k, int(m))
    return ClusterState(centroids, assignment, iterations, converged)
