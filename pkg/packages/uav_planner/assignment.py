"""
Per-slot user-UAV assignment.

``greedy_assign`` places every user on its best UAV, trims over-full UAVs to
their highest-priority users and re-homes the spilled users on the Free UAV
where they lose the least expected data. The best-metric and balanced
K-means baselines live here too so every scheme shares the same
``AssignmentMatrix`` output.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .clustering import (
    AssignmentMatrix,
    bump_priorities,
    project_to_reach,
    update_centroid,
)
from .environment import Point3
from .mobility import LinkModel, UavState, UserState

logger = logging.getLogger(__name__)

CAPACITY_MODES = ("truncate", "priority")
BEST_METRICS = ("pathloss", "throughput")


def _best_uavs(scores: np.ndarray) -> np.ndarray:
    """Per-user argmax over UAVs, lowest UAV index on ties."""
    return np.argmax(scores, axis=0)


def _by_priority(members: Sequence[int], priorities: Sequence[float], ids: Sequence[int]) -> List[int]:
    return sorted(members, key=lambda k: (-priorities[k], ids[k]))


def assign_by_sacrifice(
    data: np.ndarray,
    priorities: Sequence[float],
    capacities: Sequence[int],
    user_ids: Optional[Sequence[int]] = None,
    uav_ids: Optional[Sequence[int]] = None,
) -> AssignmentMatrix:
    """
    Capacity-constrained assignment on a precomputed data matrix.

    Args:
        data: M x K matrix of expected slot data in bits
        priorities: Length-K user priorities
        capacities: Length-M UAV capacities
        user_ids: Tie-break ids of users (default: column index)
        uav_ids: Tie-break ids of UAVs (default: row index)

    Returns:
        Feasible AssignmentMatrix
    """
    data = np.asarray(data, dtype=float)
    num_uavs, num_users = data.shape
    if len(priorities) != num_users or len(capacities) != num_uavs:
        raise ValueError("priorities and capacities must match the data matrix shape")
    user_ids = list(range(num_users)) if user_ids is None else list(user_ids)
    uav_ids = list(range(num_uavs)) if uav_ids is None else list(uav_ids)

    assignment = AssignmentMatrix(num_users, capacities)
    if num_users == 0 or num_uavs == 0:
        return assignment

    best = _best_uavs(data)
    best_data = data[best, np.arange(num_users)]

    # users with no data anywhere stay unserved
    groups: List[List[int]] = [[] for _ in range(num_uavs)]
    for k in range(num_users):
        if best_data[k] > 0.0:
            groups[int(best[k])].append(k)

    free = [len(groups[m]) < capacities[m] for m in range(num_uavs)]
    spilled: List[int] = []
    for m, members in enumerate(groups):
        if free[m]:
            kept = members
        else:
            ranked = _by_priority(members, priorities, user_ids)
            kept, rest = ranked[: capacities[m]], ranked[capacities[m] :]
            spilled.extend(rest)
        for k in kept:
            assignment.assign(k, m)

    free_uavs = [m for m in range(num_uavs) if free[m]]
    pairs: List[Tuple[float, int, int, int, int]] = []
    for k in spilled:
        for m in free_uavs:
            sacrifice = float(best_data[k] - data[m, k])
            pairs.append((sacrifice, user_ids[k], uav_ids[m], k, m))
    pairs.sort()

    pending = set(spilled)
    for _, _, _, k, m in pairs:
        if not pending:
            break
        if k not in pending or not free[m]:
            continue
        pending.discard(k)
        if data[m, k] <= 0.0:
            continue
        assignment.assign(k, m)
        if assignment.is_full(m):
            free[m] = False

    if pending:
        logger.debug("%d spilled users left without a Free UAV", len(pending))
    return assignment


def greedy_assign(
    users: Sequence[UserState],
    uavs: Sequence[UavState],
    link: LinkModel,
    bump: bool = True,
    reset_on_service: bool = True,
    data: Optional[np.ndarray] = None,
) -> AssignmentMatrix:
    """
    Sacrifice-based user-UAV assignment for one slot.

    Args:
        users: Users at the start of the slot
        uavs: UAVs at their macro-slot positions
        link: Link evaluator
        bump: Advance wait clocks and priorities of unserved users afterwards
        reset_on_service: Reset the wait clock of served users when bumping
        data: Precomputed M x K data matrix, computed from ``link`` if omitted

    Returns:
        AssignmentMatrix satisfying both capacity constraints
    """
    if data is None:
        data = link.data_matrix(uavs, users)
    assignment = assign_by_sacrifice(
        data,
        [u.priority for u in users],
        [uav.capacity for uav in uavs],
        [u.id for u in users],
        [uav.id for uav in uavs],
    )
    if bump:
        bump_priorities(users, assignment, link.slot, reset_on_service)
    return assignment


def best_metric_from_scores(
    scores: np.ndarray,
    data: np.ndarray,
    capacities: Sequence[int],
    mode: str = "truncate",
    priorities: Optional[Sequence[float]] = None,
    user_ids: Optional[Sequence[int]] = None,
) -> AssignmentMatrix:
    """
    Put each user on its best-scoring UAV and cut over-full UAVs down to capacity.

    ``truncate`` keeps the best-scoring users of a full UAV, ``priority``
    keeps its highest-priority users. A user whose chosen link carries no
    data is left unserved.
    """
    if mode not in CAPACITY_MODES:
        raise ValueError(f"unknown capacity mode '{mode}', expected one of {CAPACITY_MODES}")
    scores = np.asarray(scores, dtype=float)
    num_uavs, num_users = scores.shape
    user_ids = list(range(num_users)) if user_ids is None else list(user_ids)
    if mode == "priority" and priorities is None:
        raise ValueError("priority capacity mode needs user priorities")
    ranks = [] if priorities is None else [float(p) for p in priorities]

    assignment = AssignmentMatrix(num_users, capacities)
    if num_users == 0 or num_uavs == 0:
        return assignment

    best = _best_uavs(scores)
    for m in range(num_uavs):
        members = [k for k in range(num_users) if best[k] == m and data[m, k] > 0.0]
        if mode == "truncate":
            ranked = sorted(members, key=lambda k: (-scores[m, k], user_ids[k]))
        else:
            ranked = _by_priority(members, ranks, user_ids)
        for k in ranked[: capacities[m]]:
            assignment.assign(k, m)
    return assignment


def _distance_matrix(uavs: Sequence[UavState], users: Sequence[UserState]) -> np.ndarray:
    u = np.array([[p.position.x, p.position.y, p.position.z] for p in uavs], dtype=float).reshape(-1, 3)
    k = np.array([[p.position.x, p.position.y, p.position.z] for p in users], dtype=float).reshape(-1, 3)
    return np.linalg.norm(u[:, None, :] - k[None, :, :], axis=2)


def baseline_best_metric(
    users: Sequence[UserState],
    uavs: Sequence[UavState],
    link: LinkModel,
    metric: str = "throughput",
    capacity_mode: str = "truncate",
    data: Optional[np.ndarray] = None,
) -> AssignmentMatrix:
    """
    Best-metric baseline: every user picks its best UAV, no redistribution.

    Args:
        users: Users at the start of the slot
        uavs: UAVs at their macro-slot positions
        link: Link evaluator
        metric: ``pathloss`` (nearest UAV) or ``throughput`` (most data)
        capacity_mode: ``truncate`` or ``priority``
        data: Precomputed M x K data matrix

    Returns:
        AssignmentMatrix; users dropped by a full UAV are unserved
    """
    if metric not in BEST_METRICS:
        raise ValueError(f"unknown metric '{metric}', expected one of {BEST_METRICS}")
    if data is None:
        data = link.data_matrix(uavs, users)
    scores = -_distance_matrix(uavs, users) if metric == "pathloss" else data
    return best_metric_from_scores(
        scores,
        data,
        [uav.capacity for uav in uavs],
        capacity_mode,
        [u.priority for u in users],
        [u.id for u in users],
    )


def balanced_partition(
    user_xy: np.ndarray, centroid_xy: np.ndarray, capacity: Sequence[int]
) -> np.ndarray:
    """
    Balanced assignment of users to UAV slots at fixed centroids.

    Every UAV is replicated ``capacity[m]`` times and users are matched to
    slots by minimum total squared ground distance.

    Returns:
        Length-K array of UAV indices, -1 for users left over when the slots
        run out
    """
    user_xy = np.asarray(user_xy, dtype=float).reshape(-1, 2)
    centroid_xy = np.asarray(centroid_xy, dtype=float).reshape(-1, 2)
    labels = np.full(user_xy.shape[0], -1, dtype=int)
    slot_owner = np.repeat(np.arange(centroid_xy.shape[0]), np.asarray(capacity, dtype=int))
    if user_xy.shape[0] == 0 or slot_owner.size == 0:
        return labels

    diff = user_xy[:, None, :] - centroid_xy[slot_owner][None, :, :]
    cost = np.sum(diff * diff, axis=2)
    rows, cols = linear_sum_assignment(cost)
    labels[rows] = slot_owner[cols]
    return labels


def baseline_balanced_kmeans(
    users: Sequence[UserState],
    uavs: Sequence[UavState],
    max_iter: int = 50,
    tol: float = 0.1,
    reach: Optional[Sequence[float]] = None,
) -> Tuple[List[Point3], AssignmentMatrix]:
    """
    Balanced K-means placement ignoring line of sight.

    Each iteration partitions users over UAV slots with ``balanced_partition``
    and moves every centroid to the plain mean of its members.

    Returns:
        Centroids (UAV altitudes kept) and the final balanced assignment
    """
    xy = np.array([[u.position.x, u.position.y] for u in users], dtype=float).reshape(-1, 2)
    capacities = [uav.capacity for uav in uavs]
    anchors = [uav.position for uav in uavs]
    centroids = list(anchors)
    labels = np.full(len(users), -1, dtype=int)

    for iteration in range(1, max_iter + 1):
        labels = balanced_partition(xy, [[c.x, c.y] for c in centroids], capacities)
        updated: List[Point3] = []
        for m, current in enumerate(centroids):
            members = np.nonzero(labels == m)[0]
            mean = update_centroid(xy[members], np.ones(members.size))
            if mean is None:
                updated.append(current)
                continue
            target = Point3(mean[0], mean[1], current.z)
            updated.append(project_to_reach(target, anchors[m], None if reach is None else reach[m]))
        shift = max(
            (math.hypot(a.x - b.x, a.y - b.y) for a, b in zip(centroids, updated)),
            default=0.0,
        )
        centroids = updated
        if shift < tol:
            logger.debug("Balanced K-means converged after %d iterations", iteration)
            break

    assignment = AssignmentMatrix(len(users), capacities)
    for k, m in enumerate(labels):
        if m >= 0:
            assignment.assign(k, int(m))
    return centroids, assignment


def balanced_assign(
    users: Sequence[UserState],
    uavs: Sequence[UavState],
    data: np.ndarray,
) -> AssignmentMatrix:
    """Per-slot balanced assignment at the current UAV positions; zero-data links are dropped."""
    xy = np.array([[u.position.x, u.position.y] for u in users], dtype=float).reshape(-1, 2)
    labels = balanced_partition(
        xy, [[uav.position.x, uav.position.y] for uav in uavs], [uav.capacity for uav in uavs]
    )
    assignment = AssignmentMatrix(len(users), [uav.capacity for uav in uavs])
    for k, m in enumerate(labels):
        if m >= 0 and data[m, k] > 0.0:
            assignment.assign(k, int(m))
    return assignment
