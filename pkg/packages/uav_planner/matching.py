"""
Minimum-energy UAV relocation by exact bipartite matching.

Rows of a cost matrix are the target positions, columns are the UAVs at
their current positions. An entry is reachable when the UAV can fly to the
target within the relocation deadline; unreachable entries are carried as an
explicit mask and never take part in arithmetic.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .energy import EnergyParams, relocation_cost
from .environment import Point3

logger = logging.getLogger(__name__)

EnergyLike = Union[EnergyParams, Sequence[EnergyParams]]

# slack on the deadline test; targets projected onto the reach disk must stay reachable
_REACH_TOLERANCE = 1e-9


class RelocationInfeasibleError(ValueError):
    """No relocation permutation respects the deadline for every UAV."""


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Square relocation cost matrix with an explicit reachability mask."""

    cost: np.ndarray
    reachable: np.ndarray

    def __post_init__(self) -> None:
        cost = np.array(self.cost, dtype=float)
        reachable = np.array(self.reachable, dtype=bool)
        if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
            raise ValueError(f"cost matrix must be square, got shape {cost.shape}")
        if reachable.shape != cost.shape:
            raise ValueError("reachability mask must match the cost matrix shape")
        if np.any(cost[reachable] < 0) or not np.all(np.isfinite(cost[reachable])):
            raise ValueError("reachable costs must be finite and non-negative")
        cost = np.where(reachable, cost, np.inf)
        cost.setflags(write=False)
        reachable.setflags(write=False)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "reachable", reachable)

    @property
    def n(self) -> int:
        return int(self.cost.shape[0])

    @classmethod
    def from_array(cls, cost: np.ndarray) -> "CostMatrix":
        """Build from a dense array where ``inf`` or ``nan`` marks unreachable."""
        cost = np.asarray(cost, dtype=float)
        reachable = np.isfinite(cost)
        return cls(np.where(reachable, cost, 0.0), reachable)


@dataclass(frozen=True)
class MatchingResult:
    """Outcome of a matching solve; ``permutation[i]`` is the column of row i."""

    permutation: Optional[List[int]]
    total: float
    feasible: bool


class Move(NamedTuple):
    uav: int
    source: Point3
    target: Point3
    distance: float
    energy: float


@dataclass(frozen=True, eq=False)
class RelocationPlan:
    """Per-UAV targets, the target-by-UAV assignment matrix and the movement energy."""

    targets: List[Point3]
    moves: List[Move]
    assignment: np.ndarray
    total_energy: float


def has_perfect_matching(reachable: np.ndarray) -> bool:
    """Return True if some permutation uses only reachable entries."""
    reachable = np.asarray(reachable, dtype=bool)
    n = reachable.shape[0]
    if n == 0:
        return True
    if not reachable.any(axis=1).all() or not reachable.any(axis=0).all():
        return False
    matched = maximum_bipartite_matching(csr_matrix(reachable.astype(np.int8)), perm_type="column")
    return bool(np.all(matched >= 0))


def _row_order_total(cost: np.ndarray, permutation: Sequence[int]) -> float:
    total = 0.0
    for i, j in enumerate(permutation):
        total += float(cost[i, j])
    return total


def _optimal_total(cost: np.ndarray, reachable: np.ndarray) -> Optional[float]:
    if cost.shape[0] == 0:
        return 0.0
    # linear_sum_assignment accepts inf entries once a finite matching exists
    if not has_perfect_matching(reachable):
        return None
    rows, cols = linear_sum_assignment(cost)
    return _row_order_total(cost, [int(j) for _, j in sorted(zip(rows, cols))])


def hungarian(c: CostMatrix) -> MatchingResult:
    """
    Minimum-cost permutation avoiding unreachable entries.

    Among equal-cost optimal permutations the lexicographically smallest is
    returned: rows are fixed in order, each to the lowest column that still
    completes to an optimum.

    Args:
        c: Square cost matrix

    Returns:
        MatchingResult; ``feasible`` is False when every permutation touches
        an unreachable entry
    """
    n = c.n
    if n == 0:
        return MatchingResult([], 0.0, True)
    best = _optimal_total(c.cost, c.reachable)
    if best is None:
        return MatchingResult(None, math.inf, False)

    tolerance = 1e-9 * max(1.0, abs(best))
    rows_left = list(range(n))
    cols_left = list(range(n))
    permutation = [0] * n
    prefix = 0.0
    for i in range(n):
        rows_left.remove(i)
        for j in sorted(cols_left):
            if not c.reachable[i, j]:
                continue
            rest_cols = [col for col in cols_left if col != j]
            sub = np.ix_(rows_left, rest_cols)
            rest = _optimal_total(c.cost[sub], c.reachable[sub])
            if rest is not None and prefix + c.cost[i, j] + rest <= best + tolerance:
                permutation[i] = j
                prefix += float(c.cost[i, j])
                cols_left.remove(j)
                break

    return MatchingResult(permutation, _row_order_total(c.cost, permutation), True)


def _energy_for(ep: EnergyLike, j: int) -> EnergyParams:
    return ep if isinstance(ep, EnergyParams) else ep[j]


def _as_array(points: Sequence[Point3]) -> np.ndarray:
    return np.array([[p[0], p[1], p[2]] for p in points], dtype=float).reshape(-1, 3)


def build_cost_matrix(
    old: Sequence[Point3],
    new: Sequence[Point3],
    deadline: float,
    speeds: Sequence[float],
    ep: EnergyLike,
) -> CostMatrix:
    """
    Relocation costs: entry (i, j) is the energy for UAV j to fly to target i.

    A UAV keeps its altitude, so it flies to the ground position of target i.

    Args:
        old: Current UAV positions
        new: Target positions
        deadline: Relocation deadline, seconds (``math.inf`` for none)
        speeds: Cruise speed of each UAV, m/s
        ep: Propulsion coefficients, shared or one per UAV

    Returns:
        CostMatrix with entry (i, j) reachable iff UAV j reaches target i within the deadline
    """
    if len(old) != len(new):
        raise ValueError(f"{len(old)} UAV positions but {len(new)} targets")
    if len(speeds) != len(old):
        raise ValueError(f"{len(speeds)} speeds for {len(old)} UAVs")
    if deadline < 0:
        raise ValueError(f"deadline must be non-negative, got {deadline}")

    current = _as_array(old)
    targets = _as_array(new)
    n = len(old)
    # UAVs keep their own altitude, so only the ground offset is flown
    distance = np.linalg.norm(
        targets[:, None, :2] - current[None, :, :2], axis=2
    ).reshape(n, n)
    v = np.asarray(speeds, dtype=float)
    reachable = distance / v[None, :] <= deadline * (1.0 + _REACH_TOLERANCE) + _REACH_TOLERANCE

    cost = np.zeros((n, n))
    for j in range(n):
        cost[:, j] = relocation_cost(distance[:, j], v[j], _energy_for(ep, j))
    return CostMatrix(cost, reachable)


def _plan_from_permutation(
    old: Sequence[Point3],
    new: Sequence[Point3],
    permutation: Sequence[int],
    speeds: Sequence[float],
    ep: EnergyLike,
) -> RelocationPlan:
    n = len(old)
    targets: List[Point3] = list(old)
    assignment = np.zeros((n, n), dtype=int)
    moves: List[Move] = []
    for i, j in enumerate(permutation):
        assignment[i, j] = 1
        targets[j] = Point3(float(new[i][0]), float(new[i][1]), float(old[j][2]))
    total = 0.0
    for j in range(n):
        distance = float(np.linalg.norm(np.subtract(targets[j], old[j])))
        energy = float(relocation_cost(distance, float(speeds[j]), _energy_for(ep, j)))
        moves.append(Move(j, Point3(*map(float, old[j])), targets[j], distance, energy))
        total += energy
    return RelocationPlan(targets, moves, assignment, total)


def plan_relocation(
    old: Sequence[Point3],
    new: Sequence[Point3],
    deadline: float,
    speeds: Sequence[float],
    ep: EnergyLike,
) -> RelocationPlan:
    """
    Energy-efficient movement of UAVs to the new positions.

    Each UAV takes the ground position of its matched target and keeps its
    own altitude.

    Raises:
        RelocationInfeasibleError: No permutation meets the deadline
    """
    costs = build_cost_matrix(old, new, deadline, speeds, ep)
    result = hungarian(costs)
    if not result.feasible or result.permutation is None:
        logger.warning(
            "Relocation infeasible: %d UAVs, deadline %.3f s", costs.n, deadline
        )
        raise RelocationInfeasibleError(
            f"no relocation of {costs.n} UAVs meets the {deadline} s deadline"
        )
    plan = _plan_from_permutation(old, new, result.permutation, speeds, ep)
    logger.debug("Relocation plan %s, %.1f J", result.permutation, plan.total_energy)
    return plan


def identity_plan(
    old: Sequence[Point3],
    new: Sequence[Point3],
    speeds: Sequence[float],
    ep: EnergyLike,
) -> RelocationPlan:
    """Move UAV j straight above target j, without matching or a deadline."""
    if len(old) != len(new):
        raise ValueError(f"{len(old)} UAV positions but {len(new)} targets")
    return _plan_from_permutation(old, new, list(range(len(old))), speeds, ep)
