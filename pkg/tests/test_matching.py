"""
Tests for relocation cost matrices, the Hungarian solver and relocation plans.
"""

import itertools
import math

import numpy as np
import pytest

from packages.uav_planner.energy import EnergyParams, relocation_cost
from packages.uav_planner.environment import Point3
from packages.uav_planner.matching import (
    CostMatrix,
    RelocationInfeasibleError,
    build_cost_matrix,
    has_perfect_matching,
    hungarian,
    identity_plan,
    plan_relocation,
)


def _brute_force(cost: np.ndarray, reachable: np.ndarray):
    """Minimum total and lexicographically smallest optimal permutation."""
    n = cost.shape[0]
    best_total, best_perm = math.inf, None
    for perm in itertools.permutations(range(n)):
        if not all(reachable[i, j] for i, j in enumerate(perm)):
            continue
        total = sum(cost[i, j] for i, j in enumerate(perm))
        if total < best_total:
            best_total, best_perm = total, list(perm)
    return best_total, best_perm


def _random_points(rng: np.random.Generator, n: int, spread: float = 100.0):
    return [
        Point3(float(rng.uniform(0, spread)), float(rng.uniform(0, spread)),
               float(rng.uniform(22, 150)))
        for _ in range(n)
    ]


class TestCostMatrix:
    """Test cost-matrix construction and validation."""

    def test_no_movement_zero_diagonal(self, rng):
        """Test that old = new gives a zero, reachable diagonal."""
        points = _random_points(rng, 4)
        c = build_cost_matrix(points, points, 5.0, [10.0] * 4, EnergyParams())
        assert np.all(np.diag(c.cost) == 0.0)
        assert np.all(np.diag(c.reachable))

    def test_zero_deadline(self, rng):
        """Test that t = 0 leaves only coincident pairs reachable."""
        points = _random_points(rng, 4)
        c = build_cost_matrix(points, points, 0.0, [10.0] * 4, EnergyParams())
        assert np.array_equal(c.reachable, np.eye(4, dtype=bool))

    def test_infinite_deadline(self, rng):
        """Test that t = inf makes every pair reachable."""
        c = build_cost_matrix(_random_points(rng, 5), _random_points(rng, 5), math.inf,
                              [10.0] * 5, EnergyParams())
        assert c.reachable.all()
        assert np.all(np.isfinite(c.cost))

    def test_reach_boundary(self):
        """Test that a flight of exactly t seconds is allowed."""
        old = [Point3(0.0, 0.0, 50.0)]
        new = [Point3(50.0, 0.0, 50.0)]
        assert build_cost_matrix(old, new, 5.0, [10.0], EnergyParams()).reachable[0, 0]
        assert not build_cost_matrix(old, new, 4.9, [10.0], EnergyParams()).reachable[0, 0]

    def test_entries_are_relocation_energy(self):
        """Test that each entry is propulsion energy over the flight time at the UAV speed."""
        old = [Point3(0.0, 0.0, 30.0), Point3(100.0, 0.0, 30.0)]
        new = [Point3(0.0, 40.0, 30.0), Point3(100.0, 30.0, 30.0)]
        c = build_cost_matrix(old, new, math.inf, [10.0, 15.0], EnergyParams())
        assert c.cost[0, 0] == pytest.approx(relocation_cost(40.0, 10.0, EnergyParams()))
        assert c.cost[1, 1] == pytest.approx(relocation_cost(30.0, 15.0, EnergyParams()))

    def test_unreachable_marked_infinite(self):
        """Test that unreachable entries are carried as inf, never as a finite cost."""
        c = CostMatrix(np.ones((2, 2)), np.array([[True, False], [True, True]]))
        assert c.cost[0, 1] == math.inf
        dense = CostMatrix.from_array(np.array([[1.0, np.inf], [2.0, 3.0]]))
        assert not dense.reachable[0, 1]
        assert dense.cost[1, 0] == 2.0

    def test_validation(self):
        """Test shape and sign checks."""
        with pytest.raises(ValueError):
            CostMatrix(np.ones((2, 3)), np.ones((2, 3), dtype=bool))
        with pytest.raises(ValueError):
            CostMatrix(-np.ones((2, 2)), np.ones((2, 2), dtype=bool))
        with pytest.raises(ValueError):
            build_cost_matrix([Point3(0, 0, 0)], [], 1.0, [10.0], EnergyParams())


class TestPerfectMatching:
    """Test the feasibility pre-pass."""

    @pytest.mark.parametrize(
        "mask,expected",
        [
            ([[1, 1, 0], [1, 1, 0], [0, 0, 1]], True),
            ([[1, 0, 0], [1, 0, 0], [1, 1, 1]], False),
            ([[0, 0], [1, 1]], False),
            ([[0, 1], [1, 0]], True),
        ],
    )
    def test_hall_condition(self, mask, expected):
        assert has_perfect_matching(np.array(mask, dtype=bool)) is expected


class TestHungarian:
    """Test the exact assignment solver."""

    def test_identity_favoring(self):
        """Test 0 on the diagonal and 1 elsewhere."""
        result = hungarian(CostMatrix.from_array(np.ones((3, 3)) - np.eye(3)))
        assert result.feasible
        assert result.permutation == [0, 1, 2]
        assert result.total == 0.0

    def test_empty(self):
        result = hungarian(CostMatrix.from_array(np.zeros((0, 0))))
        assert result.feasible and result.permutation == []

    def test_all_unreachable_row(self):
        """Test that a row with no reachable column is infeasible."""
        cost = np.array([[np.inf, np.inf], [1.0, 2.0]])
        result = hungarian(CostMatrix.from_array(cost))
        assert not result.feasible
        assert result.permutation is None

    @pytest.mark.slow
    def test_matches_brute_force(self):
        """Test optimal totals and lexicographic tie-breaking on random instances."""
        rng = np.random.default_rng(2023)
        for _ in range(300):
            n = int(rng.integers(4, 8))
            cost = rng.integers(0, 6, size=(n, n)).astype(float)
            reachable = rng.random((n, n)) < 0.75
            result = hungarian(CostMatrix(cost, reachable))
            best_total, best_perm = _brute_force(cost, reachable)
            if best_perm is None:
                assert not result.feasible
                continue
            assert result.feasible
            assert result.total == best_total
            assert result.permutation == best_perm

    def test_beats_random_permutations(self, rng):
        """Test that no sampled permutation is cheaper than the solver's."""
        cost = rng.uniform(0, 100, size=(7, 7))
        result = hungarian(CostMatrix.from_array(cost))
        assert sorted(result.permutation) == list(range(7))
        for _ in range(10_000):
            perm = rng.permutation(7)
            assert result.total <= cost[np.arange(7), perm].sum() + 1e-9

    def test_scaling_keeps_permutation(self, rng):
        """Test that multiplying every cost by a constant scales the optimum."""
        cost = rng.uniform(0, 10, size=(6, 6))
        base = hungarian(CostMatrix.from_array(cost))
        scaled = hungarian(CostMatrix.from_array(3.5 * cost))
        assert scaled.total == pytest.approx(3.5 * base.total)


class TestPlanRelocation:
    """Test relocation plans."""

    def test_swapped_targets_cost_nothing(self):
        """Test that permuted targets are matched back to the UAVs already there."""
        old = [Point3(0.0, 0.0, 50.0), Point3(100.0, 0.0, 50.0)]
        new = [old[1], old[0]]
        plan = plan_relocation(old, new, 20.0, [10.0, 10.0], EnergyParams())
        assert plan.total_energy == 0.0
        assert plan.targets == old
        assert plan.assignment.tolist() == [[0, 1], [1, 0]]
        assert identity_plan(old, new, [10.0, 10.0], EnergyParams()).total_energy > 0.0

    def test_non_crossing_pairing(self):
        """Test that two UAVs take the shorter, non-crossing routes."""
        old = [Point3(0.0, 0.0, 40.0), Point3(0.0, 100.0, 40.0)]
        new = [Point3(50.0, 90.0, 40.0), Point3(50.0, 10.0, 40.0)]
        plan = plan_relocation(old, new, math.inf, [10.0, 10.0], EnergyParams())
        assert plan.targets[0] == new[1]
        assert plan.targets[1] == new[0]

    def test_single_uav(self):
        """Test the trivial 1 x 1 plan."""
        old = [Point3(0.0, 0.0, 40.0)]
        new = [Point3(30.0, 40.0, 40.0)]
        plan = plan_relocation(old, new, 10.0, [10.0], EnergyParams())
        assert plan.moves[0].distance == pytest.approx(50.0)
        assert plan.total_energy == pytest.approx(relocation_cost(50.0, 10.0, EnergyParams()))

    def test_never_worse_than_identity(self):
        """Test the matched plan against flying UAV j to target j."""
        rng = np.random.default_rng(77)
        for _ in range(100):
            n = int(rng.integers(2, 7))
            old, new = _random_points(rng, n), _random_points(rng, n)
            speeds = list(rng.uniform(5.0, 15.0, n))
            matched = plan_relocation(old, new, math.inf, speeds, EnergyParams())
            direct = identity_plan(old, new, speeds, EnergyParams())
            assert matched.total_energy <= direct.total_energy + 1e-9
            assert matched.assignment.sum(axis=0).tolist() == [1] * n
            assert matched.assignment.sum(axis=1).tolist() == [1] * n

    def test_deadline_infeasible(self):
        """Test that targets out of reach raise."""
        old = [Point3(0.0, 0.0, 40.0), Point3(10.0, 0.0, 40.0)]
        new = [Point3(500.0, 0.0, 40.0), Point3(510.0, 0.0, 40.0)]
        with pytest.raises(RelocationInfeasibleError):
            plan_relocation(old, new, 5.0, [10.0, 10.0], EnergyParams())

    def test_per_uav_energy_params(self):
        """Test that each UAV can carry its own propulsion model."""
        old = [Point3(0.0, 0.0, 40.0), Point3(100.0, 0.0, 40.0)]
        new = [Point3(0.0, 10.0, 40.0), Point3(100.0, 10.0, 40.0)]
        light, heavy = EnergyParams(), EnergyParams(p0=150.0)
        plan = plan_relocation(old, new, math.inf, [10.0, 10.0], [light, heavy])
        assert plan.moves[1].energy > plan.moves[0].energy

    def test_matched_uav_keeps_its_altitude(self):
        """Test that a swapped pairing flies each UAV above its target at its own altitude."""
        old = [Point3(0.0, 0.0, 40.0), Point3(100.0, 0.0, 90.0)]
        new = [Point3(95.0, 0.0, 90.0), Point3(5.0, 0.0, 40.0)]
        plan = plan_relocation(old, new, math.inf, [10.0, 10.0], EnergyParams())
        assert plan.targets == [Point3(5.0, 0.0, 40.0), Point3(95.0, 0.0, 90.0)]
        for move in plan.moves:
            assert move.target.z == move.source.z
            assert move.distance == pytest.approx(5.0)

    def test_altitude_gap_costs_nothing(self):
        """Test that the cost of a pair only counts the ground offset."""
        old = [Point3(0.0, 0.0, 30.0)]
        new = [Point3(30.0, 40.0, 120.0)]
        c = build_cost_matrix(old, new, 5.0, [10.0], EnergyParams())
        assert c.reachable[0, 0]
        assert c.cost[0, 0] == pytest.approx(relocation_cost(50.0, 10.0, EnergyParams()))
        plan = plan_relocation(old, new, 5.0, [10.0], EnergyParams())
        assert plan.targets == [Point3(30.0, 40.0, 30.0)]

    def test_plan_energy_is_brute_force_minimum(self):
        """Test that the plan energy equals the cheapest of all 720 pairings of six UAVs."""
        rng = np.random.default_rng(11)
        for _ in range(20):
            old, new = _random_points(rng, 6), _random_points(rng, 6)
            speeds = list(rng.uniform(5.0, 15.0, 6))
            costs = build_cost_matrix(old, new, math.inf, speeds, EnergyParams())
            best_total, _ = _brute_force(costs.cost, costs.reachable)
            plan = plan_relocation(old, new, math.inf, speeds, EnergyParams())
            assert hungarian(costs).total == best_total
            assert plan.total_energy == pytest.approx(best_total, rel=1e-12)
