"""
Tests for priority-aware clustering and the assignment bookkeeping.
"""

import math

import numpy as np
import pytest

from packages.uav_planner.clustering import (
    AssignmentMatrix,
    ClusteringConfig,
    bump_priorities,
    cluster,
    metric_kmeans,
    priority,
    priority_order,
    project_to_reach,
    update_centroid,
    uavs_at,
)
from packages.uav_planner.environment import Point3
from packages.uav_planner.harness import build_world, link_model
from packages.uav_planner.mobility import LinkModel


class TestAssignmentMatrix:
    """Test the user-UAV decision matrix."""

    def test_assign_and_query(self):
        a = AssignmentMatrix(4, [2, 1])
        a.assign(0, 0)
        a.assign(2, 1)
        assert a.serving(0) == 0 and a.serving(1) is None
        assert a.members(0) == [0]
        assert a.is_full(1) and not a.is_full(0)
        assert a.unserved_count() == 2
        assert a.is_feasible()

    def test_user_served_once(self):
        """Test that a second server for the same user is refused."""
        a = AssignmentMatrix(2, [2, 2])
        a.assign(0, 0)
        with pytest.raises(ValueError):
            a.assign(0, 1)

    def test_capacity_enforced(self):
        """Test that a full UAV refuses more users."""
        a = AssignmentMatrix(3, [1])
        a.assign(0, 0)
        with pytest.raises(ValueError):
            a.assign(1, 0)

    def test_total_data(self):
        """Test summing the M x K data matrix over served pairs."""
        a = AssignmentMatrix(3, [2, 2])
        a.assign(0, 1)
        a.assign(2, 0)
        data = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        assert a.total_data(data) == 4.0 + 3.0


class TestPriority:
    """Test priorities and the visiting order."""

    @pytest.mark.parametrize("waited,deadline,expected", [(0, 5, 0.0), (5, 5, 1.0), (2, 4, 0.5)])
    def test_values(self, waited, deadline, expected):
        assert priority(waited, deadline) == expected

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            priority(1.0, 0.0)
        with pytest.raises(ValueError):
            priority(-1.0, 4.0)

    def test_order_descending_with_id_ties(self, make_user):
        """Test that ties fall back to ascending user id."""
        users = [
            make_user(5, priority=0.2),
            make_user(1, priority=0.7),
            make_user(3, priority=0.2),
            make_user(0, priority=0.0),
        ]
        assert priority_order(users) == [1, 2, 0, 3]


class TestUpdateCentroid:
    """Test the data-weighted centroid."""

    def test_single_member(self):
        assert update_centroid(np.array([[3.0, 4.0]]), np.array([2.0])) == (3.0, 4.0)

    def test_equal_weights_midpoint(self):
        assert update_centroid(np.array([[0.0, 0.0], [2.0, 0.0]]), np.ones(2)) == (1.0, 0.0)

    def test_weighted(self):
        """Test weights 1 and 3 at (0,0) and (4,0)."""
        x, y = update_centroid(np.array([[0.0, 0.0], [4.0, 0.0]]), np.array([1.0, 3.0]))
        assert (x, y) == pytest.approx((3.0, 0.0))

    def test_no_members_or_no_weight(self):
        """Test that the caller keeps its previous centroid."""
        assert update_centroid(np.zeros((0, 2)), np.zeros(0)) is None
        assert update_centroid(np.array([[1.0, 1.0]]), np.array([0.0])) is None

    def test_inside_bounding_box(self, rng):
        """Test that the centroid lies within the members' extent."""
        pts = rng.uniform(0, 100, size=(20, 3))
        x, y = update_centroid(pts, rng.uniform(0, 5, 20))
        assert pts[:, 0].min() <= x <= pts[:, 0].max()
        assert pts[:, 1].min() <= y <= pts[:, 1].max()

    def test_rejects_negative_weight(self):
        with pytest.raises(ValueError):
            update_centroid(np.array([[0.0, 0.0]]), np.array([-1.0]))


class TestProjectToReach:
    def test_inside_untouched(self):
        p = Point3(3.0, 4.0, 50.0)
        assert project_to_reach(p, Point3(0.0, 0.0, 50.0), 10.0) == p

    def test_outside_pulled_to_rim(self):
        projected = project_to_reach(Point3(30.0, 40.0, 50.0), Point3(0.0, 0.0, 50.0), 10.0)
        assert (projected.x, projected.y) == pytest.approx((6.0, 8.0))


class TestCluster:
    """Test the clustering loop."""

    def test_all_nlos_assigns_nobody(self, make_grid, make_user, make_uav, channel):
        """Test that a city of tall blocks leaves centroids where they started."""
        grid = make_grid([[200.0] * 10 for _ in range(10)])
        link = LinkModel(grid, channel.budget(), 1.0, 0.1, math.pi / 4, 1.0)
        users = [make_user(k, 10.0 * k + 5.0, 45.0) for k in range(5)]
        uavs = [make_uav(0, 20.0, 20.0), make_uav(1, 80.0, 80.0)]
        state = cluster(users, uavs, link, ClusteringConfig())
        assert state.assignment.unserved_count() == 5
        assert state.centroids == [uav.position for uav in uavs]
        assert state.converged and state.iterations == 1

    def test_capacity_never_binds(self, flat_link, make_user, make_uav):
        """Test that one roomy UAV over open ground takes every user."""
        users = [make_user(k, 10.0 + 15.0 * k, 40.0) for k in range(5)]
        state = cluster(users, [make_uav(0, capacity=10)], flat_link, ClusteringConfig())
        assert state.assignment.unserved_count() == 0

    def test_two_single_seat_uavs_three_users(self, flat_link, make_user, make_uav):
        """Test that the two highest-priority users get distinct UAVs."""
        users = [
            make_user(0, 25.0, 50.0, priority=0.9),
            make_user(1, 30.0, 50.0, priority=0.5),
            make_user(2, 75.0, 50.0, priority=0.1),
        ]
        uavs = [make_uav(0, 20.0, 50.0, capacity=1), make_uav(1, 80.0, 50.0, capacity=1)]
        state = cluster(users, uavs, flat_link, ClusteringConfig())
        assert state.assignment.serving(0) == 0
        assert state.assignment.serving(1) == 1
        assert state.assignment.serving(2) is None
        assert state.converged

    def test_constraints_and_iteration_cap(self, small_scenario):
        """Test feasibility and the iteration bound on a built-up city."""
        world = build_world(small_scenario)
        link = link_model(small_scenario, world.grid)
        cfg = ClusteringConfig(max_iter=3)
        state = cluster(world.users, world.uavs, link, cfg)
        assert state.assignment.is_feasible()
        assert state.iterations <= 3
        for m, uav in enumerate(world.uavs):
            assert state.assignment.load(m) <= uav.capacity

    def test_reach_limits_centroids(self, flat_link, make_user, make_uav):
        """Test that centroids stay within the flight reach of their UAV."""
        users = [make_user(k, 90.0, 90.0 - k) for k in range(4)]
        uavs = [make_uav(0, 10.0, 10.0)]
        state = cluster(users, uavs, flat_link, ClusteringConfig(), reach=[5.0])
        c = state.centroids[0]
        assert math.hypot(c.x - 10.0, c.y - 10.0) <= 5.0 + 1e-9
        assert c.z == 50.0

    def test_cap_keeps_start_when_nothing_better_was_evaluated(self, flat_link, make_user, make_uav):
        """Test that a run stopped after one iteration returns the start positions."""
        users = [make_user(k, 60.0 + 2.0 * k, 50.0) for k in range(3)]
        uavs = [make_uav(0, 20.0, 50.0)]
        state = cluster(users, uavs, flat_link, ClusteringConfig(max_iter=1))
        assert not state.converged and state.iterations == 1
        assert state.centroids == [uavs[0].position]
        assert state.expected_data == state.stay_data > 0.0
        assert state.assignment.unserved_count() == 0

    def test_cap_returns_richest_evaluated_placement(self, small_scenario):
        """Test that the returned placement carries the data it reports, at least the start's."""
        world = build_world(small_scenario)
        link = link_model(small_scenario, world.grid)
        state = cluster(world.users, world.uavs, link, ClusteringConfig(max_iter=4, tol=1e-12))
        data = link.data_matrix(uavs_at(world.uavs, state.centroids), world.users)
        assert state.assignment.total_data(data) == pytest.approx(state.expected_data)
        if not state.converged:
            assert state.expected_data >= state.stay_data
        assert state.assignment.is_feasible()

    def test_reach_length_checked(self, flat_link, make_user, make_uav):
        with pytest.raises(ValueError):
            cluster([make_user()], [make_uav()], flat_link, ClusteringConfig(), reach=[1.0, 2.0])


class TestBumpPriorities:
    """Test the wait clocks after a slot."""

    def test_served_users_unchanged_when_fresh(self, make_user):
        users = [make_user(0), make_user(1)]
        a = AssignmentMatrix(2, [2])
        a.assign(0, 0)
        a.assign(1, 0)
        bump_priorities(users, a, 1.0)
        assert [u.priority for u in users] == [0.0, 0.0]

    def test_unserved_gains_slot_over_deadline(self, make_user):
        """Test +0.1 per 1 s slot with a 10 s deadline, cumulating."""
        users = [make_user(0, deadline=10.0)]
        a = AssignmentMatrix(1, [1])
        bump_priorities(users, a, 1.0)
        assert users[0].priority == pytest.approx(0.1)
        bump_priorities(users, a, 1.0)
        assert users[0].priority == pytest.approx(0.2)
        assert users[0].delay == 2.0

    def test_service_resets_clock_not_delay(self, make_user):
        users = [make_user(0, deadline=4.0, waited=2.0, priority=0.5, delay=2.0)]
        a = AssignmentMatrix(1, [1])
        a.assign(0, 0)
        bump_priorities(users, a, 1.0)
        assert (users[0].waited, users[0].priority, users[0].delay) == (0.0, 0.0, 2.0)

    def test_no_reset_keeps_clock(self, make_user):
        users = [make_user(0, deadline=4.0, waited=2.0, priority=0.5)]
        a = AssignmentMatrix(1, [1])
        a.assign(0, 0)
        bump_priorities(users, a, 1.0, reset_on_service=False)
        assert users[0].priority == 0.5


class TestMetricKmeans:
    """Test the uncapacitated baseline placement."""

    def test_pathloss_joins_nearest(self, flat_link, make_user, make_uav):
        users = [make_user(0, 12.0, 10.0), make_user(1, 88.0, 90.0), make_user(2, 15.0, 20.0)]
        uavs = [make_uav(0, 10.0, 10.0), make_uav(1, 90.0, 90.0)]
        state = metric_kmeans(users, uavs, flat_link, "pathloss", max_iter=1)
        assert state.assignment.serving_indices() == [0, 1, 0]

    def test_throughput_labels(self, flat_link, make_user, make_uav):
        users = [make_user(0, 12.0, 10.0), make_user(1, 88.0, 90.0)]
        uavs = [make_uav(0, 10.0, 10.0), make_uav(1, 90.0, 90.0)]
        state = metric_kmeans(users, uavs, flat_link, "throughput")
        assert state.assignment.serving_indices() == [0, 1]
        assert state.centroids[0].x == pytest.approx(12.0)

    def test_unknown_metric(self, flat_link, make_user, make_uav):
        with pytest.raises(ValueError):
            metric_kmeans([make_user()], [make_uav()], flat_link, "snr")
