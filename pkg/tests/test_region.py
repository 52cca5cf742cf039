"""Tests for the exhaustive rate-region oracles."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from powerpacking.core import NetworkConfig, link_rates
from powerpacking.region import (
    RegionSample,
    boundary_grid,
    compose_frame_from_mixture,
    conv_hull_weights,
    coverage_deficit,
    enumerate_s1,
    enumerate_sm,
    hull_pareto_polyline,
    in_conv_hull,
    in_coord_convex,
    pareto_boundary,
    sample_feasible_target,
    sample_from_closure,
    sample_pc_region,
    sample_repulsive_rates,
)

LN11 = float(np.log(11.0))


def unit_net(n=2):
    return NetworkConfig(n, np.ones((n, n)), 0.1, 1.0)


def steep_net():
    return NetworkConfig(2, np.array([[2000.0, 0.4], [0.4, 0.6]]), 0.1, 1.0)


def rows_as_set(points, decimals=9):
    return {tuple(v) for v in np.round(points, decimals)}


class TestRegionSample:
    def test_rejects_unknown_provenance(self):
        with pytest.raises(ValueError):
            RegionSample(np.zeros((1, 2)), "guess")

    def test_rejects_negative_rates(self):
        with pytest.raises(ValueError):
            RegionSample(np.array([[0.5, -0.1]]), "S1")

    def test_length(self):
        assert len(RegionSample(np.zeros((3, 2)), "SM")) == 3


class TestSingleSlotEnumeration:
    def test_one_link(self):
        net = NetworkConfig(1, np.array([[1.0]]), 0.1, 1.0)
        sample = enumerate_s1(net)
        assert sample.provenance == "S1"
        assert rows_as_set(sample.points) == rows_as_set([[0.0], [LN11]])

    def test_two_links_all_four_points(self):
        sample = enumerate_s1(unit_net())
        both_on = np.log(21 / 11)  # 1 + 1/1.1 simplified
        want = [[0.0, 0.0], [LN11, 0.0], [0.0, LN11], [both_on, both_on]]
        assert rows_as_set(sample.points) == rows_as_set(want)

    def test_silent_configuration_present(self):
        rng = np.random.default_rng(3)
        gains = rng.uniform(0.1, 2.0, size=(3, 3))
        net = NetworkConfig(3, gains, 0.2, 1.5)
        pts = enumerate_s1(net).points
        assert len(pts) == 8
        assert np.any(np.all(np.abs(pts) < 1e-12, axis=1))

    def test_size_guard(self):
        net = NetworkConfig(21, np.ones((21, 21)), 0.1, 1.0)
        with pytest.raises(ValueError):
            enumerate_s1(net)


class TestFrameEnumeration:
    def test_one_link_two_slots(self):
        net = NetworkConfig(1, np.array([[1.0]]), 0.1, 1.0)
        pts = enumerate_sm(net, 2).points
        assert rows_as_set(pts) == rows_as_set([[0.0], [LN11 / 2], [LN11]])

    def test_single_slot_frame_matches_single_slot_enumeration(self):
        net = unit_net()
        assert rows_as_set(enumerate_sm(net, 1).points) == \
            rows_as_set(enumerate_s1(net).points)

    def test_contains_single_slot_points(self):
        net = unit_net()
        s1 = enumerate_s1(net).points
        sm = enumerate_sm(net, 3).points
        for r in s1:
            assert np.any(np.all(np.abs(sm - r) < 1e-9, axis=1)), r

    def test_size_guard(self):
        with pytest.raises(ValueError):
            enumerate_sm(unit_net(), 11)  # 22 bits


class TestHullMembership:
    def test_vertices_and_midpoints_inside(self):
        sample = enumerate_s1(unit_net())
        pts = sample.points
        assert in_conv_hull(pts[2], sample)
        mid = 0.5 * (pts[1] + pts[2])
        assert in_conv_hull(mid, sample)

    def test_equal_split_of_solo_points(self):
        sample = enumerate_s1(unit_net())
        r = np.array([LN11 / 2, LN11 / 2])
        w = conv_hull_weights(r, sample)
        assert w is not None
        assert abs(w.sum() - 1.0) < 1e-9 and np.all(w >= 0)
        assert_allclose(sample.points.T @ w, r, atol=1e-7)

    def test_outside_point_rejected(self):
        sample = enumerate_s1(unit_net())
        assert not in_conv_hull(np.array([LN11, LN11]), sample)

    def test_dimension_mismatch(self):
        sample = enumerate_s1(unit_net())
        with pytest.raises(ValueError):
            in_conv_hull(np.array([1.0, 1.0, 1.0]), sample)


class TestDominationMembership:
    def test_origin_always_inside(self):
        assert in_coord_convex(np.zeros(2), enumerate_s1(unit_net()))

    def test_just_past_a_maximal_point(self):
        sample = enumerate_s1(unit_net())
        assert in_coord_convex(np.array([LN11, 0.0]), sample)
        assert not in_coord_convex(np.array([LN11 + 1e-3, 0.0]), sample)

    def test_two_slot_orthogonal_point_dominates(self):
        sample = enumerate_sm(unit_net(), 2)
        assert in_coord_convex(np.array([1.0, 1.0]), sample)


class TestParetoBoundary:
    def test_dominated_point_dropped(self):
        sample = RegionSample(np.array([[1.0, 2.0], [2.0, 1.0], [1.0, 1.0]]), "SM")
        front = pareto_boundary(sample)
        assert rows_as_set(front.points) == rows_as_set([[1.0, 2.0], [2.0, 1.0]])

    def test_single_point_is_its_own_front(self):
        sample = RegionSample(np.array([[0.3, 0.7]]), "S1")
        assert_allclose(pareto_boundary(sample).points, [[0.3, 0.7]])

    def test_four_slot_front(self):
        # orthogonal time splits plus the odd-slot-shared points; allocations
        # sharing two or more slots are dominated (a solo slot per link beats
        # a shared pair), as are frames with silent slots
        front = pareto_boundary(enumerate_sm(unit_net(), 4)).points
        shared = np.log(21 / 11)
        want = [[k / 4 * LN11, (4 - k) / 4 * LN11] for k in range(5)]
        want += [[(k * LN11 + shared) / 4, ((3 - k) * LN11 + shared) / 4]
                 for k in range(4)]
        assert rows_as_set(front, decimals=8) == rows_as_set(want, decimals=8)

    def test_duplicates_collapse(self):
        sample = RegionSample(np.array([[1.0, 1.0], [1.0, 1.0]]), "SM")
        assert len(pareto_boundary(sample)) == 1


class TestPowerControlSampling:
    def test_corners(self):
        pts = sample_pc_region(unit_net(), 5).points
        assert len(pts) == 25
        got = rows_as_set(pts)
        assert tuple(np.round([0.0, 0.0], 9)) in got
        assert tuple(np.round([LN11, 0.0], 9)) in got

    def test_saturated_corner_on_uneven_net(self):
        pts = sample_pc_region(steep_net(), 3).points
        want = np.array([np.log(4001.0), np.log(2.2)])
        assert np.any(np.all(np.abs(pts - want) < 1e-9, axis=1))

    def test_guards(self):
        with pytest.raises(ValueError):
            sample_pc_region(NetworkConfig(3, np.ones((3, 3)), 0.1, 1.0), 4)
        with pytest.raises(ValueError):
            sample_pc_region(unit_net(), 1)


class TestFrameComposition:
    def test_single_profile_fills_frame(self):
        frame = compose_frame_from_mixture([np.array([1.0, 0.0])], [1.0], 3)
        assert_allclose(frame.powers, [[1.0, 1.0, 1.0], [0.0, 0.0, 0.0]])

    def test_even_split(self):
        q0, q1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        frame = compose_frame_from_mixture([q0, q1], [0.5, 0.5], 4)
        assert_allclose(frame.powers, [[1, 1, 0, 0], [0, 0, 1, 1]])

    def test_floor_leaves_a_silent_slot(self):
        q0, q1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        frame = compose_frame_from_mixture([q0, q1], [2 / 3, 1 / 3], 4)
        assert_allclose(frame.powers, [[1, 1, 0, 0], [0, 0, 1, 0]])

    def test_rates_dominate_floored_mixture(self):
        rng = np.random.default_rng(8)
        net = unit_net()
        for _ in range(50):
            profiles = [rng.integers(0, 2, 2).astype(float) for _ in range(3)]
            w = rng.dirichlet(np.ones(3))
            m = int(rng.integers(1, 9))
            frame = compose_frame_from_mixture(profiles, w, m)
            floored = sum(np.floor(m * lam) / m * link_rates(q[:, None], net)
                          for q, lam in zip(profiles, w))
            assert np.all(link_rates(frame.powers, net) >= floored - 1e-9)

    def test_composed_rates_stay_in_hull(self):
        net = unit_net()
        sample = enumerate_s1(net)
        rng = np.random.default_rng(21)
        for _ in range(20):
            rows = rng.integers(0, 2, size=(3, 2)).astype(float)
            w = rng.dirichlet(np.ones(3))
            frame = compose_frame_from_mixture(list(rows), w, 8)
            assert in_conv_hull(link_rates(frame.powers, net), sample)

    def test_validation(self):
        with pytest.raises(ValueError):
            compose_frame_from_mixture([np.ones(2)], [0.5, 0.5], 4)
        with pytest.raises(ValueError):
            compose_frame_from_mixture([np.ones(2), np.zeros(2)], [0.7, 0.7], 4)
        with pytest.raises(ValueError):
            compose_frame_from_mixture([], [], 4)


class TestTargetSampling:
    def test_feasible_targets_live_in_the_closure(self):
        net = unit_net()
        sm = enumerate_sm(net, 3)
        rng = np.random.default_rng(5)
        for _ in range(50):
            t = sample_feasible_target(net, 3, rng)
            assert in_coord_convex(t, sm)

    def test_margin_shrinks(self):
        net = unit_net()
        a = sample_feasible_target(net, 2, np.random.default_rng(0), margin=0.0)
        b = sample_feasible_target(net, 2, np.random.default_rng(0), margin=0.5)
        assert_allclose(b, 0.5 * a)

    def test_closure_sampling_dominated(self):
        sample = enumerate_sm(unit_net(), 2)
        draws = sample_from_closure(sample, 100, np.random.default_rng(9))
        assert draws.shape == (100, 2)
        for t in draws:
            assert in_coord_convex(t, sample)

    def test_repulsive_sample_shape(self):
        sample = sample_repulsive_rates(unit_net(), 4, 25,
                                        np.random.default_rng(2))
        assert sample.provenance == "repulsive_sample"
        assert sample.points.shape == (25, 2)


class TestHullBoundaryHelpers:
    def test_strong_interference_boundary_is_one_segment(self):
        poly = hull_pareto_polyline(enumerate_s1(unit_net()))
        assert_allclose(poly, [[0.0, LN11], [LN11, 0.0]], atol=1e-12)

    def test_grid_spacing_on_a_segment(self):
        poly = np.array([[0.0, LN11], [LN11, 0.0]])
        grid = boundary_grid(poly, 5)
        assert_allclose(grid[0], [0.0, LN11])
        assert_allclose(grid[-1], [LN11, 0.0])
        assert_allclose(grid[2], [LN11 / 2, LN11 / 2])

    def test_deficit_zero_inside_and_positive_outside(self):
        sample = RegionSample(np.array([[1.0, 1.0]]), "SM")
        d = coverage_deficit(np.array([[0.5, 0.5], [1.3, 0.5], [1.2, 1.4]]),
                             sample)
        assert_allclose(d, [0.0, 0.3, 0.4])

    def test_deficit_picks_the_best_covering_point(self):
        sample = RegionSample(np.array([[2.0, 0.0], [0.0, 2.0]]), "SM")
        d = coverage_deficit(np.array([[2.0, 0.5]]), sample)
        assert_allclose(d, [0.5])
