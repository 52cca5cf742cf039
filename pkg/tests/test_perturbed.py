"""Tests for the randomized exploration dynamics and assumption checkers."""

import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from powerpacking.core import NetworkConfig, link_rates
from powerpacking.iterative import UpdateSchedule, ibpp_run
from powerpacking.perturbed import (
    BetaTriggerProcess,
    InterferenceTriggerProcess,
    PerturbParams,
    check_a1,
    check_a2,
    ipbpp_run,
    itipbpp_run,
    random_binary_row,
)
from powerpacking.region import enumerate_sm

LN11 = float(np.log(11.0))


def symmetric_net():
    return NetworkConfig(2, np.ones((2, 2)), 0.1, 1.0)


def ap_net():
    gains = np.array([[1.0, 1.0, 60.0],
                      [1.0, 1.0, 60.0],
                      [0.5, 0.5, 1.0]])
    return NetworkConfig(3, gains, 0.1, 1.0)


def ap_targets():
    base = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    return 0.99 * link_rates(base, ap_net())


def brute_force_a1(net, targets, m):
    """Literal restatement of the structural condition, loop form."""
    n = net.n_links
    for bits in range(2 ** (n * m)):
        p = net.p_max * np.array([(bits >> k) & 1 for k in range(n * m)],
                                 dtype=float).reshape(n, m)
        rates = link_rates(p, net)
        unsat = rates < targets - 1e-9
        if not unsat.any() or unsat.all():
            continue
        clause_a = False
        for i in np.flatnonzero(unsat):
            q = p.copy()
            q[i] = net.p_max
            if link_rates(q, net)[i] >= targets[i] - 1e-9:
                clause_a = True
                break
        if clause_a:
            continue
        q = p.copy()
        q[unsat] = net.p_max
        unsat2 = link_rates(q, net) < targets - 1e-9
        superset = not (unsat & ~unsat2).any()
        grew = (unsat2 & ~unsat).any()
        if not (superset and grew):
            return False
    return True


class TestPerturbParams:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            PerturbParams(1.0, 0.1)
        with pytest.raises(ValueError):
            PerturbParams(0.1, -0.2)
        with pytest.raises(ValueError):
            PerturbParams(0.1, 0.1, delta=0.0)
        with pytest.raises(ValueError):
            PerturbParams(0.1, 0.1, budget=0)

    def test_zero_exploration_allowed(self):
        # the plain binary dynamics are the alpha = 0 corner
        p = PerturbParams(0.0, 0.0)
        assert p.alpha1 == 0.0 and p.alpha2 == 0.0


class TestRandomRow:
    def test_single_slot_frequency(self):
        rng = np.random.default_rng(0)
        draws = np.array([random_binary_row(1, 1.0, rng)[0]
                          for _ in range(10_000)])
        assert abs(draws.mean() - 0.5) < 0.02

    def test_all_patterns_equally_likely(self):
        rng = np.random.default_rng(1)
        counts = np.zeros(16)
        for _ in range(100_000):
            row = random_binary_row(4, 1.0, rng)
            counts[int(np.dot(row, [1, 2, 4, 8]))] += 1
        assert_allclose(counts / 100_000, 1 / 16, atol=0.01)

    def test_seed_replay(self):
        a = np.random.default_rng(7)
        b = np.random.default_rng(7)
        for _ in range(20):
            assert_allclose(random_binary_row(3, 2.5, a),
                            random_binary_row(3, 2.5, b))
        assert set(np.unique(random_binary_row(8, 2.5, a))) <= {0.0, 2.5}


class TestSelfEarnedFlagDynamics:
    def test_zero_targets_absorb_after_one_pass(self):
        net = symmetric_net()
        res = ipbpp_run(net, np.zeros(2), UpdateSchedule("round_robin"),
                        np.zeros((2, 2)), PerturbParams(0.1, 0.1, seed=3))
        assert res.converged and res.updates_used <= net.n_links

    def test_prearmed_flags_absorb_immediately(self):
        net = symmetric_net()
        res = ipbpp_run(net, np.zeros(2), UpdateSchedule("round_robin"),
                        np.zeros((2, 2)), PerturbParams(0.1, 0.1, seed=3),
                        beta0=np.ones(2, dtype=int))
        assert res.converged and res.updates_used == 0

    def test_non_binary_init_rejected(self):
        net = symmetric_net()
        with pytest.raises(ValueError):
            ipbpp_run(net, np.zeros(2), UpdateSchedule("round_robin"),
                      np.full((2, 2), 0.5), PerturbParams(0.1, 0.1))

    def test_feasible_two_link_always_absorbs(self):
        net = symmetric_net()
        targets = np.array([1.0, 1.0])
        for seed in range(100):
            res = ipbpp_run(net, targets,
                            UpdateSchedule("uniform_random", seed=seed),
                            np.zeros((2, 2)),
                            PerturbParams(0.1, 0.1, budget=10_000, seed=seed))
            assert res.converged, seed
            assert np.all(res.final_rates >= targets - 1e-9)

    def test_access_point_instance_reachable(self):
        # a seed where exploration finds the clean slot for the weak link
        net = ap_net()
        targets = ap_targets()
        res = ipbpp_run(net, targets,
                        UpdateSchedule("uniform_random", seed=11),
                        np.zeros((3, 3)),
                        PerturbParams(0.1, 0.1, budget=100_000, seed=11))
        assert res.converged
        p = res.final_allocation.powers
        alone = (p[2] > 0) & (p[0] == 0) & (p[1] == 0)
        assert alone.any()  # the far transmitter owns at least one slot

    def test_satisfied_links_keep_rows_unlike_plain_binary_dynamics(self):
        # the keep rule freezes a satisfied link's row even when a cheaper
        # packing exists; the plain dynamics re-pack and trim it
        net = symmetric_net()
        targets = np.array([0.5, 0.0])
        init = np.array([[1.0, 1.0], [0.0, 0.0]])
        schedule = UpdateSchedule("round_robin")
        frozen = ipbpp_run(net, targets, schedule, init,
                           PerturbParams(0.0, 0.0, seed=0))
        repacked = ibpp_run(net, targets, schedule, init)
        assert_allclose(frozen.final_allocation.powers[0], [1.0, 1.0])
        assert_allclose(repacked.final_allocation.powers[0], [1.0, 0.0])

    def test_absorbed_state_is_a_fixed_point(self):
        net = symmetric_net()
        targets = np.array([1.0, 1.0])
        res = ipbpp_run(net, targets, UpdateSchedule("uniform_random", seed=5),
                        np.zeros((2, 2)), PerturbParams(0.1, 0.1, seed=5))
        assert res.converged
        proc = BetaTriggerProcess(net, UpdateSchedule("uniform_random", seed=99),
                                  res.final_allocation.powers,
                                  PerturbParams(0.1, 0.1, seed=99),
                                  beta0=np.ones(2, dtype=int))
        before = proc.p.copy()
        for _ in range(10 * net.n_links):
            proc.step(targets)
        assert_allclose(proc.p, before)

    def test_trace_has_flag_columns_and_replays(self):
        net = symmetric_net()
        targets = np.array([1.0, 1.0])
        runs = [ipbpp_run(net, targets, UpdateSchedule("uniform_random", seed=2),
                          np.zeros((2, 2)), PerturbParams(0.2, 0.2, seed=8),
                          record_trace=True) for _ in range(2)]
        assert runs[0].trace.columns == runs[1].trace.columns
        assert runs[0].trace.rows == runs[1].trace.rows
        assert "beta_0" in runs[0].trace.columns
        assert "branch" in runs[0].trace.columns


class TestInterferenceTriggerDynamics:
    def test_zero_targets_with_aligned_memory_absorb_at_once(self):
        net = symmetric_net()
        res = itipbpp_run(net, np.zeros(2), UpdateSchedule("round_robin"),
                          np.zeros((2, 2)),
                          PerturbParams(0.1, 0.1, delta=1.0, seed=0))
        assert res.converged and res.updates_used == 0

    def test_misaligned_memory_needs_one_pass(self):
        net = symmetric_net()
        init = np.zeros((2, 2))
        sums = np.full(2, 2 * net.noise)
        res = itipbpp_run(net, np.zeros(2), UpdateSchedule("round_robin"),
                          init, PerturbParams(0.0, 0.0, delta=0.5, seed=0),
                          i_last0=sums + 2.0)
        assert res.converged
        assert 0 < res.updates_used <= 3 * net.n_links

    def test_two_link_closure_target_absorbs(self):
        net = symmetric_net()
        pts = enumerate_sm(net, 3).points
        rng = np.random.default_rng(14)
        for seed in range(20):
            targets = pts[rng.integers(0, len(pts))] * rng.uniform(0, 1, 2)
            res = itipbpp_run(net, targets,
                              UpdateSchedule("uniform_random", seed=seed),
                              np.zeros((2, 3)),
                              PerturbParams(0.1, 0.1, delta=1.0,
                                            budget=100_000, seed=seed))
            assert res.converged, seed
            assert np.all(res.final_rates >= targets - 1e-9)

    def test_access_point_instance_reachable(self):
        net = ap_net()
        targets = ap_targets()
        res = itipbpp_run(net, targets,
                          UpdateSchedule("uniform_random", seed=23),
                          np.zeros((3, 3)),
                          PerturbParams(0.1, 0.1, delta=1.0,
                                        budget=100_000, seed=23))
        assert res.converged
        p = res.final_allocation.powers
        alone = (p[2] > 0) & (p[0] == 0) & (p[1] == 0)
        assert alone.any()

    def test_absorbed_state_is_a_fixed_point(self):
        net = symmetric_net()
        targets = np.array([1.0, 1.0])
        res = itipbpp_run(net, targets, UpdateSchedule("uniform_random", seed=4),
                          np.zeros((2, 2)),
                          PerturbParams(0.1, 0.1, delta=1.0, seed=4))
        assert res.converged
        # re-seeding from the absorbed allocation with aligned memory keeps
        # every row fixed for as long as interference stays within delta
        proc = InterferenceTriggerProcess(
            net, UpdateSchedule("uniform_random", seed=77),
            res.final_allocation.powers,
            PerturbParams(0.1, 0.1, delta=1.0, seed=77))
        before = proc.p.copy()
        for _ in range(10 * net.n_links):
            proc.step(targets)
        assert_allclose(proc.p, before)

    def test_trace_has_memory_columns(self):
        net = symmetric_net()
        res = itipbpp_run(net, np.array([0.5, 0.5]),
                          UpdateSchedule("uniform_random", seed=1),
                          np.zeros((2, 2)),
                          PerturbParams(0.1, 0.1, delta=1.0, seed=1),
                          record_trace=True)
        assert "i_last_0" in res.trace.columns and "i_last_1" in res.trace.columns


class TestStructuralConditionOne:
    def test_single_link_vacuous(self):
        net = NetworkConfig(1, [[1.0]], 0.1, 1.0)
        assert check_a1(net, np.array([1.0]), 2)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(37)
        agree = 0
        for _ in range(25):
            gains = rng.uniform(0.05, 1.5, size=(2, 2))
            gains[np.diag_indices(2)] = rng.uniform(0.5, 2.0, size=2)
            net = NetworkConfig(2, gains, 0.1, 1.0)
            targets = rng.uniform(0.1, 1.5, size=2)
            want = brute_force_a1(net, targets, 2)
            assert check_a1(net, targets, 2) == want
            agree += 1
        assert agree == 25

    def test_decoupled_links_pass_via_unilateral_clause(self):
        # with zero cross gains an unsatisfied link can always fix itself at
        # full power, so the first clause holds at every examined state
        net = NetworkConfig(2, np.array([[1.0, 0.0], [0.0, 1.0]]), 0.1, 1.0)
        targets = np.array([1.0, 1.0])  # solo-feasible: ceiling is ln(11)
        assert check_a1(net, targets, 2)

    def test_known_failing_instance(self):
        # link 1 needs near-interference-free slots and link 2's presence
        # denies them, yet link 2 is too weakly heard to ever be disturbed
        net = NetworkConfig(2, np.array([[1.0, 0.1], [0.1, 1.0]]), 0.1, 1.0)
        targets = np.array([2.3, 0.05])
        assert not check_a1(net, targets, 1)
        assert not brute_force_a1(net, targets, 1)

    def test_enumeration_guard(self):
        net = NetworkConfig(3, np.eye(3) + 0.1, 0.1, 1.0)
        with pytest.raises(ValueError):
            check_a1(net, np.ones(3), 8)  # 24 bits is past the guard


class TestStructuralConditionTwo:
    def test_cross_gain_threshold(self):
        net = NetworkConfig(2, np.array([[1.0, 0.4], [0.4, 1.0]]), 0.1, 1.0)
        assert check_a2(net, 1.0, 4)       # 4 * 0.4 = 1.6 > 1
        assert not check_a2(net, 2.0, 4)   # 1.6 < 2

    def test_decoupled_always_fails(self):
        net = NetworkConfig(2, np.eye(2), 0.1, 1.0)
        assert not check_a2(net, 0.5, 16)

    def test_large_frames_eventually_pass(self):
        rng = np.random.default_rng(91)
        for _ in range(5):
            gains = rng.uniform(0.01, 0.3, size=(3, 3))
            gains[np.diag_indices(3)] = 1.0
            net = NetworkConfig(3, gains, 0.1, 1.0)
            m = 1
            while not check_a2(net, 5.0, m):
                m *= 2
                assert m <= 2 ** 20
            assert check_a2(net, 5.0, 2 * m)  # stays true as frames grow

    def test_ap_instance_with_unit_delta(self):
        assert check_a2(ap_net(), 1.0, 3)
