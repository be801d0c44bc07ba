import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from progrecov.dynamics import evaluate_plan, initial_state
from progrecov.netmodel import FailureScenario, InterdependentNetwork
from progrecov.scenlab import adversarial_motif, make_gnp_scenario, motivating_fixture
from progrecov.solvers import (
    DP_MAX_FAILED,
    PlannerError,
    brute_force,
    dp_opt,
    dp_tables,
    frontier,
    pairwise_violations,
    random_policy,
    random_step,
    ratio_step,
    run_planner,
)

from instances import random_tree, star
from oracles import order_optimum


def motif_ids(s):
    return {name: s.network.index(name) for name in ("A", "B", "C")}


class TestRatio:
    def test_motif_picks_a(self):
        s = adversarial_motif(2)
        ids = motif_ids(s)
        row = ratio_step(s, initial_state(s))
        assert row[ids["A"]] == 1 and row.sum() == 1

    def test_single_candidate_takes_whole_budget(self):
        s = star([(1, 5)], C=3)
        assert list(ratio_step(s, initial_state(s))) == [0, 3]

    def test_tie_goes_to_lower_id(self):
        # leaves 3 and 5 both have u/d = 1
        s = star([(1, 2), (1, 2), (2, 2), (1, 3), (3, 3)], C=1)
        row = ratio_step(s, initial_state(s))
        assert np.flatnonzero(row).tolist() == [3]

    def test_spill_follows_order(self):
        s = star([(4, 1), (3, 1), (1, 2)], C=3)
        assert list(ratio_step(s, initial_state(s))) == [0, 1, 1, 1]

    def test_dead_end_uses_lowest_unsaturated(self):
        # one-way arc only: nothing can become functional
        net = InterdependentNetwork((0, 1, 1), (0, 1, 1), (0, 1, 5), ((1, 2),), ((0, 2),))
        s = FailureScenario(net, frozenset({1, 2}), 1)
        st0 = initial_state(s)
        assert frontier(net, st0) == []
        assert list(ratio_step(s, st0)) == [0, 1, 0]

    def test_dead_end_prefers_pair_member(self):
        net = InterdependentNetwork((1, 1, 0), (1, 1, 1), (1, 1, 0), ((0, 1),), ((2, 1), (1, 2)))
        s = FailureScenario(net, frozenset({0, 1, 2}), 1)
        assert list(ratio_step(s, initial_state(s))) == [0, 1, 0]

    def test_motivating_fixture(self):
        res = run_planner(motivating_fixture(), ratio_step)
        assert res.total_utility == 12
        assert res.total_utility <= 13

    @pytest.mark.parametrize("x", range(1, 11))
    def test_motif_formula(self, x):
        assert run_planner(adversarial_motif(x), ratio_step).total_utility == 3 * x + 13


class TestRandom:
    def test_single_candidate_is_seed_independent(self):
        s = star([(1, 2)], C=1)
        rows = {tuple(random_step(s, initial_state(s), np.random.default_rng(k))) for k in range(20)}
        assert rows == {(0, 1)}

    def test_reproducible(self):
        s = make_gnp_scenario(8, 0.2, seed=4)
        a = run_planner(s, random_policy(11))
        b = run_planner(s, random_policy(11))
        assert np.array_equal(a.plan.alloc, b.plan.alloc) and a.total_utility == b.total_utility

    def test_uniform_over_frontier(self):
        s = star([(1, 1)] * 4, C=1)
        st0 = initial_state(s)
        rng = np.random.default_rng(0)
        draws = 10_000
        counts = np.zeros(5)
        for _ in range(draws):
            counts += random_step(s, st0, rng)
        sigma = math.sqrt(draws * 0.25 * 0.75)
        assert counts[0] == 0
        assert np.all(np.abs(counts[1:] - draws / 4) < 4 * sigma)


class TestDp:
    def test_two_leaf_star(self):
        s = star([(1, 1), (2, 1)])
        res = dp_opt(s)
        assert res.total_utility == 5
        assert res.order == [2, 1]
        assert order_optimum(s)[0] == 5

    def test_motivating(self):
        assert dp_opt(motivating_fixture()).total_utility == 13

    def test_single_node(self):
        assert dp_opt(star([(3, 1)])).total_utility == 3

    def test_result_replays(self):
        s = make_gnp_scenario(8, 0.2, seed=3)
        res = dp_opt(s)
        assert evaluate_plan(s, res.plan) == res.total_utility

    @pytest.mark.parametrize("k", [1, 3, 6, 9])
    def test_visits_every_subset_once(self, k):
        assert dp_tables(random_tree(np.random.default_rng(k), k)).visited == 2**k

    def test_empty_subset_value(self):
        assert dp_tables(star([(1, 1), (1, 2)])).best_value[0] == 0

    def test_needs_constant_budget(self):
        net = InterdependentNetwork((0, 1), (0, 2), (0, 1), (), ((0, 1), (1, 0)))
        with pytest.raises(PlannerError, match="constant"):
            dp_opt(FailureScenario(net, frozenset({1}), None, (1, 1)))

    def test_pairwise_condition_names_pair(self):
        s = star([(1, 1), (1, 1), (1, 4)], C=2)
        assert pairwise_violations(s) == [(1, 2)]
        with pytest.raises(PlannerError, match=r"\(1, 2\)"):
            dp_opt(s)

    def test_size_cap(self):
        s = star([(1, 1)] * (DP_MAX_FAILED + 1))
        with pytest.raises(PlannerError, match="cap"):
            dp_opt(s)

    def test_unrecoverable(self):
        net = InterdependentNetwork((0, 1), (0, 1), (0, 1), (), ((0, 1),))
        with pytest.raises(PlannerError, match="recoverable"):
            dp_opt(FailureScenario(net, frozenset({1}), 1))

    @given(st.integers(0, 2**31 - 1), st.integers(1, 3))
    @settings(max_examples=80, deadline=None)
    def test_matches_order_enumeration(self, seed, C):
        # demands in [C, 2C] keep the pairwise condition for any C
        rng = np.random.default_rng(seed)
        s = random_tree(rng, int(rng.integers(1, 7)), C=C, d=(C, 2 * C))
        assert dp_opt(s).total_utility == order_optimum(s)[0]

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_ratio_never_beats_dp(self, seed):
        s = make_gnp_scenario(int(np.random.default_rng(seed).integers(4, 10)), 0.3, seed=seed)
        assert run_planner(s, ratio_step).total_utility <= dp_opt(s).total_utility


class TestBruteForce:
    @pytest.mark.parametrize("x", range(1, 11))
    def test_motif_formula(self, x):
        assert brute_force(adversarial_motif(x)).total_utility == 12 * x + 12

    def test_two_leaves_one_step(self):
        s = star([(1, 1), (1, 1)], C=2)
        res = brute_force(s)
        assert res.plan.alloc[1].tolist() == [0, 1, 1]
        assert res.total_utility == 2

    def test_too_large(self):
        with pytest.raises(PlannerError, match="limit"):
            brute_force(star([(1, 1)] * 4), max_nodes=3)

    def test_motivating(self):
        assert brute_force(motivating_fixture()).total_utility == 13

    def test_gap_grows_with_x(self):
        gaps = [
            brute_force(adversarial_motif(x)).total_utility - run_planner(adversarial_motif(x), ratio_step).total_utility
            for x in range(1, 7)
        ]
        assert gaps == [9 * x - 1 for x in range(1, 7)]

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_agrees_with_dp_on_gnp(self, seed):
        s = make_gnp_scenario(int(np.random.default_rng(seed).integers(3, 8)), 0.25, seed=seed)
        assert brute_force(s).total_utility == dp_opt(s).total_utility
