"""Recovery planners: RATIO and RANDOM heuristics, the subset DP and an exhaustive oracle."""

from __future__ import annotations

import itertools
import math
import time
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .dynamics import (
    RecoveryPlan,
    RecoveryState,
    apply_allocation,
    evaluate_plan,
    functional_mask,
    initial_reward,
    initial_state,
)
from .netmodel import FailureScenario, InterdependentNetwork

DP_MAX_FAILED = 26

PolicyStep = Callable[[FailureScenario, RecoveryState], Sequence[int]]


class PlannerError(ValueError):
    pass


@dataclass
class PlannerResult:
    plan: RecoveryPlan
    total_utility: int
    order: list[int]
    elapsed: float = 0.0


@dataclass
class DpTables:
    """Subset DP tables indexed by bitmask over ``failed_order``.

    ``best_value[X]`` is the best utility gained while recovering the failed
    nodes in ``X`` (``None`` when no recovery order exists) and
    ``best_choice[X]`` the position in ``failed_order`` recovered first.
    """

    failed_order: tuple[int, ...]
    best_value: list[int | None]
    best_choice: list[int]
    visited: int
    base_utility: int
    horizon: int

    @property
    def optimum(self) -> int:
        top = self.best_value[-1]
        assert top is not None
        return (self.horizon + 1) * self.base_utility + top


# --- candidate sets -------------------------------------------------------


def anchor_mask(network: InterdependentNetwork, state: RecoveryState) -> int:
    """Functional nodes plus saturated support-pair members.

    A saturated pair member is where functionality starts, so its partners count
    as adjacent to the functional set (e.g. an intact control node).
    """
    mask = 0
    partner = network.partner_mask
    for v in range(network.n):
        if state.functional[v] or (state.saturated[v] and partner[v]):
            mask |= 1 << v
    return mask


def frontier(network: InterdependentNetwork, state: RecoveryState) -> list[int]:
    """Unsaturated nodes adjacent to the functional set (the pseudo-star leaves)."""
    anchors = anchor_mask(network, state)
    return [
        v
        for v in range(network.n)
        if state.remaining[v] > 0 and network.neighbor_mask[v] & anchors
    ]


def _dead_end(network: InterdependentNetwork, state: RecoveryState) -> list[int]:
    pending = state.unsaturated
    paired = [v for v in pending if network.partner_mask[v]]
    return [min(paired)] if paired else pending[:1]


def _ratio_key(network: InterdependentNetwork, v: int):
    d = network.demand[v]
    ratio = Fraction(network.utility[v], d) if d > 0 else Fraction(10**18)
    return (-ratio, v)


def _spill_tail(network: InterdependentNetwork, state: RecoveryState, head: list[int]) -> list[int]:
    """Unsaturated nodes outside ``head``, nearest to the functional side first."""
    listed = set(head)
    seeds = [v for v in range(network.n) if anchor_mask(network, state) >> v & 1] + head
    dist = {v: 0 for v in seeds}
    queue = deque(seeds)
    while queue:
        v = queue.popleft()
        for w in network.neighbors[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    rest = [v for v in state.unsaturated if v not in listed]
    return sorted(rest, key=lambda v: (dist.get(v, math.inf), _ratio_key(network, v)))


def ratio_order(scenario: FailureScenario, state: RecoveryState) -> list[int]:
    net = scenario.network
    cands = frontier(net, state) or _dead_end(net, state)
    head = sorted(cands, key=lambda v: _ratio_key(net, v))
    return head + _spill_tail(net, state, head)


def concentrate(scenario: FailureScenario, state: RecoveryState, order: Sequence[int]) -> np.ndarray:
    """Pour the step budget into ``order`` front to back, each node up to its remaining demand."""
    row = np.zeros(scenario.network.n, dtype=np.int64)
    left = min(scenario.budget(state.step + 1), sum(state.remaining))
    for v in order:
        if left == 0:
            break
        give = min(left, state.remaining[v])
        row[v] += give
        left -= give
    return row


def ratio_step(scenario: FailureScenario, state: RecoveryState) -> np.ndarray:
    return concentrate(scenario, state, ratio_order(scenario, state))


def random_step(scenario: FailureScenario, state: RecoveryState, rng: np.random.Generator) -> np.ndarray:
    net = scenario.network
    cands = frontier(net, state) or _dead_end(net, state)
    head = [cands[i] for i in rng.permutation(len(cands))]
    return concentrate(scenario, state, head + _spill_tail(net, state, head))


def random_policy(seed: int | np.random.Generator) -> PolicyStep:
    rng = np.random.default_rng(seed)
    return lambda scenario, state: random_step(scenario, state, rng)


# --- plan assembly ----------------------------------------------------------


def _saturation_order(before: RecoveryState, after: RecoveryState) -> list[int]:
    return [v for v in range(len(before.remaining)) if before.remaining[v] > 0 and after.remaining[v] == 0]


def run_planner(scenario: FailureScenario, policy_step: PolicyStep) -> PlannerResult:
    start = time.perf_counter()
    state = initial_state(scenario)
    rows = []
    order: list[int] = []
    while not state.done:
        row = policy_step(scenario, state)
        out = apply_allocation(scenario, state, row)
        rows.append(row)
        order += _saturation_order(state, out.next_state)
        state = out.next_state
    plan = RecoveryPlan.from_rows(scenario, rows)
    total = evaluate_plan(scenario, plan)
    return PlannerResult(plan, total, order, time.perf_counter() - start)


def plan_from_order(scenario: FailureScenario, order: Sequence[int]) -> RecoveryPlan:
    state = initial_state(scenario)
    rows = []
    while not state.done:
        row = concentrate(scenario, state, order)
        if not row.any():
            raise PlannerError("order does not cover every failed node")
        rows.append(row)
        state = apply_allocation(scenario, state, row).next_state
    return RecoveryPlan.from_rows(scenario, rows)


# --- exact subset DP ------------------------------------------------------------


def pairwise_violations(scenario: FailureScenario) -> list[tuple[int, int]]:
    """Failed pairs with ``d_i + d_j <= 2C - 1`` (two recoveries could share a step)."""
    C = scenario.constant_budget
    if C is None:
        return []
    dem = scenario.network.demand
    nodes = sorted(v for v in scenario.failed if dem[v] > 0)
    return [(a, b) for a, b in itertools.combinations(nodes, 2) if dem[a] + dem[b] <= 2 * C - 1]


def dp_tables(scenario: FailureScenario) -> DpTables:
    """Bottom-up DP over subsets of still-unrecovered failed nodes.

    ``Z[X]`` is the best utility the nodes of ``X`` add once everything outside
    ``X`` is up. A node ``v`` may go first when saturating it alone makes it
    functional; it then contributes its utility gain from its recovery step
    ``ceil(D_v / C)`` through ``T``, where ``D_v`` is the demand recovered so far
    including ``v``. With ``C = 1`` that duration is ``1 + sum of d over X - {v}``.
    """
    C = scenario.constant_budget
    if C is None:
        raise PlannerError("dp_opt needs a constant budget")
    bad = pairwise_violations(scenario)
    if bad:
        a, b = bad[0]
        nm = scenario.network.names
        raise PlannerError(
            f"pairwise demand condition fails for ({nm[a]}, {nm[b]}): "
            f"d sum {scenario.network.demand[a] + scenario.network.demand[b]} <= {2 * C - 1}"
        )
    net = scenario.network
    order = tuple(sorted(v for v in scenario.failed if net.demand[v] > 0))
    k = len(order)
    if k > DP_MAX_FAILED:
        raise PlannerError(f"{k} failed nodes exceeds the dp_opt cap of {DP_MAX_FAILED}")

    T = scenario.horizon
    D = scenario.total_demand
    everyone = (1 << net.n) - 1
    nbr, partner, util, dem = net.neighbor_mask, net.partner_mask, net.utility, net.demand
    size = 1 << k
    nodebits = [0] * size
    dsum = [0] * size
    ufunc = [0] * size
    fmask = [0] * size
    Z: list[int | None] = [None] * size
    B = [-1] * size
    visited = 0

    for s in range(k + 1):
        for combo in itertools.combinations(range(k), s):
            X = 0
            for i in combo:
                X |= 1 << i
            visited += 1
            if X:
                low = X & -X
                i0 = low.bit_length() - 1
                nodebits[X] = nodebits[X ^ low] | (1 << order[i0])
                dsum[X] = dsum[X ^ low] + dem[order[i0]]
            sat = everyone & ~nodebits[X]
            F = functional_mask(net, sat)
            fmask[X] = F
            ufunc[X] = sum(util[v] for v in range(net.n) if F >> v & 1)
            if not X:
                Z[0] = 0
                continue
            best, choice = None, -1
            for i in combo:
                v = order[i]
                if not (nbr[v] & F or partner[v] & sat):
                    continue
                prev = X ^ (1 << i)
                if Z[prev] is None:
                    continue
                done_before = D - dsum[X] + dem[v]
                steps_up = T - math.ceil(done_before / C) + 1
                q = (ufunc[prev] - ufunc[X]) * steps_up + Z[prev]
                if best is None or q > best:
                    best, choice = q, i
            Z[X] = best
            B[X] = choice
    return DpTables(order, Z, B, visited, ufunc[size - 1], T)


def dp_opt(scenario: FailureScenario) -> PlannerResult:
    start = time.perf_counter()
    tables = dp_tables(scenario)
    if tables.best_value[-1] is None:
        raise PlannerError(
            "no failed node is recoverable on its own; convert with to_one_layered first"
        )
    X = (1 << len(tables.failed_order)) - 1
    order = []
    while X:
        i = tables.best_choice[X]
        order.append(tables.failed_order[i])
        X ^= 1 << i
    plan = plan_from_order(scenario, order)
    total = evaluate_plan(scenario, plan)
    if total != tables.optimum:
        raise PlannerError(f"dp value {tables.optimum} disagrees with replayed plan {total}")
    return PlannerResult(plan, total, order, time.perf_counter() - start)


# --- exhaustive oracle ----------------------------------------------------------


def _rows(remaining: Sequence[int], spend: int):
    """Every allocation of exactly ``spend`` units, no node above its remaining demand."""
    nodes = [v for v, r in enumerate(remaining) if r > 0]
    n = len(remaining)

    def rec(idx: int, left: int, acc: list[int]):
        if idx == len(nodes):
            if left == 0:
                yield tuple(acc)
            return
        v = nodes[idx]
        cap_rest = sum(remaining[w] for w in nodes[idx + 1 :])
        for a in range(min(left, remaining[v]), -1, -1):
            if left - a > cap_rest:
                break
            acc[v] = a
            yield from rec(idx + 1, left - a, acc)
        acc[v] = 0

    yield from rec(0, spend, [0] * n)


class ExhaustiveSearch:
    """Memoised search over every non-wasting integer allocation at every step.

    States are ``(step, remaining)``; values are the utility still to collect.
    Independent of the DP: rewards come only from replaying ``apply_allocation``.
    """

    def __init__(self, scenario: FailureScenario):
        self.scenario = scenario
        self.memo: dict[tuple[int, tuple[int, ...]], int] = {}
        self.children: dict[tuple[int, tuple[int, ...]], list[tuple[tuple[int, ...], int, RecoveryState]]] = {}

    def successors(self, state: RecoveryState):
        key = (state.step, state.remaining)
        if key not in self.children:
            spend = min(self.scenario.budget(state.step + 1), sum(state.remaining))
            kids = []
            for row in _rows(state.remaining, spend):
                out = apply_allocation(self.scenario, state, row)
                kids.append((row, out.reward, out.next_state))
            self.children[key] = kids
        return self.children[key]

    def value(self, state: RecoveryState) -> int:
        key = (state.step, state.remaining)
        if key in self.memo:
            return self.memo[key]
        if state.done:
            best = 0
        else:
            best = max(r + self.value(nxt) for _, r, nxt in self.successors(state))
        self.memo[key] = best
        return best

    def optimal_moves(self, state: RecoveryState):
        target = self.value(state)
        return [(row, nxt) for row, r, nxt in self.successors(state) if r + self.value(nxt) == target]


def brute_force(scenario: FailureScenario, max_nodes: int = 10) -> PlannerResult:
    start = time.perf_counter()
    pending = [v for v in scenario.failed if scenario.network.demand[v] > 0]
    if len(pending) > max_nodes:
        raise PlannerError(f"{len(pending)} failed nodes exceeds brute_force limit {max_nodes}")
    search = ExhaustiveSearch(scenario)
    state = initial_state(scenario)
    best = initial_reward(scenario) + search.value(state)
    rows, order = [], []
    while not state.done:
        row, nxt = search.optimal_moves(state)[0]
        rows.append(row)
        order += _saturation_order(state, nxt)
        state = nxt
    plan = RecoveryPlan.from_rows(scenario, rows)
    total = evaluate_plan(scenario, plan)
    assert total == best
    return PlannerResult(plan, total, order, time.perf_counter() - start)
