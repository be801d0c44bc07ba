"""Recovery semantics: saturation, functionality, per-step rewards and plan replay.

Step 0 is the failure instant. Budgets arrive from step 1 onwards and utility
is counted at the end of every step, so a node recovered at step ``t``
contributes ``u(v)`` at steps ``t..T``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .netmodel import FailureScenario, InterdependentNetwork


class AllocationError(ValueError):
    """An allocation row that breaks the budget or targets a finished node."""


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def functional_mask(network: InterdependentNetwork, saturated: int) -> int:
    """Functional nodes as a bitmask, given the saturated nodes as a bitmask.

    Seeds are saturated support-pair members whose partner is saturated too;
    functionality then spreads over intra-edges and arcs through saturated nodes.
    """
    partner = network.partner_mask
    nbr = network.neighbor_mask
    reached = 0
    for v in _bits(saturated):
        if partner[v] & saturated:
            reached |= 1 << v
    frontier = reached
    while frontier:
        nxt = 0
        for v in _bits(frontier):
            nxt |= nbr[v]
        nxt &= saturated & ~reached
        reached |= nxt
        frontier = nxt
    return reached


def compute_functional(network: InterdependentNetwork, saturated: Iterable[int]) -> tuple[bool, ...]:
    sat = 0
    for v in saturated:
        sat |= 1 << v
    mask = functional_mask(network, sat)
    return tuple(bool(mask >> v & 1) for v in range(network.n))


@dataclass(frozen=True)
class RecoveryState:
    remaining: tuple[int, ...]
    saturated: tuple[bool, ...]
    functional: tuple[bool, ...]
    step: int
    horizon: int

    @property
    def done(self) -> bool:
        return self.step >= self.horizon or not any(self.remaining)

    @property
    def unsaturated(self) -> list[int]:
        return [v for v, r in enumerate(self.remaining) if r > 0]


@dataclass(frozen=True)
class StepOutcome:
    next_state: RecoveryState
    reward: int
    done: bool


def utility_of(network: InterdependentNetwork, functional: Sequence[bool]) -> int:
    return sum(u for u, f in zip(network.utility, functional) if f)


def _state_from_remaining(
    network: InterdependentNetwork, remaining: tuple[int, ...], step: int, horizon: int
) -> RecoveryState:
    saturated = tuple(r == 0 for r in remaining)
    sat = sum(1 << v for v, s in enumerate(saturated) if s)
    fmask = functional_mask(network, sat)
    functional = tuple(bool(fmask >> v & 1) for v in range(network.n))
    return RecoveryState(remaining, saturated, functional, step, horizon)


def initial_state(scenario: FailureScenario) -> RecoveryState:
    net = scenario.network
    remaining = tuple(max(net.demand[v], 0) if v in scenario.failed else 0 for v in range(net.n))
    return _state_from_remaining(net, remaining, 0, scenario.horizon)


def initial_reward(scenario: FailureScenario) -> int:
    """Utility already available at the failure instant (the step-0 term)."""
    return utility_of(scenario.network, initial_state(scenario).functional)


def apply_allocation(
    scenario: FailureScenario, state: RecoveryState, allocation_row: Sequence[int]
) -> StepOutcome:
    net = scenario.network
    row = [int(a) for a in allocation_row]
    if len(row) != net.n:
        raise AllocationError(f"row has {len(row)} entries, network has {net.n} nodes")
    if state.done:
        raise AllocationError(f"recovery already finished at step {state.step}")
    step = state.step + 1
    budget = scenario.budget(step)
    if any(a < 0 for a in row):
        raise AllocationError(f"step {step}: negative allocation")
    if sum(row) > budget:
        raise AllocationError(f"step {step}: row spends {sum(row)} > budget {budget}")
    for v, a in enumerate(row):
        if a > 0 and state.remaining[v] == 0:
            raise AllocationError(f"step {step}: node {net.names[v]} has no remaining demand")
    remaining = tuple(max(r - a, 0) for r, a in zip(state.remaining, row))
    nxt = _state_from_remaining(net, remaining, step, state.horizon)
    return StepOutcome(nxt, utility_of(net, nxt.functional), nxt.done)


def is_splitting(network: InterdependentNetwork, state: RecoveryState, allocation_row: Sequence[int]) -> bool:
    """True when some node could be saturated this step but the row saturates none."""
    budget = sum(int(a) for a in allocation_row)
    pending = [r for r in state.remaining if r > 0]
    could = any(r <= budget for r in pending)
    does = any(0 < r <= a for r, a in zip(state.remaining, allocation_row))
    return could and not does


def is_concentrating(network: InterdependentNetwork, state: RecoveryState, allocation_row: Sequence[int]) -> bool:
    """Saturates a node when possible and sends any leftover to at most one node."""
    if is_splitting(network, state, allocation_row):
        return False
    partial = [v for v, (r, a) in enumerate(zip(state.remaining, allocation_row)) if 0 < a < r]
    return len(partial) <= 1


@dataclass
class RecoveryPlan:
    """``(T+1) x |V|`` allocation table; row 0 is the failure instant and stays empty."""

    alloc: np.ndarray

    @classmethod
    def from_rows(cls, scenario: FailureScenario, rows: Iterable[Sequence[int]]) -> "RecoveryPlan":
        table = np.zeros((scenario.horizon + 1, scenario.network.n), dtype=np.int64)
        for t, row in enumerate(rows, start=1):
            if t > scenario.horizon:
                raise AllocationError(f"plan has more rows than horizon {scenario.horizon}")
            table[t] = row
        return cls(table)

    @property
    def horizon(self) -> int:
        return self.alloc.shape[0] - 1


def replay_plan(scenario: FailureScenario, plan: RecoveryPlan) -> list[int]:
    """Per-step rewards ``[r_0, r_1, ..., r_T]`` obtained by replaying ``plan``."""
    T = scenario.horizon
    if plan.alloc.shape != (T + 1, scenario.network.n):
        raise AllocationError(
            f"plan shape {plan.alloc.shape} != expected {(T + 1, scenario.network.n)}"
        )
    if np.any(plan.alloc[0]):
        raise AllocationError("step 0: no resources are available at the failure instant")
    state = initial_state(scenario)
    rewards = [utility_of(scenario.network, state.functional)]
    for t in range(1, T + 1):
        if state.done:
            if np.any(plan.alloc[t]):
                raise AllocationError(f"step {t}: allocation after recovery finished")
            rewards.append(rewards[-1])
            continue
        out = apply_allocation(scenario, state, plan.alloc[t])
        rewards.append(out.reward)
        state = out.next_state
    return rewards


def evaluate_plan(scenario: FailureScenario, plan: RecoveryPlan) -> int:
    """Total utility: the sum over steps ``0..T`` of the functional nodes' utility."""
    return sum(replay_plan(scenario, plan))


def write_plan_csv(plan: RecoveryPlan, network: InterdependentNetwork, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "node", "alloc"])
        for t, v in zip(*np.nonzero(plan.alloc)):
            w.writerow([int(t), network.names[v], int(plan.alloc[t, v])])


def read_plan_csv(path: str | Path, scenario: FailureScenario) -> RecoveryPlan:
    net = scenario.network
    table = np.zeros((scenario.horizon + 1, net.n), dtype=np.int64)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["step", "node", "alloc"]:
            raise ValueError(f"{path}: expected header step,node,alloc")
        for lineno, rec in enumerate(reader, start=2):
            t = int(rec["step"])
            if not 0 <= t <= scenario.horizon:
                raise ValueError(f"{path}:{lineno}: step {t} outside 0..{scenario.horizon}")
            table[t, net.index(rec["node"])] += int(rec["alloc"])
    return RecoveryPlan(table)
