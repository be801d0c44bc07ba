"""DeepPR: deep Q-learning over ordered node-pair actions with RATIO-mixed exploration.

An action ``(i, j)`` gives node ``i`` as much of the step budget as it still
needs and hands any leftover to ``j``. Actions are indexed first-major,
second-minor with the diagonal skipped, so there are ``n(n-1)`` of them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import neural
from .dynamics import RecoveryState, apply_allocation, initial_reward, initial_state
from .netmodel import FailureScenario
from .solvers import PolicyStep, ratio_order


def n_actions(n: int) -> int:
    return n * (n - 1)


def action_index(first: int, second: int, n: int) -> int:
    if first == second or not (0 <= first < n and 0 <= second < n):
        raise ValueError(f"invalid action ({first}, {second}) for {n} nodes")
    return first * (n - 1) + (second if second < first else second - 1)


def action_pair(index: int, n: int) -> tuple[int, int]:
    first, rest = divmod(index, n - 1)
    return first, rest if rest < first else rest + 1


@lru_cache(maxsize=None)
def _action_firsts(n: int) -> np.ndarray:
    return np.repeat(np.arange(n), n - 1)


def encode_state(state: RecoveryState) -> np.ndarray:
    return np.asarray(state.remaining, dtype=np.float64)


def legal_mask(state: RecoveryState) -> np.ndarray:
    n = len(state.remaining)
    if state.done:
        return np.zeros(n_actions(n), dtype=bool)
    return np.asarray(state.remaining)[_action_firsts(n)] > 0


def action_to_allocation(scenario: FailureScenario, state: RecoveryState, action: int) -> np.ndarray:
    n = scenario.network.n
    first, second = action_pair(action, n)
    if state.remaining[first] == 0:
        raise ValueError(f"illegal action: node {scenario.network.names[first]} is already saturated")
    budget = scenario.budget(state.step + 1)
    row = np.zeros(n, dtype=np.int64)
    row[first] = min(budget, state.remaining[first])
    row[second] = min(budget - row[first], state.remaining[second])
    return row


@dataclass(frozen=True)
class ExplorationSchedule:
    eps_start: float = 1.0
    eps_end: float = 0.1
    eps_decrement: float = 1e-4
    omega_ratio: float = 0.5

    def epsilon(self, episode: int) -> float:
        # rounding keeps e.g. 1.0 - 9000 * 1e-4 from landing a hair above 0.1
        return max(self.eps_end, round(self.eps_start - episode * self.eps_decrement, 12))


def ratio_action(scenario: FailureScenario, state: RecoveryState) -> int:
    order = ratio_order(scenario, state)
    first = order[0]
    if len(order) > 1:
        second = order[1]
    else:
        others = [v for v in range(scenario.network.n) if v != first]
        second = next((v for v in others if state.remaining[v] > 0), others[0])
    return action_index(first, second, scenario.network.n)


def greedy_action(params: neural.QNetParams, state: RecoveryState) -> int:
    q = neural.forward(params, encode_state(state))
    return int(np.argmax(np.where(legal_mask(state), q, -np.inf)))


def select_action(
    params: neural.QNetParams,
    scenario: FailureScenario,
    state: RecoveryState,
    schedule: ExplorationSchedule,
    episode: int,
    rng: np.random.Generator,
) -> tuple[int, str]:
    """Epsilon-greedy choice; exploration follows RATIO with probability ``omega_ratio``."""
    if rng.random() >= schedule.epsilon(episode):
        return greedy_action(params, state), "greedy"
    if rng.random() < schedule.omega_ratio:
        return ratio_action(scenario, state), "ratio"
    legal = np.flatnonzero(legal_mask(state))
    return int(legal[rng.integers(len(legal))]), "random"


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions with uniform sampling."""

    def __init__(self, capacity: int, n_inputs: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, n_inputs))
        self.next_states = np.zeros((capacity, n_inputs))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.terminal = np.zeros(capacity, dtype=bool)
        self.size = 0
        self.cursor = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state, action: int, reward: float, next_state, terminal: bool) -> None:
        i = self.cursor
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.terminal[i] = terminal
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> neural.Batch:
        idx = rng.integers(self.size, size=batch_size)
        nxt = self.next_states[idx]
        n = nxt.shape[1]
        return neural.Batch(
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            nxt,
            self.terminal[idx],
            nxt[:, _action_firsts(n)] > 0,
        )


@dataclass
class TrainConfig:
    episodes: int = 3000
    gamma: float = 0.6
    lr: float = 1e-3
    hidden: int = 200
    replay_capacity: int = 20_000
    batch_size: int = 32
    sync_period: int = 200
    seed: int = 0
    eps_start: float = 1.0
    eps_end: float = 0.1
    eps_decrement: float = 1e-4
    omega_ratio: float = 0.5
    eval_every: int = 0

    def validate(self) -> None:
        problems = []
        if self.episodes < 0:
            problems.append("episodes must be >= 0")
        if not 0.0 <= self.gamma <= 1.0:
            problems.append("gamma must lie in [0, 1]")
        if self.lr <= 0:
            problems.append("lr must be positive")
        if self.hidden < 1:
            problems.append("hidden must be >= 1")
        if self.batch_size < 1:
            problems.append("batch_size must be >= 1")
        if self.replay_capacity < self.batch_size:
            problems.append("replay_capacity must be >= batch_size")
        if self.sync_period < 1:
            problems.append("sync_period must be >= 1")
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            problems.append("need 0 <= eps_end <= eps_start <= 1")
        if self.eps_decrement < 0:
            problems.append("eps_decrement must be >= 0")
        if not 0.0 <= self.omega_ratio <= 1.0:
            problems.append("omega_ratio must lie in [0, 1]")
        if self.eval_every < 0:
            problems.append("eval_every must be >= 0")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def schedule(self) -> ExplorationSchedule:
        return ExplorationSchedule(self.eps_start, self.eps_end, self.eps_decrement, self.omega_ratio)


@dataclass
class EpisodeRecord:
    episode: int
    ret: int
    epsilon: float
    loss_mean: float


@dataclass
class TrainResult:
    params: neural.QNetParams
    adam: neural.AdamState
    curve: list[EpisodeRecord] = field(default_factory=list)
    greedy_returns: list[tuple[int, int]] = field(default_factory=list)
    plans: list[list[np.ndarray]] | None = None


def greedy_policy(params: neural.QNetParams) -> PolicyStep:
    def step(scenario: FailureScenario, state: RecoveryState) -> np.ndarray:
        return action_to_allocation(scenario, state, greedy_action(params, state))

    return step


def greedy_return(scenario: FailureScenario, params: neural.QNetParams) -> int:
    state = initial_state(scenario)
    total = initial_reward(scenario)
    while not state.done:
        out = apply_allocation(scenario, state, action_to_allocation(scenario, state, greedy_action(params, state)))
        total += out.reward
        state = out.next_state
    return total


def train(scenario: FailureScenario, config: TrainConfig, keep_plans: bool = False) -> TrainResult:
    """Train a Q-network on one scenario; every episode restarts from the initial failure."""
    config.validate()
    n = scenario.network.n
    if n < 2:
        raise ValueError("DeepPR needs at least two nodes")
    rng = np.random.default_rng(config.seed)
    params = neural.init_params(n, n_actions(n), config.hidden, rng)
    target = neural.sync_target(params)
    adam = neural.adam_init(params, config.lr)
    buffer = ReplayBuffer(config.replay_capacity, n)
    schedule = config.schedule
    start_state = initial_state(scenario)
    start_reward = initial_reward(scenario)
    result = TrainResult(params, adam, plans=[] if keep_plans else None)
    train_steps = 0

    for episode in range(config.episodes):
        eps = schedule.epsilon(episode)
        state = start_state
        ret = start_reward
        losses = []
        rows = []
        while not state.done:
            action, _ = select_action(params, scenario, state, schedule, episode, rng)
            row = action_to_allocation(scenario, state, action)
            out = apply_allocation(scenario, state, row)
            buffer.push(encode_state(state), action, out.reward, encode_state(out.next_state), out.done)
            ret += out.reward
            if keep_plans:
                rows.append(row)
            state = out.next_state
            if len(buffer) >= config.batch_size:
                batch = buffer.sample(config.batch_size, rng)
                loss, grads = neural.td_loss(params, target, batch, config.gamma)
                params = neural.adam_update(params, adam, grads)
                losses.append(loss)
                train_steps += 1
                if train_steps % config.sync_period == 0:
                    target = neural.sync_target(params)
        result.curve.append(EpisodeRecord(episode, ret, eps, float(np.mean(losses)) if losses else math.nan))
        if keep_plans:
            result.plans.append(rows)
        if config.eval_every and (episode + 1) % config.eval_every == 0:
            result.greedy_returns.append((episode + 1, greedy_return(scenario, params)))

    result.params = params
    return result


def write_curve_csv(curve: list[EpisodeRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "return", "epsilon", "loss_mean"])
        for rec in curve:
            loss = "NA" if math.isnan(rec.loss_mean) else f"{rec.loss_mean:.10g}"
            w.writerow([rec.episode, rec.ret, f"{rec.epsilon:.6g}", loss])
