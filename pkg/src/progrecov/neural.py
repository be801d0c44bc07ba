"""Two-layer ReLU Q-network in numpy: forward pass, TD loss with backprop, Adam, checkpoints."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1
PARAM_NAMES = ("w1", "b1", "w2", "b2")


@dataclass
class QNetParams:
    w1: np.ndarray  # (n_inputs, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, n_actions)
    b2: np.ndarray  # (n_actions,)

    @property
    def n_inputs(self) -> int:
        return self.w1.shape[0]

    @property
    def n_actions(self) -> int:
        return self.w2.shape[1]

    def arrays(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def copy(self) -> "QNetParams":
        return QNetParams(*(a.copy() for a in self.arrays()))


def init_params(n_inputs: int, n_actions: int, hidden: int = 200, seed=0) -> QNetParams:
    """Uniform init in +-sqrt(6 / (fan_in + fan_out)), zero biases."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (n_inputs + hidden))
    lim2 = np.sqrt(6.0 / (hidden + n_actions))
    return QNetParams(
        rng.uniform(-lim1, lim1, (n_inputs, hidden)),
        np.zeros(hidden),
        rng.uniform(-lim2, lim2, (hidden, n_actions)),
        np.zeros(n_actions),
    )


def forward(params: QNetParams, states: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=np.float64)
    if states.shape[-1] != params.n_inputs:
        raise ValueError(f"state has {states.shape[-1]} entries, network expects {params.n_inputs}")
    hidden = np.maximum(states @ params.w1 + params.b1, 0.0)
    return hidden @ params.w2 + params.b2


@dataclass
class Batch:
    states: np.ndarray       # (B, n)
    actions: np.ndarray      # (B,) int
    rewards: np.ndarray      # (B,)
    next_states: np.ndarray  # (B, n)
    terminal: np.ndarray     # (B,) bool
    next_mask: np.ndarray    # (B, A) bool, legal actions in next_states

    def __len__(self) -> int:
        return len(self.actions)


def td_targets(target_params: QNetParams, batch: Batch, gamma: float) -> np.ndarray:
    q_next = forward(target_params, batch.next_states)
    q_next = np.where(batch.next_mask, q_next, -np.inf)
    best = q_next.max(axis=1)
    best = np.where(np.isfinite(best), best, 0.0)
    return batch.rewards + gamma * np.where(batch.terminal, 0.0, best)


def td_loss(eval_params: QNetParams, target_params: QNetParams, batch: Batch, gamma: float):
    """Mean squared TD error and its gradient with respect to ``eval_params``."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    y = td_targets(target_params, batch, gamma)
    x = np.asarray(batch.states, dtype=np.float64)
    z = x @ eval_params.w1 + eval_params.b1
    h = np.maximum(z, 0.0)
    q = h @ eval_params.w2 + eval_params.b2
    rows = np.arange(len(batch))
    err = q[rows, batch.actions] - y
    loss = float(np.mean(err**2))

    dq = np.zeros_like(q)
    dq[rows, batch.actions] = 2.0 * err / len(batch)
    dh = dq @ eval_params.w2.T
    dz = dh * (z > 0)
    grads = QNetParams(x.T @ dz, dz.sum(axis=0), h.T @ dq, dq.sum(axis=0))
    return loss, grads


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_init(params: QNetParams, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    zeros = [np.zeros_like(a) for a in params.arrays()]
    return AdamState(lr, beta1, beta2, eps, 0, zeros, [z.copy() for z in zeros])


def adam_update(params: QNetParams, state: AdamState, grads: QNetParams) -> QNetParams:
    """One bias-corrected Adam step. Moments in ``state`` are updated in place."""
    gs = grads.arrays()
    if not all(np.all(np.isfinite(g)) for g in gs):
        raise FloatingPointError("non-finite gradient")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    out = []
    for p, g, m, v in zip(params.arrays(), gs, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        out.append(p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
    return QNetParams(*out)


def sync_target(eval_params: QNetParams) -> QNetParams:
    return eval_params.copy()


def save_checkpoint(path: str | Path, params: QNetParams, adam: AdamState | None = None) -> None:
    blob = {"version": np.array(CHECKPOINT_VERSION)}
    for name, arr in zip(PARAM_NAMES, params.arrays()):
        blob[name] = arr
    if adam is not None:
        blob["adam_hyper"] = np.array([adam.lr, adam.beta1, adam.beta2, adam.eps])
        blob["adam_step"] = np.array(adam.step)
        for name, m, v in zip(PARAM_NAMES, adam.m, adam.v):
            blob[f"adam_m_{name}"] = m
            blob[f"adam_v_{name}"] = v
    with open(path, "wb") as fh:
        np.savez(fh, **blob)


def load_checkpoint(path: str | Path) -> tuple[QNetParams, AdamState | None]:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        params = QNetParams(*(data[name].copy() for name in PARAM_NAMES))
        adam = None
        if "adam_step" in data:
            lr, b1, b2, eps = (float(x) for x in data["adam_hyper"])
            adam = AdamState(
                lr, b1, b2, eps, int(data["adam_step"]),
                [data[f"adam_m_{n}"].copy() for n in PARAM_NAMES],
                [data[f"adam_v_{n}"].copy() for n in PARAM_NAMES],
            )
    return params, adam
