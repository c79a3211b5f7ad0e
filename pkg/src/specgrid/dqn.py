"""From-scratch deep Q-network: a two-hidden-layer ReLU MLP trained by plain
minibatch gradient descent on the squared TD error against a lagged target
network, plus the replay ring and the epsilon-greedy policy.

No autograd: the backward pass is written out so it can be checked against
finite differences parameter by parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_HIDDEN = (64, 64)


class ArchitectureMismatch(ValueError):
    """Two networks (or a network and a payload) disagree on layer dimensions."""


@dataclass
class QNetwork:
    """Parameter container; weights[l] has shape (fan_in, fan_out)."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def initialize(cls, layer_dims: Sequence[int], rng: np.random.Generator) -> "QNetwork":
        """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases, float64."""
        dims = tuple(int(d) for d in layer_dims)
        if len(dims) != 4:
            raise ArchitectureMismatch("expected [input, hidden1, hidden2, output] dims")
        if any(d < 1 for d in dims):
            raise ArchitectureMismatch(f"non-positive layer dim in {dims}")
        weights, biases = [], []
        for fan_in, fan_out in zip(dims, dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(dims, weights, biases)

    def copy(self) -> "QNetwork":
        return QNetwork(
            self.layer_dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flat_parameters(self) -> np.ndarray:
        """Canonical order: per layer, weights row-major then biases."""
        chunks = []
        for w, b in zip(self.weights, self.biases):
            chunks.append(w.ravel())
            chunks.append(b)
        return np.concatenate(chunks).astype(np.float64)

    @classmethod
    def from_flat(cls, layer_dims: Sequence[int], flat: np.ndarray) -> "QNetwork":
        dims = tuple(int(d) for d in layer_dims)
        expected = sum(i * o + o for i, o in zip(dims, dims[1:]))
        if flat.shape != (expected,):
            raise ArchitectureMismatch(
                f"flat vector of length {flat.shape} does not fit dims {dims} "
                f"(need {expected})"
            )
        weights, biases, at = [], [], 0
        for fan_in, fan_out in zip(dims, dims[1:]):
            weights.append(flat[at : at + fan_in * fan_out].reshape(fan_in, fan_out).copy())
            at += fan_in * fan_out
            biases.append(flat[at : at + fan_out].copy())
            at += fan_out
        return cls(dims, weights, biases)

    def set_parameters_from(self, other: "QNetwork") -> None:
        if other.layer_dims != self.layer_dims:
            raise ArchitectureMismatch(
                f"cannot copy parameters across architectures "
                f"{other.layer_dims} -> {self.layer_dims}"
            )
        for mine, theirs in zip(self.weights, other.weights):
            mine[...] = theirs
        for mine, theirs in zip(self.biases, other.biases):
            mine[...] = theirs


def _forward_batch(net: QNetwork, x: np.ndarray):
    z1 = x @ net.weights[0] + net.biases[0]
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ net.weights[1] + net.biases[1]
    a2 = np.maximum(z2, 0.0)
    q = a2 @ net.weights[2] + net.biases[2]
    return q, (x, z1, a1, z2, a2)


def forward(net: QNetwork, state: np.ndarray) -> np.ndarray:
    """Q-values for one state vector."""
    x = np.asarray(state, dtype=float)
    if x.shape != (net.input_dim,):
        raise ArchitectureMismatch(
            f"state of shape {x.shape} does not match input dim {net.input_dim}"
        )
    q, _ = _forward_batch(net, x[None, :])
    return q[0]


def select_action(q_values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy with deterministic lowest-index tie breaking.

    The generator is only consulted when epsilon > 0, so a frozen greedy
    policy consumes no randomness.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon {epsilon} outside [0, 1]")
    n = len(q_values)
    if n == 0:
        raise ValueError("empty q_values")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(n))
    return int(np.argmax(q_values))


@dataclass(frozen=True)
class Experience:
    state: "object"  # AgentState (anything exposing .vector())
    action: int
    reward: float
    next_state: "object"


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray

    def __len__(self) -> int:
        return self.states.shape[0]


class ReplayBuffer:
    """Bounded FIFO ring of experiences, stored as flat float arrays."""

    def __init__(self, capacity: int = 10000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._states: np.ndarray | None = None
        self._next_states: np.ndarray | None = None
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity)
        self._count = 0  # total insertions ever

    def __len__(self) -> int:
        return min(self._count, self.capacity)

    def push(self, exp: Experience) -> None:
        s = np.asarray(exp.state.vector() if hasattr(exp.state, "vector") else exp.state)
        s2 = np.asarray(
            exp.next_state.vector() if hasattr(exp.next_state, "vector") else exp.next_state
        )
        if self._states is None:
            self._states = np.zeros((self.capacity, s.shape[0]))
            self._next_states = np.zeros((self.capacity, s.shape[0]))
        at = self._count % self.capacity
        self._states[at] = s
        self._next_states[at] = s2
        self._actions[at] = exp.action
        self._rewards[at] = exp.reward
        self._count += 1

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform draw without replacement; deterministic given the generator."""
        size = len(self)
        if batch_size > size:
            raise ValueError(f"cannot sample {batch_size} from buffer of size {size}")
        idx = rng.choice(size, size=batch_size, replace=False)
        return Batch(
            states=self._states[idx],
            actions=self._actions[idx],
            rewards=self._rewards[idx],
            next_states=self._next_states[idx],
        )


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.05
    decay_steps: int = 2000


@dataclass(frozen=True)
class Hyperparams:
    gamma: float = 0.9
    alpha: float = 1e-3
    batch_size: int = 32
    target_sync_period: int = 100
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    aggregation_period: int = 50
    replay_capacity: int = 10000

    def validate(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.alpha <= 0.0:
            raise ValueError("alpha must be > 0")
        for eps in (self.epsilon.start, self.epsilon.end):
            if not 0.0 <= eps <= 1.0:
                raise ValueError("epsilon bounds must lie in [0, 1]")


def td_targets(batch: Batch, target_net: QNetwork, gamma: float) -> np.ndarray:
    """y = r + gamma * max_a' Q_target(s', a') (continuing task, no terminals)."""
    q_next, _ = _forward_batch(target_net, batch.next_states)
    return batch.rewards + gamma * q_next.max(axis=1)


def train_batch(
    net: QNetwork, target_net: QNetwork, batch: Batch, hyper: Hyperparams
) -> float:
    """One gradient-descent step on the mean squared TD error.

    Only the taken-action output carries error per sample. Returns the loss
    before the parameter update.
    """
    if net.layer_dims != target_net.layer_dims:
        raise ArchitectureMismatch("online and target network dims differ")
    y = td_targets(batch, target_net, hyper.gamma)
    q, (x, z1, a1, z2, a2) = _forward_batch(net, batch.states)
    m = len(batch)
    rows = np.arange(m)
    diff = q[rows, batch.actions] - y
    loss = float(np.mean(diff**2))
    if not np.isfinite(loss):
        raise FloatingPointError(
            f"non-finite TD loss {loss} (|diff| max "
            f"{np.max(np.abs(diff)) if diff.size else 'n/a'})"
        )

    dq = np.zeros_like(q)
    dq[rows, batch.actions] = 2.0 * diff / m
    dw3 = a2.T @ dq
    db3 = dq.sum(axis=0)
    da2 = dq @ net.weights[2].T
    dz2 = da2 * (z2 > 0.0)
    dw2 = a1.T @ dz2
    db2 = dz2.sum(axis=0)
    da1 = dz2 @ net.weights[1].T
    dz1 = da1 * (z1 > 0.0)
    dw1 = x.T @ dz1
    db1 = dz1.sum(axis=0)

    alpha = hyper.alpha
    net.weights[0] -= alpha * dw1
    net.weights[1] -= alpha * dw2
    net.weights[2] -= alpha * dw3
    net.biases[0] -= alpha * db1
    net.biases[1] -= alpha * db2
    net.biases[2] -= alpha * db3
    return loss


def td_loss(net: QNetwork, batch: Batch, y: np.ndarray) -> float:
    """Mean squared TD error against fixed targets, without touching parameters."""
    q, _ = _forward_batch(net, batch.states)
    diff = q[np.arange(len(batch)), batch.actions] - y
    return float(np.mean(diff**2))


def sync_target(net: QNetwork, target_net: QNetwork) -> None:
    target_net.set_parameters_from(net)


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    """Sum of gamma^t * r_t over the given reward stream."""
    total = 0.0
    factor = 1.0
    for r in rewards:
        total += factor * r
        factor *= gamma
    return total
