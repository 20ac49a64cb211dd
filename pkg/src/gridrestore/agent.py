"""Per-agent deep-Q machinery: MLP value network with manual backprop,
target-network pair, replay buffer, and the exponential exploration schedule.

The network maps an agent's breaker-state observation to one value per toggle
action (2 per breaker). Training regresses the taken action's output toward a
blended label

    y      = r + gamma * max_a' Q_target(o', a')
    label  = (1 - alpha) * Q_main(o, a) + alpha * y

with labels held constant for the gradient step (plain SGD on the mean squared
error at the taken actions only). Keeping the optimizer to bare SGD makes the
gradient exactly checkable against central finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class AllActionsMasked(RuntimeError):
    """Action selection was asked to choose from an empty candidate set."""


class UnderfilledBuffer(RuntimeError):
    """sample() needs at least batch_size stored experiences."""


@dataclass
class Hyperparameters:
    # Defaults are the measured sweet spot for the study feeders: a low
    # discount keeps Q magnitudes near the per-step reward scale, which is
    # what separates neighboring switching policies here.
    gamma: float = 0.5         # discount on the bootstrapped future value
    alpha: float = 0.5         # label blend rate toward the bootstrap target
    eta: float = 0.05          # SGD step size
    batch_size: int = 32
    capacity: int = 2000       # replay window; recency keeps targets fresh
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must be in [0, 1)")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if self.eta <= 0:
            raise ValueError("eta must be positive")


@dataclass(frozen=True)
class EpsilonSchedule:
    """eps(episode) = eps_min + (eps_max - eps_min) * exp(-decay * episode)."""

    eps_min: float = 0.01
    eps_max: float = 1.0
    decay: float = 0.02

    def __post_init__(self):
        if not (0 <= self.eps_min < self.eps_max <= 1):
            raise ValueError("need 0 <= eps_min < eps_max <= 1")
        if self.decay <= 0:
            raise ValueError("decay must be positive")

    def value(self, episode: int) -> float:
        return self.eps_min + (self.eps_max - self.eps_min) * float(
            np.exp(-self.decay * episode)
        )


class QNetwork:
    """Fully connected ReLU network with a linear output layer."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]):
        self.weights = weights  # each (out, in)
        self.biases = biases    # each (out,)

    @classmethod
    def initialized(cls, layer_sizes, rng: np.random.Generator) -> "QNetwork":
        """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer."""
        weights, biases = [], []
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = 1.0 / np.sqrt(n_in)
            weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
            biases.append(rng.uniform(-bound, bound, size=n_out))
        return cls(weights, biases)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_outputs(self) -> int:
        return self.weights[-1].shape[0]

    def copy(self) -> "QNetwork":
        return QNetwork([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def forward(self, observation) -> np.ndarray:
        x = np.asarray(observation, dtype=float).reshape(-1)
        if x.shape[0] != self.n_inputs:
            raise ValueError(
                f"observation length {x.shape[0]} != network input {self.n_inputs}"
            )
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            x = np.maximum(w @ x + b, 0.0)
        return self.weights[-1] @ x + self.biases[-1]

    def forward_batch(self, x: np.ndarray):
        """Batched forward pass; returns (output, activation cache)."""
        if x.ndim != 2 or x.shape[1] != self.n_inputs:
            raise ValueError("batch shape must be (n, n_inputs)")
        pre: list[np.ndarray] = []
        post: list[np.ndarray] = [x]
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = h @ w.T + b
            h = np.maximum(z, 0.0)
            pre.append(z)
            post.append(h)
        out = h @ self.weights[-1].T + self.biases[-1]
        return out, (pre, post)

    def backward(self, cache, d_out: np.ndarray):
        """Gradients of a scalar loss given d(loss)/d(output)."""
        pre, post = cache
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = d_out
        grads_w[-1] = delta.T @ post[-1]
        grads_b[-1] = delta.sum(axis=0)
        for layer in range(len(self.weights) - 2, -1, -1):
            delta = (delta @ self.weights[layer + 1]) * (pre[layer] > 0.0)
            grads_w[layer] = delta.T @ post[layer]
            grads_b[layer] = delta.sum(axis=0)
        return grads_w, grads_b

    def apply_gradients(self, grads_w, grads_b, eta: float):
        for w, gw in zip(self.weights, grads_w):
            w -= eta * gw
        for b, gb in zip(self.biases, grads_b):
            b -= eta * gb


@dataclass
class AgentPair:
    """Main network plus its delayed target copy."""

    main: QNetwork
    target: QNetwork

    @classmethod
    def initialized(cls, layer_sizes, rng: np.random.Generator) -> "AgentPair":
        main = QNetwork.initialized(layer_sizes, rng)
        return cls(main=main, target=main.copy())

    def sync_target(self) -> None:
        """Copy main parameters into the target network (bit-equal)."""
        self.target = self.main.copy()


@dataclass(frozen=True)
class Experience:
    observation: tuple[int, ...]
    action: int
    reward: float
    next_observation: tuple[int, ...]


class ReplayBuffer:
    """Fixed-capacity ring; eviction is oldest-first."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._data: list[Experience] = []
        self._write = 0

    def __len__(self) -> int:
        return len(self._data)

    def push(self, experience: Experience) -> None:
        if len(self._data) < self.capacity:
            self._data.append(experience)
        else:
            self._data[self._write] = experience
        self._write = (self._write + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Experience]:
        """Uniform sample without replacement within one batch."""
        if batch_size > len(self._data):
            raise UnderfilledBuffer(
                f"buffer holds {len(self._data)} < batch_size {batch_size}"
            )
        picks = rng.choice(len(self._data), size=batch_size, replace=False)
        return [self._data[i] for i in picks]


def act(
    net: QNetwork,
    observation,
    eps: float,
    mask,
    rng: np.random.Generator,
) -> int:
    """Epsilon-greedy action index over the non-masked toggles.

    With probability eps the choice is uniform over allowed indices, otherwise
    the argmax of the network output (ties to the lowest index).
    """
    forbidden = set(mask) if mask else set()
    allowed = [i for i in range(net.n_outputs) if i not in forbidden]
    if not allowed:
        raise AllActionsMasked("every action index is masked")
    if eps > 0 and rng.random() < eps:
        return allowed[int(rng.integers(len(allowed)))]
    q = net.forward(observation)
    masked = q.copy()
    if forbidden:
        masked[list(forbidden)] = -np.inf
    return int(np.argmax(masked))


def train_step(pair: AgentPair, batch: list[Experience], hp: Hyperparameters) -> float:
    """One SGD step of the blended-label regression; returns the batch loss."""
    if not batch:
        raise ValueError("batch must be non-empty")
    n = len(batch)
    obs = np.array([e.observation for e in batch], dtype=float)
    nxt = np.array([e.next_observation for e in batch], dtype=float)
    actions = np.array([e.action for e in batch], dtype=np.intp)
    rewards = np.array([e.reward for e in batch], dtype=float)

    q_all, cache = pair.main.forward_batch(obs)
    q_next, _ = pair.target.forward_batch(nxt)
    bootstrapped = rewards + hp.gamma * q_next.max(axis=1)
    q_taken = q_all[np.arange(n), actions]
    labels = (1.0 - hp.alpha) * q_taken + hp.alpha * bootstrapped

    # Loss touches only the taken actions; every other output's label is its
    # own current prediction, so its error term is identically zero.
    residual = q_taken - labels
    d_out = np.zeros_like(q_all)
    d_out[np.arange(n), actions] = 2.0 * residual / n
    grads_w, grads_b = pair.main.backward(cache, d_out)
    pair.main.apply_gradients(grads_w, grads_b, hp.eta)
    return float(np.mean(residual**2))


# -- checkpoints -----------------------------------------------------------------


def save_checkpoint(path, agent_id: int, breaker_ids, net: QNetwork) -> None:
    """Dump architecture, parameters and partition binding as JSON."""
    doc = {
        "format_version": 1,
        "agent": agent_id,
        "breakers": list(breaker_ids),
        "layer_sizes": net.layer_sizes,
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path) -> tuple[int, list[str], QNetwork]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != 1:
        raise ValueError(f"unsupported checkpoint version in {path}")
    net = QNetwork(
        [np.array(w, dtype=float) for w in doc["weights"]],
        [np.array(b, dtype=float) for b in doc["biases"]],
    )
    expected = [w.shape for w in net.weights]
    declared = [
        (b, a) for a, b in zip(doc["layer_sizes"][:-1], doc["layer_sizes"][1:])
    ]
    if expected != declared:
        raise ValueError(f"checkpoint {path} architecture mismatch")
    return int(doc["agent"]), [str(b) for b in doc["breakers"]], net
