"""End-to-end orchestration: centralized training, decentralized greedy
execution, and side-by-side variant comparison.

A training run is one sequential loop per the distributed deep-Q procedure:
per episode, reset to all-open; per step, one epsilon draw switches the whole
joint selection between masked random exploration and masked greedy
exploitation; the environment applies the joint action; every agent stores its
local experience tuple and takes one replay-batch gradient step; target
networks are refreshed every ``sync_interval`` environment steps; epsilon
decays per episode. Identical (feeder, config) pairs reproduce bit-for-bit.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent import (
    AgentPair,
    EpsilonSchedule,
    Experience,
    Hyperparameters,
    QNetwork,
    ReplayBuffer,
    load_checkpoint,
    save_checkpoint,
    train_step,
)
from .environment import (
    AgentAction,
    JointAction,
    RestorationEnv,
    decode_action,
)
from .feeder import Feeder
from .masking import exploit_joint, explore_joint

EPISODES_HEADER = ["episode", "R", "restored_kw", "violations", "epsilon", "r_per_step"]
TRACE_HEADER = ["step", "agent", "breaker", "toggle", "served_kw", "reward", "violation"]
COMPARISON_HEADER = [
    "variant",
    "convergence_episode",
    "final50_mean",
    "final50_std",
    "violations",
    "wall_clock_s",
]


@dataclass
class TrainingConfig:
    episodes: int = 500
    steps_per_episode: int = 16
    sync_interval: int = 50          # environment steps between target syncs
    masking: bool = True
    agent_mode: str = "multi"        # "single" collapses the partition
    penalty: float = -1.0            # reward M when masking is off
    hidden_sizes: tuple[int, ...] = (64, 64)
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    schedule: EpsilonSchedule = field(default_factory=EpsilonSchedule)

    def __post_init__(self):
        if self.episodes < 0:
            raise ValueError("episodes must be non-negative")
        if self.steps_per_episode <= 0 or self.sync_interval <= 0:
            raise ValueError("step counters must be positive")
        if self.agent_mode not in ("multi", "single"):
            raise ValueError(f"unknown agent_mode {self.agent_mode!r}")

    @property
    def seed(self) -> int:
        return self.hyper.seed


@dataclass(frozen=True)
class EpisodeLog:
    episode: int
    reward: float        # R, sum of step rewards
    restored_kw: float   # served power at episode end
    violations: int
    epsilon: float
    steps: int

    @property
    def r_per_step(self) -> float:
        return self.reward / self.steps if self.steps else 0.0


@dataclass(frozen=True)
class TraceEntry:
    step: int
    agent: int
    breaker: str
    toggle: str          # "close" | "open"
    served_kw: float
    reward: float        # normalized restored power of the post-step state
    violation: int


@dataclass
class RestorationTrace:
    entries: list[TraceEntry]
    step_states: list[tuple[int, ...]] = field(default_factory=list)

    def served_series(self) -> list[float]:
        out: list[float] = []
        for e in self.entries:
            if len(out) < e.step:
                out.append(e.served_kw)
        return out

    @property
    def final_served_kw(self) -> float:
        return self.entries[-1].served_kw if self.entries else 0.0

    @property
    def total_violations(self) -> int:
        seen = {}
        for e in self.entries:
            seen[e.step] = e.violation
        return sum(seen.values())

    def pickup_steps_to(self, target_kw: float, tol: float = 1e-6) -> int | None:
        """Number of serving-increase steps until the target is first reached."""
        pickups = 0
        prev = 0.0
        for served in self.served_series():
            if served > prev + tol:
                pickups += 1
            prev = served
            if served >= target_kw - tol:
                return pickups
        return None

    def pickup_steps_to_states(self, states, tol: float = 1e-6) -> int | None:
        """Serving-increase steps until a breaker configuration is first hit."""
        target = tuple(states)
        pickups = 0
        prev = 0.0
        for served, reached in zip(self.served_series(), self.step_states):
            if served > prev + tol:
                pickups += 1
            prev = served
            if reached == target:
                return pickups
        return None


def agent_slots(feeder: Feeder, agent_mode: str) -> list[tuple[int, ...]]:
    """Breaker-index groups per learning agent.

    Multi-agent mode follows the microgrid partition; single-agent mode
    collapses it into one agent over all breakers, keeping partition order.
    """
    groups = [feeder.agent_breaker_indices(a) for a in range(feeder.n_agents)]
    if agent_mode == "single":
        return [tuple(i for g in groups for i in g)]
    return groups


def build_agents(feeder: Feeder, cfg: TrainingConfig) -> list[AgentPair]:
    """Freshly initialized main/target pairs, one per agent slot."""
    pairs = []
    for i, group in enumerate(agent_slots(feeder, cfg.agent_mode)):
        sizes = [len(group), *cfg.hidden_sizes, 2 * len(group)]
        pairs.append(
            AgentPair.initialized(sizes, np.random.default_rng([cfg.seed, i]))
        )
    return pairs


def train(feeder: Feeder, cfg: TrainingConfig):
    """Run the full training loop; returns (models, per-episode logs)."""
    slots = agent_slots(feeder, cfg.agent_mode)
    env = RestorationEnv(
        feeder,
        reward_mode="masked" if cfg.masking else "penalty",
        penalty=cfg.penalty,
        max_steps=cfg.steps_per_episode,
        agent_breakers=slots,
    )
    rng = np.random.default_rng(cfg.seed)
    models = build_agents(feeder, cfg)
    buffers = [ReplayBuffer(cfg.hyper.capacity) for _ in slots]
    counts = env.action_space_sizes()
    logs: list[EpisodeLog] = []
    sync_clock = 0

    for episode in range(cfg.episodes):
        eps = cfg.schedule.value(episode)
        obs = env.reset()
        total_reward = 0.0
        violations = 0
        served_end = 0.0
        for _ in range(cfg.steps_per_episode):
            if rng.random() <= eps:
                if cfg.masking:
                    joint = explore_joint(env.validate_joint, counts, rng)
                else:
                    joint = JointAction(
                        tuple(AgentAction(int(rng.integers(n))) for n in counts)
                    )
            else:
                q_vectors = [
                    pair.main.forward(obs[i].as_array())
                    for i, pair in enumerate(models)
                ]
                if cfg.masking:
                    noops = [env.noop_open_actions(i) for i in range(len(slots))]
                    joint = exploit_joint(env.validate_joint, q_vectors, noops, rng)
                else:
                    joint = JointAction(
                        tuple(AgentAction(int(np.argmax(q))) for q in q_vectors)
                    )
            result = env.step(joint)
            total_reward += result.reward
            if not result.constraints_ok:
                violations += 1
            for i in range(len(slots)):
                buffers[i].push(
                    Experience(
                        obs[i].bits,
                        joint.actions[i].index,
                        result.reward,
                        result.observations[i].bits,
                    )
                )
            obs = result.observations
            served_end = result.served_kw
            sync_clock += 1
            for i, pair in enumerate(models):
                if len(buffers[i]) >= cfg.hyper.batch_size:
                    train_step(
                        pair, buffers[i].sample(cfg.hyper.batch_size, rng), cfg.hyper
                    )
            if sync_clock % cfg.sync_interval == 0:
                for pair in models:
                    pair.sync_target()
        logs.append(
            EpisodeLog(
                episode=episode,
                reward=total_reward,
                restored_kw=served_end,
                violations=violations,
                epsilon=eps,
                steps=cfg.steps_per_episode,
            )
        )
    return models, logs


def _slots_for_models(feeder: Feeder, nets: list[QNetwork]) -> list[tuple[int, ...]]:
    multi = agent_slots(feeder, "multi")
    if len(nets) == len(multi) and all(
        n.n_inputs == len(g) and n.n_outputs == 2 * len(g)
        for n, g in zip(nets, multi)
    ):
        return multi
    single = agent_slots(feeder, "single")
    if len(nets) == 1 and nets[0].n_inputs == len(single[0]):
        return single
    raise ValueError("models do not match the feeder's partition")


def execute(
    models,
    feeder: Feeder,
    max_steps: int = 16,
    slots: list[tuple[int, ...]] | None = None,
) -> RestorationTrace:
    """Greedy decentralized rollout from the all-open state.

    No validity pre-checks are made: each agent acts from its local
    observation alone, and any constraint violation along the way is recorded
    in the trace. The reward column is the normalized restored power of the
    post-step state.
    """
    nets = [m.main if isinstance(m, AgentPair) else m for m in models]
    if slots is None:
        slots = _slots_for_models(feeder, nets)
    env = RestorationEnv(
        feeder, reward_mode="penalty", max_steps=max_steps, agent_breakers=slots
    )
    obs = env.reset()
    denominator = feeder.total_load_kw()
    entries: list[TraceEntry] = []
    step_states: list[tuple[int, ...]] = []
    for step in range(1, max_steps + 1):
        joint = JointAction(
            tuple(
                AgentAction(int(np.argmax(net.forward(obs[i].as_array()))))
                for i, net in enumerate(nets)
            )
        )
        result = env.step(joint)
        reward = (
            result.weighted_kw / denominator if denominator > 0 else 0.0
        )
        for i, action in enumerate(joint.actions):
            ordinal, close = decode_action(action)
            entries.append(
                TraceEntry(
                    step=step,
                    agent=i,
                    breaker=feeder.breakers[slots[i][ordinal]].id,
                    toggle="close" if close else "open",
                    served_kw=result.served_kw,
                    reward=reward,
                    violation=0 if result.constraints_ok else 1,
                )
            )
        obs = result.observations
        step_states.append(env.breaker_states)
    return RestorationTrace(entries, step_states)


def convergence_episode(
    rewards, window: int = 50, fraction: float = 0.95
) -> int | None:
    """First episode whose forward ``window``-mean reaches ``fraction`` of the
    run's maximum episode reward; None when the run never settles."""
    r = np.asarray(list(rewards), dtype=float)
    if len(r) < window or len(r) == 0:
        return None
    target = fraction * r.max()
    sums = np.convolve(r, np.ones(window), mode="valid") / window
    hits = np.flatnonzero(sums >= target)
    return int(hits[0]) if len(hits) else None


def compare(feeder: Feeder, variants, execute_steps: int = 16) -> list[dict]:
    """Train each (label, config) variant and tabulate the outcomes."""
    rows: list[dict] = []
    for label, cfg in variants:
        start = time.perf_counter()
        models, logs = train(feeder, cfg)
        wall = time.perf_counter() - start
        rewards = [log.reward for log in logs]
        tail = rewards[-50:] if rewards else []
        conv = convergence_episode(rewards)
        rows.append(
            {
                "variant": label,
                "convergence_episode": conv if conv is not None else -1,
                "final50_mean": float(np.mean(tail)) if tail else 0.0,
                "final50_std": float(np.std(tail)) if tail else 0.0,
                "violations": sum(log.violations for log in logs),
                "wall_clock_s": wall,
            }
        )
    return rows


# -- artifact emission -------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".10g")
    return str(x)


def write_episodes_csv(path, logs: list[EpisodeLog]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EPISODES_HEADER)
        for log in logs:
            writer.writerow(
                [
                    log.episode,
                    _fmt(log.reward),
                    _fmt(log.restored_kw),
                    log.violations,
                    _fmt(log.epsilon),
                    _fmt(log.r_per_step),
                ]
            )


def write_trace_csv(path, trace: RestorationTrace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for e in trace.entries:
            writer.writerow(
                [
                    e.step,
                    e.agent,
                    e.breaker,
                    e.toggle,
                    _fmt(e.served_kw),
                    _fmt(e.reward),
                    e.violation,
                ]
            )


def write_comparison_csv(path, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COMPARISON_HEADER)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in COMPARISON_HEADER])


def save_models(out_dir, feeder: Feeder, cfg: TrainingConfig, models) -> list[str]:
    """One checkpoint file per agent, carrying its partition binding."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    slots = agent_slots(feeder, cfg.agent_mode)
    paths = []
    for i, (pair, group) in enumerate(zip(models, slots)):
        breaker_ids = [feeder.breakers[g].id for g in group]
        path = out / f"checkpoint_agent{i}.json"
        net = pair.main if isinstance(pair, AgentPair) else pair
        save_checkpoint(path, i, breaker_ids, net)
        paths.append(str(path))
    return paths


def load_models(checkpoint_dir, feeder: Feeder):
    """Load every checkpoint in a directory; returns (nets, slots)."""
    paths = sorted(Path(checkpoint_dir).glob("checkpoint_agent*.json"))
    if not paths:
        raise FileNotFoundError(f"no checkpoint_agent*.json under {checkpoint_dir}")
    loaded = [load_checkpoint(p) for p in paths]
    loaded.sort(key=lambda t: t[0])
    nets = [net for _, _, net in loaded]
    slots = [
        tuple(feeder.breaker_index(bid) for bid in breaker_ids)
        for _, breaker_ids, net in loaded
    ]
    for net, group in zip(nets, slots):
        if net.n_inputs != len(group) or net.n_outputs != 2 * len(group):
            raise ValueError("checkpoint does not match the feeder's breaker groups")
    return nets, slots
