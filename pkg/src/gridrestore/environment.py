"""Markov decision process over breaker switching in a partitioned feeder.

Each agent owns the breakers of one microgrid and sees only their states.
A step applies every agent's toggle simultaneously, solves the power flow,
and returns the per-agent observations, the shared normalized reward
(weighted restored power over total rated load), and a validity oracle for
candidate joint actions from the new state.

Two reward modes:

``masked``
    The caller must pre-validate joint actions (``validate_joint``); stepping
    an invalid one is a contract violation and raises. Rewards are always the
    normalized restored power, and the constraint-violation counter stays 0.
``penalty``
    Any action is applied. If the resulting state violates a constraint (or
    the power flow diverges), the reward is the penalty value M instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .feeder import Feeder
from .powerflow import PowerFlowSolution, check_constraints, solve


class EpisodeExhausted(RuntimeError):
    """step() was called after the per-episode step budget was spent."""


class InvalidJointAction(RuntimeError):
    """A masked-mode caller stepped a joint action that violates constraints."""


@dataclass(frozen=True)
class Observation:
    """Breaker states of one agent's microgrid, in partition order."""

    bits: tuple[int, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=float)


@dataclass(frozen=True)
class AgentAction:
    """Index into an agent's 2n one-hot toggle space: 2k closes breaker k,
    2k+1 opens it."""

    index: int


@dataclass(frozen=True)
class JointAction:
    actions: tuple[AgentAction, ...]


@dataclass(frozen=True)
class StepResult:
    observations: tuple[Observation, ...]
    reward: float
    mask_oracle: Callable[[JointAction], bool]
    served_kw: float
    weighted_kw: float
    constraints_ok: bool
    solution: PowerFlowSolution


def encode_action(breaker_ordinal: int, close: bool) -> AgentAction:
    if breaker_ordinal < 0:
        raise ValueError("breaker ordinal must be non-negative")
    return AgentAction(2 * breaker_ordinal + (0 if close else 1))


def decode_action(action: AgentAction) -> tuple[int, bool]:
    return action.index // 2, action.index % 2 == 0


class RestorationEnv:
    """Environment state: a feeder, its breaker vector, and a step counter."""

    def __init__(
        self,
        feeder: Feeder,
        reward_mode: str = "masked",
        penalty: float = -1.0,
        max_steps: int = 16,
        agent_breakers: list[tuple[int, ...]] | None = None,
    ):
        if reward_mode not in ("masked", "penalty"):
            raise ValueError(f"unknown reward_mode {reward_mode!r}")
        self.feeder = feeder
        self.reward_mode = reward_mode
        self.penalty = penalty
        self.max_steps = max_steps
        if agent_breakers is None:
            agent_breakers = [
                feeder.agent_breaker_indices(a) for a in range(feeder.n_agents)
            ]
        self.agent_breakers = [tuple(g) for g in agent_breakers]
        covered = [i for grp in self.agent_breakers for i in grp]
        if sorted(covered) != list(range(feeder.n_breakers)):
            raise ValueError("agent breaker groups must partition all breakers")
        self._states = np.zeros(feeder.n_breakers, dtype=np.int8)
        self.step_count = 0
        self.violation_count = 0
        self._denominator = feeder.total_load_kw()
        # Compact feasibility memo keyed by state bytes; results are pure
        # functions of the state, so memoization cannot change behavior.
        self._feas_cache: dict[bytes, tuple[bool, float, float]] = {}

    # -- geometry ---------------------------------------------------------------

    @property
    def n_agents(self) -> int:
        return len(self.agent_breakers)

    def action_space_sizes(self) -> list[int]:
        return [2 * len(g) for g in self.agent_breakers]

    @property
    def breaker_states(self) -> tuple[int, ...]:
        return tuple(int(s) for s in self._states)

    def observations(self) -> tuple[Observation, ...]:
        return tuple(
            Observation(tuple(int(self._states[i]) for i in grp))
            for grp in self.agent_breakers
        )

    def noop_open_actions(self, agent: int) -> list[int]:
        """Open-toggle indices that are no-ops (their breaker is already open)."""
        return [
            2 * k + 1
            for k, b in enumerate(self.agent_breakers[agent])
            if not self._states[b]
        ]

    # -- dynamics ---------------------------------------------------------------

    def reset(self) -> tuple[Observation, ...]:
        """All breakers open (the post-outage state), step counter cleared."""
        self._states[:] = 0
        self.step_count = 0
        return self.observations()

    def _candidate_states(
        self, joint: JointAction, base: np.ndarray | None = None
    ) -> np.ndarray:
        if len(joint.actions) != self.n_agents:
            raise ValueError("joint action length must equal the agent count")
        nxt = (self._states if base is None else base).copy()
        for agent, action in enumerate(joint.actions):
            group = self.agent_breakers[agent]
            ordinal, close = decode_action(action)
            if not (0 <= ordinal < len(group)):
                raise ValueError(
                    f"action index {action.index} out of range for agent {agent}"
                )
            nxt[group[ordinal]] = 1 if close else 0
        return nxt

    def _feasibility(self, states: np.ndarray) -> tuple[bool, float, float]:
        key = states.tobytes()
        hit = self._feas_cache.get(key)
        if hit is None:
            solution = solve(self.feeder, states)
            report = check_constraints(self.feeder, solution)
            hit = (
                report.all_ok,
                solution.served_load_kw,
                solution.served_weighted_kw,
            )
            self._feas_cache[key] = hit
        return hit

    def _reward_of(self, weighted_kw: float) -> float:
        return weighted_kw / self._denominator if self._denominator > 0 else 0.0

    def state_reward(self) -> float:
        """Normalized restored power of the current state."""
        _, _, weighted = self._feasibility(self._states)
        return self._reward_of(weighted)

    def validate_joint(self, joint: JointAction) -> bool:
        """Would this joint action keep every constraint satisfied?

        Shadow evaluation on a copy; the live state is never touched.
        """
        ok, _, _ = self._feasibility(self._candidate_states(joint))
        return ok

    def reward_penalty(self, joint: JointAction, penalty: float | None = None) -> float:
        """Penalty-shaped reward of a candidate action (no state change)."""
        m = self.penalty if penalty is None else penalty
        ok, _, weighted = self._feasibility(self._candidate_states(joint))
        return self._reward_of(weighted) if ok else m

    def step(self, joint: JointAction) -> StepResult:
        if self.step_count >= self.max_steps:
            raise EpisodeExhausted(
                f"episode already ran {self.max_steps} steps; reset() first"
            )
        nxt = self._candidate_states(joint)
        solution = solve(self.feeder, nxt)
        report = check_constraints(self.feeder, solution)
        self._feas_cache[nxt.tobytes()] = (
            report.all_ok,
            solution.served_load_kw,
            solution.served_weighted_kw,
        )
        if self.reward_mode == "masked" and not report.all_ok:
            raise InvalidJointAction(
                "masked-mode step received a constraint-violating joint action"
            )
        if report.all_ok:
            reward = self._reward_of(solution.served_weighted_kw)
        else:
            self.violation_count += 1
            reward = self.penalty
        self._states = nxt
        self.step_count += 1

        frozen = nxt.copy()

        def mask_oracle(candidate: JointAction, _base=frozen) -> bool:
            ok, _, _ = self._feasibility(self._candidate_states(candidate, _base))
            return ok

        return StepResult(
            observations=self.observations(),
            reward=reward,
            mask_oracle=mask_oracle,
            served_kw=solution.served_load_kw,
            weighted_kw=solution.served_weighted_kw,
            constraints_ok=report.all_ok,
            solution=solution,
        )
