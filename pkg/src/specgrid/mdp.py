"""Per-agent observations, the joint action space, rewards, and the slot transition.

The observation layout is fixed at K+3 features regardless of network size
(K nearest-receiver distances, buffer fill, interference caused, interference
sensed), so one policy network fits every scenario.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .netmodel import (
    NetworkScenario,
    NodePositions,
    compute_all_sinr,
    dbm_to_watts,
    distances_to_receivers,
    gain_matrix,
    step_mobility,
    transmission_success,
)

NO_ACK_SENTINEL = -1.0
PADDING_DISTANCE = 1.0  # normalized stand-in for "farther than anything that matters"


@dataclass(frozen=True)
class RadioAction:
    power_index: int
    frequency_index: int

    def flat_index(self, n_f: int) -> int:
        return self.power_index * n_f + self.frequency_index

    @classmethod
    def from_flat(cls, flat: int, n_f: int) -> "RadioAction":
        return cls(flat // n_f, flat % n_f)


def action_catalog(n_p: int, n_f: int) -> list[RadioAction]:
    """All (power, frequency) combinations, ordered by flat index."""
    if n_p < 1 or n_f < 1:
        raise ValueError("n_p and n_f must be >= 1")
    return [RadioAction(p, f) for p in range(n_p) for f in range(n_f)]


@dataclass(frozen=True)
class RewardConstants:
    c1_per_power: tuple[float, ...] = (-0.05, -5.0, -10.0)
    c2_assigned: float = -0.05
    c2_other: float = -2.0
    c3_failure: float = -10.0


def reward(
    success: bool,
    power_index: int,
    frequency_index: int,
    assigned_frequency: int,
    rc: RewardConstants = RewardConstants(),
) -> float:
    if not success:
        return rc.c3_failure
    c2 = rc.c2_assigned if frequency_index == assigned_frequency else rc.c2_other
    return rc.c1_per_power[power_index] + c2


@dataclass(frozen=True)
class BufferParams:
    capacity: int = 10
    arrivals_per_slot: int = 1


@dataclass(frozen=True)
class AgentState:
    """One agent's observation; ``vector()`` is what the Q-network consumes."""

    distances: tuple[float, ...]  # K slots, normalized, ascending then padded
    buffer_occupancy: float  # packets / capacity
    interference_caused: float
    interference_sensed: float  # NO_ACK_SENTINEL when the last transmission failed

    def vector(self) -> np.ndarray:
        return np.array(
            self.distances
            + (self.buffer_occupancy, self.interference_caused, self.interference_sensed),
            dtype=float,
        )

    def __len__(self) -> int:
        return len(self.distances) + 3


@dataclass(frozen=True)
class PairOutcome:
    """What a pair carries from the previous slot into its next observation.

    The initial outcome counts as a success: before the first slot there is
    no transmission that could have gone unacknowledged, so the no-ACK
    sentinel must not appear at t=0.
    """

    success: bool = True
    interference_caused: float = 0.0
    interference_sensed: float = 0.0


@dataclass(frozen=True)
class StateNormalization:
    distance_scale: float  # area diagonal
    interference_scale: float  # worst-case receivable co-channel power sum


def normalization_for(scenario: NetworkScenario) -> StateNormalization:
    diag = math.hypot(scenario.area_w, scenario.area_h)
    p_max = dbm_to_watts(scenario.power_levels_dbm[-1])
    scale = max(scenario.n_pairs - 1, 1) * p_max
    return StateNormalization(distance_scale=diag, interference_scale=scale)


def build_state(
    pair_id: int,
    positions: NodePositions,
    prev: PairOutcome,
    buffer_occupancy: int,
    buffer_capacity: int,
    k_neighbors: int,
    norms: StateNormalization,
) -> AgentState:
    """Fixed-length observation: K closest receiver distances (padded with the
    max-distance sentinel when the network is small), then buffer fill and the
    two interference features from the previous slot."""
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be >= 1")
    dist = distances_to_receivers(pair_id, positions) / norms.distance_scale
    if dist.shape[0] >= k_neighbors:
        slots = dist[:k_neighbors]
    else:
        pad = np.full(k_neighbors - dist.shape[0], PADDING_DISTANCE)
        slots = np.concatenate([dist, pad])
    sensed = prev.interference_sensed if prev.success else NO_ACK_SENTINEL
    return AgentState(
        distances=tuple(float(v) for v in slots),
        buffer_occupancy=buffer_occupancy / buffer_capacity,
        interference_caused=prev.interference_caused,
        interference_sensed=sensed,
    )


@dataclass
class EnvStepResult:
    states: list[AgentState]  # next observation per pair
    rewards: np.ndarray
    successes: np.ndarray
    sinr_db: np.ndarray  # nan for pairs that did not transmit


class Environment:
    """One wireless network advancing slot by slot under joint actions.

    Single-writer: ``step`` mutates positions, buffers, and carried outcomes.
    All randomness (mobility only) comes from the generator passed in.
    """

    def __init__(
        self,
        scenario: NetworkScenario,
        rng: np.random.Generator,
        k_neighbors: int = 8,
        reward_constants: RewardConstants = RewardConstants(),
        buffer_params: BufferParams = BufferParams(),
    ):
        scenario.validate()
        if len(reward_constants.c1_per_power) != scenario.n_p:
            raise ValueError("c1_per_power length must match the power level count")
        self.scenario = scenario
        self.rng = rng
        self.k_neighbors = k_neighbors
        self.rc = reward_constants
        self.buffer_params = buffer_params
        self.norms = normalization_for(scenario)
        self.catalog = action_catalog(scenario.n_p, scenario.n_f)
        self.reset()

    @property
    def n_pairs(self) -> int:
        return self.scenario.n_pairs

    @property
    def state_dim(self) -> int:
        return self.k_neighbors + 3

    @property
    def n_actions(self) -> int:
        return len(self.catalog)

    def reset(self) -> list[AgentState]:
        self.positions = self.scenario.initial_positions()
        arrivals = self.buffer_params.arrivals_per_slot
        self.buffers = [min(arrivals, self.buffer_params.capacity)] * self.n_pairs
        self.outcomes = [PairOutcome() for _ in range(self.n_pairs)]
        self.states = self._build_states()
        return self.states

    def _build_states(self) -> list[AgentState]:
        return [
            build_state(
                i,
                self.positions,
                self.outcomes[i],
                self.buffers[i],
                self.buffer_params.capacity,
                self.k_neighbors,
                self.norms,
            )
            for i in range(self.n_pairs)
        ]

    def step(self, joint_actions: Sequence[RadioAction]) -> EnvStepResult:
        n = self.n_pairs
        if len(joint_actions) != n:
            raise ValueError(f"expected {n} actions, got {len(joint_actions)}")
        scenario = self.scenario
        ch = scenario.channel
        transmitting = [self.buffers[i] >= 1 for i in range(n)]
        profile = [
            (a.power_index, a.frequency_index, transmitting[i])
            for i, a in enumerate(joint_actions)
        ]

        sinr_all = compute_all_sinr(scenario, self.positions, profile)
        sinr_db = np.where(transmitting, sinr_all, np.nan)
        successes = np.array(
            [transmitting[i] and transmission_success(float(sinr_all[i]), ch) for i in range(n)]
        )
        rewards = np.array(
            [
                reward(
                    bool(successes[i]),
                    a.power_index,
                    a.frequency_index,
                    scenario.pairs[i].assigned_frequency,
                    self.rc,
                )
                if transmitting[i]
                else 0.0
                for i, a in enumerate(joint_actions)
            ]
        )

        self._update_buffers(successes)
        self.outcomes = self._observe_interference(profile, successes)
        self.positions = step_mobility(
            self.positions, scenario.mobility, (scenario.area_w, scenario.area_h), self.rng
        )
        self.states = self._build_states()
        return EnvStepResult(self.states, rewards, successes, sinr_db)

    def _update_buffers(self, successes: np.ndarray) -> None:
        cap = self.buffer_params.capacity
        arrivals = self.buffer_params.arrivals_per_slot
        self.buffers = [
            min(max(self.buffers[i] + arrivals - int(successes[i]), 0), cap)
            for i in range(self.n_pairs)
        ]

    def _observe_interference(
        self, profile: list[tuple[int, int, bool]], successes: np.ndarray
    ) -> list[PairOutcome]:
        """Per-pair caused/sensed co-channel power sums, normalized to [0, 1]."""
        n = self.n_pairs
        ch = self.scenario.channel
        gains = gain_matrix(self.positions, ch)
        powers = np.array(
            [dbm_to_watts(self.scenario.power_levels_dbm[p]) for p, _, _ in profile]
        )
        freqs = np.array([f for _, f, _ in profile])
        txing = np.array([t for _, _, t in profile])
        scale = self.norms.interference_scale

        outcomes = []
        for i in range(n):
            co_channel = freqs == freqs[i]
            others = co_channel.copy()
            others[i] = False
            caused = 0.0
            if txing[i]:
                caused = float(np.sum(gains[i, others] * powers[i]))
            sensed = float(np.sum(gains[others & txing, i] * powers[others & txing]))
            sensed /= ch.processing_gain
            outcomes.append(
                PairOutcome(
                    success=bool(successes[i]),
                    interference_caused=caused / scale,
                    interference_sensed=sensed / scale,
                )
            )
        return outcomes
