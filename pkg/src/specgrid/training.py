"""Training loops: single-network multi-agent learning with periodic model
averaging, the independent baseline, the multi-network generalized protocol
(individual pre-training, checkpoint averaging, round-robin fine-tuning), and
frozen-policy evaluation.

Everything is single-threaded and driven by one seeded generator per segment,
so identical seeds reproduce runs bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .aggregation import (
    CheckpointStore,
    ModelCheckpoint,
    average_models,
    broadcast,
)
from .dqn import (
    DEFAULT_HIDDEN,
    ArchitectureMismatch,
    EpsilonSchedule,
    Experience,
    Hyperparams,
    QNetwork,
    ReplayBuffer,
    forward,
    select_action,
    sync_target,
    train_batch,
)
from .mdp import Environment, RadioAction
from .metrics import RunMetrics
from .netmodel import NetworkScenario


class ConfigError(ValueError):
    """A training config document is malformed."""


@dataclass(frozen=True)
class TrainConfig:
    hyper: Hyperparams = field(default_factory=Hyperparams)
    total_steps: int = 5000
    aggregation: bool = True
    individual_steps: int = 8000
    finetune_steps_per_network: int = 1000
    finetune_loops: int = 6
    eval_steps: int = 2000
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    k_neighbors: int = 8
    hidden_dims: tuple[int, int] = DEFAULT_HIDDEN
    finetune_epsilon_restart: float = 0.2
    success_window: int = 100

    def validate(self) -> None:
        self.hyper.validate()
        for name in ("total_steps", "individual_steps", "finetune_steps_per_network",
                     "finetune_loops", "eval_steps", "k_neighbors", "success_window"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    # Flat JSON document; unknown keys rejected.
    _SCALARS = (
        "total_steps", "aggregation", "individual_steps", "finetune_steps_per_network",
        "finetune_loops", "eval_steps", "k_neighbors", "finetune_epsilon_restart",
        "success_window",
    )
    _HYPER = ("gamma", "alpha", "batch_size", "target_sync_period",
              "aggregation_period", "replay_capacity")
    _EPSILON = ("epsilon_start", "epsilon_end", "epsilon_decay_steps")

    def to_dict(self) -> dict:
        doc = {name: getattr(self, name) for name in self._SCALARS}
        doc.update({name: getattr(self.hyper, name) for name in self._HYPER})
        doc["epsilon_start"] = self.hyper.epsilon.start
        doc["epsilon_end"] = self.hyper.epsilon.end
        doc["epsilon_decay_steps"] = self.hyper.epsilon.decay_steps
        doc["seeds"] = list(self.seeds)
        doc["hidden_dims"] = list(self.hidden_dims)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        doc = dict(doc)
        known = set(cls._SCALARS) | set(cls._HYPER) | set(cls._EPSILON) | {"seeds", "hidden_dims"}
        unknown = doc.keys() - known
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        base = cls()
        epsilon = EpsilonSchedule(
            start=float(doc.get("epsilon_start", base.hyper.epsilon.start)),
            end=float(doc.get("epsilon_end", base.hyper.epsilon.end)),
            decay_steps=int(doc.get("epsilon_decay_steps", base.hyper.epsilon.decay_steps)),
        )
        hyper = Hyperparams(
            gamma=float(doc.get("gamma", base.hyper.gamma)),
            alpha=float(doc.get("alpha", base.hyper.alpha)),
            batch_size=int(doc.get("batch_size", base.hyper.batch_size)),
            target_sync_period=int(doc.get("target_sync_period", base.hyper.target_sync_period)),
            epsilon=epsilon,
            aggregation_period=int(doc.get("aggregation_period", base.hyper.aggregation_period)),
            replay_capacity=int(doc.get("replay_capacity", base.hyper.replay_capacity)),
        )
        config = cls(
            hyper=hyper,
            total_steps=int(doc.get("total_steps", base.total_steps)),
            aggregation=bool(doc.get("aggregation", base.aggregation)),
            individual_steps=int(doc.get("individual_steps", base.individual_steps)),
            finetune_steps_per_network=int(
                doc.get("finetune_steps_per_network", base.finetune_steps_per_network)
            ),
            finetune_loops=int(doc.get("finetune_loops", base.finetune_loops)),
            eval_steps=int(doc.get("eval_steps", base.eval_steps)),
            seeds=tuple(int(s) for s in doc.get("seeds", base.seeds)),
            k_neighbors=int(doc.get("k_neighbors", base.k_neighbors)),
            hidden_dims=tuple(int(d) for d in doc.get("hidden_dims", base.hidden_dims)),
            finetune_epsilon_restart=float(
                doc.get("finetune_epsilon_restart", base.finetune_epsilon_restart)
            ),
            success_window=int(doc.get("success_window", base.success_window)),
        )
        config.validate()
        return config

    @classmethod
    def from_json_file(cls, path: str | Path) -> "TrainConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(doc)


def epsilon_at(step: int, schedule: EpsilonSchedule) -> float:
    """Linear interpolation start -> end over decay_steps, clamped afterwards."""
    if step < 0:
        raise ValueError("step must be >= 0")
    frac = min(step / schedule.decay_steps, 1.0)
    return schedule.start + (schedule.end - schedule.start) * frac


@dataclass
class Agent:
    net: QNetwork
    target: QNetwork
    buffer: ReplayBuffer


@dataclass
class TrainResult:
    models: list[QNetwork]
    metrics: RunMetrics
    barrier_steps: list[int]

    @property
    def mean_model(self) -> QNetwork:
        return average_models(self.models)


def _seed_rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, tags)]))


def initial_model(config: TrainConfig, scenario: NetworkScenario, seed: int) -> QNetwork:
    """Common starting parameters shared by every agent of a run."""
    dims = (config.k_neighbors + 3, *config.hidden_dims, scenario.n_p * scenario.n_f)
    return QNetwork.initialize(dims, _seed_rng(seed, 0))


def train_network(
    scenario: NetworkScenario,
    config: TrainConfig,
    seed: int,
    start_model: QNetwork | None = None,
    total_steps: int | None = None,
    aggregation: bool | None = None,
    epsilon_schedule: EpsilonSchedule | None = None,
    metrics: RunMetrics | None = None,
    step_offset: int = 0,
) -> TrainResult:
    """Multi-agent learning on one network.

    Every slot: each agent picks epsilon-greedily from its own network, the
    environment advances jointly, each agent stores its transition and takes
    one minibatch gradient step once its buffer can fill a batch. Targets
    sync on their own period; if aggregation is on, all agents' parameters
    are averaged and broadcast every ``aggregation_period`` steps.
    """
    config.validate()
    hyper = config.hyper
    steps = config.total_steps if total_steps is None else total_steps
    aggregate = config.aggregation if aggregation is None else aggregation
    schedule = epsilon_schedule or hyper.epsilon
    metrics = metrics if metrics is not None else RunMetrics()

    if start_model is None:
        start_model = initial_model(config, scenario, seed)
    expected_dims = (config.k_neighbors + 3, *config.hidden_dims,
                     scenario.n_p * scenario.n_f)
    if start_model.layer_dims != expected_dims:
        raise ArchitectureMismatch(
            f"model dims {start_model.layer_dims} do not fit scenario "
            f"(expected {expected_dims})"
        )

    rng = _seed_rng(seed, 1)
    env = Environment(scenario, rng, k_neighbors=config.k_neighbors)
    agents = [
        Agent(
            net=start_model.copy(),
            target=start_model.copy(),
            buffer=ReplayBuffer(hyper.replay_capacity),
        )
        for _ in range(scenario.n_pairs)
    ]
    catalog = env.catalog
    n_f = scenario.n_f
    barrier_steps: list[int] = []

    states = env.states
    for t in range(steps):
        eps = epsilon_at(t, schedule)
        chosen: list[RadioAction] = []
        flats: list[int] = []
        for agent, state in zip(agents, states):
            q = forward(agent.net, state.vector())
            flat = select_action(q, eps, rng)
            flats.append(flat)
            chosen.append(catalog[flat])

        result = env.step(chosen)
        for i, agent in enumerate(agents):
            agent.buffer.push(
                Experience(states[i], flats[i], float(result.rewards[i]), result.states[i])
            )
        for agent in agents:
            if len(agent.buffer) >= hyper.batch_size:
                batch = agent.buffer.sample(hyper.batch_size, rng)
                train_batch(agent.net, agent.target, batch, hyper)
        if (t + 1) % hyper.target_sync_period == 0:
            for agent in agents:
                sync_target(agent.net, agent.target)
        if aggregate and (t + 1) % hyper.aggregation_period == 0:
            averaged = average_models([a.net for a in agents])
            broadcast(averaged, agents)
            barrier_steps.append(step_offset + t)

        metrics.record_slot(
            step_offset + t,
            [a.power_index for a in chosen],
            [a.frequency_index for a in chosen],
            result.rewards,
            result.successes,
            result.sinr_db,
        )
        states = result.states

    return TrainResult([a.net for a in agents], metrics, barrier_steps)


def train_independent(
    scenario: NetworkScenario,
    config: TrainConfig,
    seed: int,
    **kwargs,
) -> TrainResult:
    """Same loop with the aggregation barriers disabled; agents drift apart."""
    return train_network(scenario, config, seed, aggregation=False, **kwargs)


@dataclass
class PhaseEvent:
    """One phase boundary of the generalized protocol, as checkpointed."""

    checkpoint: str
    phase: int
    loop: int
    scenario_index: int
    step_end: int  # global step count when the boundary was reached


@dataclass
class GeneralizedResult:
    model: QNetwork
    metrics: RunMetrics
    events: list[PhaseEvent]


def generalized_train(
    scenarios: Sequence[NetworkScenario],
    config: TrainConfig,
    store: CheckpointStore,
    seed: int,
    scenario_names: Sequence[str] | None = None,
) -> GeneralizedResult:
    """Three-phase generalized protocol over several training networks.

    Phase 1 trains each network for ``individual_steps`` from one shared fresh
    init and checkpoints each network's averaged model. Phase 2 averages those
    checkpoints into a single starting model. Phase 3 makes ``finetune_loops``
    passes over the networks, fine-tuning ``finetune_steps_per_network`` steps
    each time with aggregation barriers, carrying the averaged model onward
    and checkpointing every boundary.

    Segment seeds derive from (seed, phase, loop, scenario), so a run resumed
    from any phase-boundary checkpoint continues bit-identically.
    """
    if not scenarios:
        raise ValueError("need at least one scenario")
    config.validate()
    names = list(scenario_names or [f"scenario_{i}" for i in range(len(scenarios))])
    if len(names) != len(scenarios):
        raise ValueError("scenario_names length mismatch")
    dims_set = {(s.n_p, s.n_f) for s in scenarios}
    if len(dims_set) != 1:
        raise ValueError(f"scenarios disagree on action space: {sorted(dims_set)}")

    metrics = RunMetrics()
    events: list[PhaseEvent] = []
    step = 0

    def save(model: QNetwork, name: str, phase: int, loop: int, idx: int) -> None:
        scenario = scenarios[idx]
        ckpt = ModelCheckpoint.from_qnetwork(
            model,
            config.k_neighbors,
            scenario.n_p,
            scenario.n_f,
            metadata={
                "scenario": names[idx],
                "step": step,
                "phase": phase,
                "loop": loop,
                "base_seed": seed,
            },
        )
        store.save(name, ckpt)
        events.append(PhaseEvent(name, phase, loop, idx, step))

    shared_init = initial_model(config, scenarios[0], seed)

    # Phase 1: individual per-network training from the shared init.
    phase1_names = []
    for idx, scenario in enumerate(scenarios):
        result = train_network(
            scenario,
            config,
            seed=_segment_seed(seed, 1, 0, idx),
            start_model=shared_init,
            total_steps=config.individual_steps,
            aggregation=True,
            metrics=metrics,
            step_offset=step,
        )
        step += config.individual_steps
        model = result.mean_model
        name = f"gen_s{seed}_p1_{names[idx]}"
        save(model, name, phase=1, loop=0, idx=idx)
        phase1_names.append(name)

    # Phase 2: average the per-network checkpoints.
    current = average_models([store.load(n).to_qnetwork() for n in phase1_names])
    save(current, f"gen_s{seed}_p2_aggregate", phase=2, loop=0, idx=0)

    # Phase 3: round-robin fine-tuning with a fresh low-exploration sweep each
    # segment, averaging at the end of every network visit.
    finetune_schedule = EpsilonSchedule(
        start=config.finetune_epsilon_restart,
        end=config.hyper.epsilon.end,
        decay_steps=config.finetune_steps_per_network,
    )
    for loop in range(1, config.finetune_loops + 1):
        for idx, scenario in enumerate(scenarios):
            result = train_network(
                scenario,
                config,
                seed=_segment_seed(seed, 3, loop, idx),
                start_model=current,
                total_steps=config.finetune_steps_per_network,
                aggregation=True,
                epsilon_schedule=finetune_schedule,
                metrics=metrics,
                step_offset=step,
            )
            step += config.finetune_steps_per_network
            current = result.mean_model
            save(current, f"gen_s{seed}_p3_l{loop}_{names[idx]}", phase=3, loop=loop, idx=idx)

    return GeneralizedResult(current, metrics, events)


def resume_generalized_train(
    scenarios: Sequence[NetworkScenario],
    config: TrainConfig,
    store: CheckpointStore,
    seed: int,
    from_phase: int,
    from_loop: int,
    from_scenario_index: int,
    scenario_names: Sequence[str] | None = None,
) -> QNetwork:
    """Continue a generalized run from the checkpoint written at the given
    phase boundary; returns the final model, bit-identical to the full run's."""
    names = list(scenario_names or [f"scenario_{i}" for i in range(len(scenarios))])
    if from_phase == 2:
        current = store.load(f"gen_s{seed}_p2_aggregate").to_qnetwork()
        start_loop, start_idx = 1, 0
    elif from_phase == 3:
        current = store.load(
            f"gen_s{seed}_p3_l{from_loop}_{names[from_scenario_index]}"
        ).to_qnetwork()
        start_loop, start_idx = from_loop, from_scenario_index + 1
        if start_idx >= len(scenarios):
            start_loop, start_idx = from_loop + 1, 0
    else:
        raise ValueError("resume supports phase 2 or 3 boundaries")

    finetune_schedule = EpsilonSchedule(
        start=config.finetune_epsilon_restart,
        end=config.hyper.epsilon.end,
        decay_steps=config.finetune_steps_per_network,
    )
    for loop in range(start_loop, config.finetune_loops + 1):
        for idx in range(start_idx if loop == start_loop else 0, len(scenarios)):
            result = train_network(
                scenarios[idx],
                config,
                seed=_segment_seed(seed, 3, loop, idx),
                start_model=current,
                total_steps=config.finetune_steps_per_network,
                aggregation=True,
                epsilon_schedule=finetune_schedule,
            )
            current = result.mean_model
    return current


def _segment_seed(seed: int, phase: int, loop: int, idx: int) -> int:
    # Stable derivation so resumed runs replay the same per-segment streams.
    ss = np.random.SeedSequence([int(seed), 100 + phase, loop, idx])
    return int(ss.generate_state(1)[0])


def evaluate(
    model: QNetwork,
    scenario: NetworkScenario,
    eval_steps: int,
    seed: int,
    k_neighbors: int = 8,
) -> RunMetrics:
    """Run every pair with the same frozen model, pure argmax, no learning."""
    expected_out = scenario.n_p * scenario.n_f
    if model.output_dim != expected_out or model.input_dim != k_neighbors + 3:
        raise ArchitectureMismatch(
            f"model {model.layer_dims} does not fit scenario "
            f"(needs input {k_neighbors + 3}, output {expected_out})"
        )
    rng = _seed_rng(seed, 2)
    env = Environment(scenario, rng, k_neighbors=k_neighbors)
    catalog = env.catalog
    metrics = RunMetrics()
    states = env.states
    for t in range(eval_steps):
        chosen = [
            catalog[select_action(forward(model, s.vector()), 0.0, rng)] for s in states
        ]
        result = env.step(chosen)
        metrics.record_slot(
            t,
            [a.power_index for a in chosen],
            [a.frequency_index for a in chosen],
            result.rewards,
            result.successes,
            result.sinr_db,
        )
        states = result.states
    return metrics
