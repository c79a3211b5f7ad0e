"""Network geometry, path-loss channel, SINR, and random-walk mobility.

Everything here is pure given explicit inputs; callers pass the RNG in, so
shared read-only scenarios are safe to use from multiple threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """A scenario document or value violates the scenario invariants."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class TxRxPair:
    pair_id: int
    tx_pos: Position
    rx_pos: Position
    assigned_frequency: int


@dataclass(frozen=True)
class ChannelParams:
    path_loss_exponent: float = 3.0
    reference_distance: float = 1.0  # meters
    noise_power: float = 1e-10  # watts
    processing_gain: float = 64.0  # co-channel interference divisor
    sinr_threshold: float = 3.0  # dB, inclusive success boundary

    def validate(self) -> None:
        if self.path_loss_exponent < 2.0:
            raise ScenarioError("path_loss_exponent must be >= 2")
        if self.reference_distance <= 0.0:
            raise ScenarioError("reference_distance must be > 0")
        if self.noise_power <= 0.0:
            raise ScenarioError("noise_power must be > 0")
        if self.processing_gain < 1.0:
            raise ScenarioError("processing_gain must be >= 1")


@dataclass(frozen=True)
class MobilityParams:
    step_size: float = 0.0  # meters per slot
    enabled: bool = False

    def validate(self) -> None:
        if self.step_size < 0.0:
            raise ScenarioError("step_size must be >= 0")


@dataclass
class NodePositions:
    """Current coordinates of every transmitter and receiver.

    Arrays have shape (n_pairs, 2); row i belongs to pair_id i.
    """

    tx: np.ndarray
    rx: np.ndarray

    def copy(self) -> "NodePositions":
        return NodePositions(self.tx.copy(), self.rx.copy())

    @property
    def n_pairs(self) -> int:
        return self.tx.shape[0]


@dataclass(frozen=True)
class NetworkScenario:
    pairs: tuple[TxRxPair, ...]
    area_w: float
    area_h: float
    channel: ChannelParams = field(default_factory=ChannelParams)
    mobility: MobilityParams = field(default_factory=MobilityParams)
    power_levels_dbm: tuple[float, ...] = (1.0, 10.0, 20.0)
    n_f: int = 2
    seed: int = 0

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def n_p(self) -> int:
        return len(self.power_levels_dbm)

    def validate(self) -> None:
        if not self.pairs:
            raise ScenarioError("scenario needs at least one pair")
        if self.n_f < 1:
            raise ScenarioError("n_f must be >= 1")
        if self.area_w <= 0.0 or self.area_h <= 0.0:
            raise ScenarioError("area must be positive")
        levels = self.power_levels_dbm
        if len(levels) < 1 or any(b <= a for a, b in zip(levels, levels[1:])):
            raise ScenarioError("power_levels_dbm must be strictly increasing")
        ids = [p.pair_id for p in self.pairs]
        if len(set(ids)) != len(ids):
            raise ScenarioError("pair_id values must be unique")
        for p in self.pairs:
            if p.tx_pos == p.rx_pos:
                raise ScenarioError(f"pair {p.pair_id}: tx_pos equals rx_pos")
            if not (0 <= p.assigned_frequency < self.n_f):
                raise ScenarioError(f"pair {p.pair_id}: assigned_frequency out of range")
            for pos in (p.tx_pos, p.rx_pos):
                if not (math.isfinite(pos.x) and math.isfinite(pos.y)):
                    raise ScenarioError(f"pair {p.pair_id}: non-finite position")
                if not (0.0 <= pos.x <= self.area_w and 0.0 <= pos.y <= self.area_h):
                    raise ScenarioError(f"pair {p.pair_id}: position outside area")
        self.channel.validate()
        self.mobility.validate()

    def initial_positions(self) -> NodePositions:
        tx = np.array([[p.tx_pos.x, p.tx_pos.y] for p in self.pairs], dtype=float)
        rx = np.array([[p.rx_pos.x, p.rx_pos.y] for p in self.pairs], dtype=float)
        return NodePositions(tx, rx)

    # ---- JSON document (schema_version 1, unknown fields rejected) ----

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "pairs": [
                {
                    "pair_id": p.pair_id,
                    "tx_pos": {"x": p.tx_pos.x, "y": p.tx_pos.y},
                    "rx_pos": {"x": p.rx_pos.x, "y": p.rx_pos.y},
                    "assigned_frequency": p.assigned_frequency,
                }
                for p in self.pairs
            ],
            "area_w": self.area_w,
            "area_h": self.area_h,
            "channel": {
                "path_loss_exponent": self.channel.path_loss_exponent,
                "reference_distance": self.channel.reference_distance,
                "noise_power": self.channel.noise_power,
                "processing_gain": self.channel.processing_gain,
                "sinr_threshold": self.channel.sinr_threshold,
            },
            "mobility": {
                "step_size": self.mobility.step_size,
                "enabled": self.mobility.enabled,
            },
            "power_levels_dbm": list(self.power_levels_dbm),
            "n_f": self.n_f,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkScenario":
        doc = _take(dict(doc), "scenario", required={"schema_version", "pairs", "area_w", "area_h"},
                    optional={"channel", "mobility", "power_levels_dbm", "n_f", "seed"})
        if doc["schema_version"] != SCHEMA_VERSION:
            raise ScenarioError(f"unsupported schema_version {doc['schema_version']!r}")
        pairs = []
        for raw in doc["pairs"]:
            raw = _take(dict(raw), "pair",
                        required={"pair_id", "tx_pos", "rx_pos", "assigned_frequency"})
            pairs.append(TxRxPair(
                pair_id=int(raw["pair_id"]),
                tx_pos=_position(raw["tx_pos"]),
                rx_pos=_position(raw["rx_pos"]),
                assigned_frequency=int(raw["assigned_frequency"]),
            ))
        channel = ChannelParams(**_take(dict(doc.get("channel", {})), "channel", optional={
            "path_loss_exponent", "reference_distance", "noise_power",
            "processing_gain", "sinr_threshold"}))
        mobility = MobilityParams(**_take(dict(doc.get("mobility", {})), "mobility",
                                          optional={"step_size", "enabled"}))
        scenario = cls(
            pairs=tuple(pairs),
            area_w=float(doc["area_w"]),
            area_h=float(doc["area_h"]),
            channel=channel,
            mobility=mobility,
            power_levels_dbm=tuple(float(v) for v in doc.get("power_levels_dbm", (1.0, 10.0, 20.0))),
            n_f=int(doc.get("n_f", 2)),
            seed=int(doc.get("seed", 0)),
        )
        scenario.validate()
        return scenario

    @classmethod
    def from_json(cls, text: str) -> "NetworkScenario":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ScenarioError("scenario document must be a JSON object")
        return cls.from_dict(doc)


def _take(doc: dict, what: str, required: set = frozenset(), optional: set = frozenset()) -> dict:
    missing = required - doc.keys()
    if missing:
        raise ScenarioError(f"{what}: missing fields {sorted(missing)}")
    unknown = doc.keys() - required - optional
    if unknown:
        raise ScenarioError(f"{what}: unknown fields {sorted(unknown)}")
    return doc


def _position(raw: dict) -> Position:
    raw = _take(dict(raw), "position", required={"x", "y"})
    return Position(float(raw["x"]), float(raw["y"]))


def path_gain(a: Position, b: Position, ch: ChannelParams) -> float:
    """Log-distance power gain in (0, 1]; symmetric, clamped at the reference distance."""
    dist = max(a.distance_to(b), ch.reference_distance)
    return (ch.reference_distance / dist) ** ch.path_loss_exponent


def gain_matrix(positions: NodePositions, ch: ChannelParams) -> np.ndarray:
    """gains[j, i] = path gain from pair j's transmitter to pair i's receiver."""
    diff = positions.tx[:, None, :] - positions.rx[None, :, :]
    dist = np.maximum(np.hypot(diff[..., 0], diff[..., 1]), ch.reference_distance)
    return (ch.reference_distance / dist) ** ch.path_loss_exponent


def compute_all_sinr(
    scenario: NetworkScenario,
    positions: NodePositions,
    actions: Sequence[tuple[int, int, bool]],
) -> np.ndarray:
    """SINR in dB for every pair under a joint action profile.

    ``actions[i]`` is (power_index, frequency_index, transmitting). Co-channel
    interference from other transmitting pairs is divided by the processing
    gain; pairs on other frequencies contribute exactly zero. Entries for
    non-transmitting pairs are still evaluated as if that pair keyed up,
    which lets callers ask hypothetical questions.
    """
    n = scenario.n_pairs
    if len(actions) != n:
        raise ValueError(f"expected {n} actions, got {len(actions)}")
    ch = scenario.channel
    gains = gain_matrix(positions, ch)
    powers = np.array([dbm_to_watts(scenario.power_levels_dbm[a[0]]) for a in actions])
    freqs = np.array([a[1] for a in actions])
    txing = np.array([bool(a[2]) for a in actions])

    sinr = np.empty(n)
    for i in range(n):
        same = (freqs == freqs[i]) & txing
        same[i] = False
        interference = float(np.sum(gains[same, i] * powers[same])) / ch.processing_gain
        signal = gains[i, i] * powers[i]
        sinr[i] = 10.0 * math.log10(signal / (ch.noise_power + interference))
    return sinr


def compute_sinr(
    scenario: NetworkScenario,
    positions: NodePositions,
    actions: Sequence[tuple[int, int, bool]],
    pair_id: int,
) -> float:
    if not (0 <= pair_id < scenario.n_pairs):
        raise ValueError(f"pair_id {pair_id} out of range")
    return float(compute_all_sinr(scenario, positions, actions)[pair_id])


def transmission_success(sinr_db: float, ch: ChannelParams) -> bool:
    return sinr_db >= ch.sinr_threshold


def step_mobility(
    positions: NodePositions,
    mobility: MobilityParams,
    area: tuple[float, float],
    rng: np.random.Generator,
) -> NodePositions:
    """One random-walk slot: independent uniform box steps, clamped to the area."""
    if not mobility.enabled or mobility.step_size == 0.0:
        return positions
    n = positions.n_pairs
    s = mobility.step_size
    delta = rng.uniform(-s, s, size=(2 * n, 2))
    w, h = area
    tx = np.clip(positions.tx + delta[:n], [0.0, 0.0], [w, h])
    rx = np.clip(positions.rx + delta[n:], [0.0, 0.0], [w, h])
    return NodePositions(tx, rx)


def distances_to_receivers(pair_id: int, positions: NodePositions) -> np.ndarray:
    """Ascending distances from pair_id's transmitter to every other pair's receiver."""
    tx = positions.tx[pair_id]
    others = np.delete(positions.rx, pair_id, axis=0)
    dist = np.hypot(others[:, 0] - tx[0], others[:, 1] - tx[1])
    return np.sort(dist)
