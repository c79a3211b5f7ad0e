"""Per-slot run records, the metrics CSV format, and summary statistics.

The CSV schema is frozen: one row per agent-slot, header exactly
``step,agent,power_index,freq_index,reward,success,sinr_db``, LF endings,
floats written with full round-trip precision.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

CSV_HEADER = "step,agent,power_index,freq_index,reward,success,sinr_db"


class MetricsFormatError(ValueError):
    """A metrics CSV is malformed; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RunMetrics:
    """Columnar log of every agent-slot of a run."""

    def __init__(self):
        self._steps: list[np.ndarray] = []
        self._agents: list[np.ndarray] = []
        self._power: list[np.ndarray] = []
        self._freq: list[np.ndarray] = []
        self._rewards: list[np.ndarray] = []
        self._success: list[np.ndarray] = []
        self._sinr: list[np.ndarray] = []
        self._frozen: dict | None = None

    def record_slot(
        self,
        step: int,
        power_indices: Sequence[int],
        freq_indices: Sequence[int],
        rewards: np.ndarray,
        successes: np.ndarray,
        sinr_db: np.ndarray,
    ) -> None:
        n = len(power_indices)
        self._steps.append(np.full(n, step, dtype=np.int64))
        self._agents.append(np.arange(n, dtype=np.int64))
        self._power.append(np.asarray(power_indices, dtype=np.int64))
        self._freq.append(np.asarray(freq_indices, dtype=np.int64))
        self._rewards.append(np.asarray(rewards, dtype=float))
        self._success.append(np.asarray(successes, dtype=bool))
        self._sinr.append(np.asarray(sinr_db, dtype=float))
        self._frozen = None

    def _columns(self) -> dict:
        if self._frozen is None:
            self._frozen = {
                "step": _cat(self._steps, np.int64),
                "agent": _cat(self._agents, np.int64),
                "power_index": _cat(self._power, np.int64),
                "freq_index": _cat(self._freq, np.int64),
                "reward": _cat(self._rewards, float),
                "success": _cat(self._success, bool),
                "sinr_db": _cat(self._sinr, float),
            }
        return self._frozen

    def __len__(self) -> int:
        return len(self._columns()["step"])

    def column(self, name: str) -> np.ndarray:
        return self._columns()[name]

    @property
    def n_agents(self) -> int:
        agents = self._columns()["agent"]
        return int(agents.max()) + 1 if len(agents) else 0

    @property
    def n_steps(self) -> int:
        steps = self._columns()["step"]
        return len(np.unique(steps))

    # ---- derived series ----

    def success_by_slot(self) -> np.ndarray:
        """Mean success indicator over agents, one value per slot (step order)."""
        cols = self._columns()
        steps = cols["step"]
        order = np.argsort(steps, kind="stable")
        success = cols["success"][order].astype(float)
        slot_ids, counts = np.unique(steps[order], return_counts=True)
        sums = np.add.reduceat(success, np.concatenate([[0], np.cumsum(counts)[:-1]]))
        return sums / counts

    def windowed_success(self, window: int = 100) -> np.ndarray:
        """Trailing-window network success probability; defined from slot window-1 on."""
        if window < 1:
            raise ValueError("window must be >= 1")
        per_slot = self.success_by_slot()
        if len(per_slot) < window:
            return np.empty(0)
        kernel = np.ones(window) / window
        return np.convolve(per_slot, kernel, mode="valid")

    def steps_to_reach(self, threshold: float, window: int = 100) -> int | None:
        """First slot index whose trailing window clears the threshold, or None."""
        series = self.windowed_success(window)
        hits = np.nonzero(series >= threshold)[0]
        if hits.size == 0:
            return None
        return int(hits[0]) + window - 1

    def success_rate(self, last_steps: int | None = None) -> float:
        """Mean success over all agent-slots, optionally only the trailing steps."""
        cols = self._columns()
        mask = _trailing_mask(cols["step"], last_steps)
        return float(cols["success"][mask].mean())

    def selection_fractions(
        self, column: str, n_values: int, last_steps: int | None = None, agent: int | None = None
    ) -> np.ndarray:
        """Fraction of slots choosing each index of ``power_index``/``freq_index``."""
        cols = self._columns()
        mask = _trailing_mask(cols["step"], last_steps)
        if agent is not None:
            mask &= cols["agent"] == agent
        chosen = cols[column][mask]
        counts = np.bincount(chosen, minlength=n_values).astype(float)
        total = counts.sum()
        return counts / total if total else counts

    def cumulative_reward(self) -> np.ndarray:
        """Network reward summed per slot, then accumulated over slots."""
        cols = self._columns()
        steps = cols["step"]
        order = np.argsort(steps, kind="stable")
        rewards = cols["reward"][order]
        _, counts = np.unique(steps[order], return_counts=True)
        sums = np.add.reduceat(rewards, np.concatenate([[0], np.cumsum(counts)[:-1]]))
        return np.cumsum(sums)

    # ---- CSV ----

    def write_csv(self, path: str | Path) -> None:
        cols = self._columns()
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for i in range(len(self)):
                fh.write(
                    f"{cols['step'][i]},{cols['agent'][i]},{cols['power_index'][i]},"
                    f"{cols['freq_index'][i]},{cols['reward'][i]!r},"
                    f"{int(cols['success'][i])},{cols['sinr_db'][i]!r}\n"
                )

    @classmethod
    def read_csv(cls, path: str | Path) -> "RunMetrics":
        metrics = cls()
        steps, agents, power, freq, rewards, success, sinr = [], [], [], [], [], [], []
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise MetricsFormatError("empty file", 1) from None
            if ",".join(header) != CSV_HEADER:
                raise MetricsFormatError(f"bad header {','.join(header)!r}", 1)
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 7:
                    raise MetricsFormatError(f"expected 7 fields, got {len(row)}", lineno)
                try:
                    steps.append(int(row[0]))
                    agents.append(int(row[1]))
                    power.append(int(row[2]))
                    freq.append(int(row[3]))
                    rewards.append(float(row[4]))
                    success.append(int(row[5]))
                    sinr.append(float(row[6]))
                except ValueError as exc:
                    raise MetricsFormatError(str(exc), lineno) from None
        metrics._steps = [np.asarray(steps, dtype=np.int64)]
        metrics._agents = [np.asarray(agents, dtype=np.int64)]
        metrics._power = [np.asarray(power, dtype=np.int64)]
        metrics._freq = [np.asarray(freq, dtype=np.int64)]
        metrics._rewards = [np.asarray(rewards, dtype=float)]
        metrics._success = [np.asarray(success, dtype=bool)]
        metrics._sinr = [np.asarray(sinr, dtype=float)]
        return metrics


def _cat(chunks: list, dtype) -> np.ndarray:
    if not chunks:
        return np.empty(0, dtype=dtype)
    return np.concatenate(chunks)


def _trailing_mask(steps: np.ndarray, last_steps: int | None) -> np.ndarray:
    if last_steps is None or len(steps) == 0:
        return np.ones(len(steps), dtype=bool)
    cutoff = steps.max() - last_steps + 1
    return steps >= cutoff


def summarize(metrics: RunMetrics, window: int = 100) -> dict:
    """Plot-ready summary: final windowed success, selection tables, rewards.

    Selection tables cover the trailing ``window`` slots; per-agent rows each
    sum to one.
    """
    n_p = int(metrics.column("power_index").max()) + 1 if len(metrics) else 0
    n_f = int(metrics.column("freq_index").max()) + 1 if len(metrics) else 0
    windowed = metrics.windowed_success(window)
    per_agent = {}
    for agent in range(metrics.n_agents):
        mask = metrics.column("agent") == agent
        per_agent[str(agent)] = {
            "power_selection": metrics.selection_fractions(
                "power_index", n_p, last_steps=window, agent=agent
            ).tolist(),
            "freq_selection": metrics.selection_fractions(
                "freq_index", n_f, last_steps=window, agent=agent
            ).tolist(),
            "success_probability": float(metrics.column("success")[mask].mean()),
            "cumulative_reward": float(metrics.column("reward")[mask].sum()),
        }
    return {
        "steps": metrics.n_steps,
        "agents": metrics.n_agents,
        "window": window,
        "final_success_probability": float(windowed[-1]) if windowed.size else math.nan,
        "mean_success_probability": metrics.success_rate() if len(metrics) else math.nan,
        "cumulative_reward": float(metrics.column("reward").sum()),
        "network_power_selection": metrics.selection_fractions(
            "power_index", n_p, last_steps=window
        ).tolist(),
        "network_freq_selection": metrics.selection_fractions(
            "freq_index", n_f, last_steps=window
        ).tolist(),
        "per_agent": per_agent,
    }


def write_summary(summary: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
