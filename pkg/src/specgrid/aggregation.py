"""Elementwise model averaging across agents, and the checkpoint file format.

Checkpoint layout (all little-endian):

    "WDQN" | u32 version | u32 meta_len | meta JSON bytes
           | u64 param_count | param_count float64 values | u32 CRC32(params)

The CRC covers only the raw parameter bytes, so metadata edits are detected
by JSON parsing and payload corruption by the checksum.
"""

from __future__ import annotations

import json
import os
import struct
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dqn import ArchitectureMismatch, QNetwork, sync_target

MAGIC = b"WDQN"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    """Base class for checkpoint file problems."""


class CheckpointMagicError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointLengthError(CheckpointError):
    pass


class CheckpointCrcError(CheckpointError):
    pass


def average_models(models: Sequence[QNetwork]) -> QNetwork:
    """Plain 1/N elementwise mean of the parameters; inputs are left untouched."""
    if not models:
        raise ValueError("cannot average an empty model list")
    dims = models[0].layer_dims
    for m in models[1:]:
        if m.layer_dims != dims:
            raise ArchitectureMismatch(
                f"cannot average architectures {m.layer_dims} and {dims}"
            )
    weights = [
        np.mean([m.weights[l] for m in models], axis=0) for l in range(len(dims) - 1)
    ]
    biases = [
        np.mean([m.biases[l] for m in models], axis=0) for l in range(len(dims) - 1)
    ]
    return QNetwork(dims, weights, biases)


def broadcast(model: QNetwork, agents: Iterable) -> None:
    """Overwrite every agent's online and target parameters with the model's.

    Replay buffers are deliberately untouched: local experience diversity is
    the point of averaging in the first place.
    """
    for agent in agents:
        agent.net.set_parameters_from(model)
        sync_target(agent.net, agent.target)


@dataclass
class ModelCheckpoint:
    layer_dims: tuple[int, ...]
    k_neighbors: int
    n_p: int
    n_f: int
    parameters: np.ndarray  # flat float64, canonical order
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_qnetwork(
        cls,
        net: QNetwork,
        k_neighbors: int,
        n_p: int,
        n_f: int,
        metadata: dict | None = None,
    ) -> "ModelCheckpoint":
        meta = {
            "schema_version": FORMAT_VERSION,
            "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        meta.update(metadata or {})
        return cls(net.layer_dims, k_neighbors, n_p, n_f, net.flat_parameters(), meta)

    def to_qnetwork(self) -> QNetwork:
        return QNetwork.from_flat(self.layer_dims, self.parameters)


def write_checkpoint(path: str | Path, ckpt: ModelCheckpoint) -> None:
    """Atomic write: assemble in a sibling temp file, then rename into place."""
    path = Path(path)
    meta = dict(ckpt.metadata)
    meta["layer_dims"] = list(ckpt.layer_dims)
    meta["k_neighbors"] = ckpt.k_neighbors
    meta["n_p"] = ckpt.n_p
    meta["n_f"] = ckpt.n_f
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    params = np.ascontiguousarray(ckpt.parameters, dtype="<f8")
    payload = params.tobytes()

    blob = b"".join([
        MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        struct.pack("<I", len(meta_bytes)),
        meta_bytes,
        struct.pack("<Q", params.size),
        payload,
        struct.pack("<I", zlib.crc32(payload)),
    ])
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def read_checkpoint(path: str | Path) -> ModelCheckpoint:
    path = Path(path)
    blob = path.read_bytes()
    view = memoryview(blob)
    if len(blob) < 12 or bytes(view[:4]) != MAGIC:
        raise CheckpointMagicError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"{path}: unsupported version {version}")
    (meta_len,) = struct.unpack_from("<I", blob, 8)
    meta_end = 12 + meta_len
    if len(blob) < meta_end + 8:
        raise CheckpointLengthError(f"{path}: truncated header")
    try:
        meta = json.loads(bytes(view[12:meta_end]).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointLengthError(f"{path}: corrupt metadata block: {exc}") from exc
    (count,) = struct.unpack_from("<Q", blob, meta_end)
    payload_end = meta_end + 8 + count * 8
    if len(blob) != payload_end + 4:
        raise CheckpointLengthError(
            f"{path}: declared {count} parameters but file length is {len(blob)}"
        )
    payload = bytes(view[meta_end + 8 : payload_end])
    (crc,) = struct.unpack_from("<I", blob, payload_end)
    if zlib.crc32(payload) != crc:
        raise CheckpointCrcError(f"{path}: parameter checksum mismatch")

    for key in ("layer_dims", "k_neighbors", "n_p", "n_f"):
        if key not in meta:
            raise CheckpointLengthError(f"{path}: metadata missing {key!r}")
    layer_dims = tuple(int(d) for d in meta.pop("layer_dims"))
    expected = sum(i * o + o for i, o in zip(layer_dims, layer_dims[1:]))
    if count != expected:
        raise CheckpointLengthError(
            f"{path}: {count} parameters do not fit dims {layer_dims} (need {expected})"
        )
    params = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return ModelCheckpoint(
        layer_dims=layer_dims,
        k_neighbors=int(meta.pop("k_neighbors")),
        n_p=int(meta.pop("n_p")),
        n_f=int(meta.pop("n_f")),
        parameters=params,
        metadata=meta,
    )


class CheckpointStore:
    """A directory of named checkpoints; one ``<name>.ckpt`` file per name."""

    SUFFIX = ".ckpt"

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path_for(self, name: str) -> Path:
        if not name or "/" in name or name != name.strip():
            raise ValueError(f"bad checkpoint name {name!r}")
        return self.root / f"{name}{self.SUFFIX}"

    def save(self, name: str, ckpt: ModelCheckpoint) -> Path:
        path = self.path_for(name)
        write_checkpoint(path, ckpt)
        return path

    def load(self, name: str) -> ModelCheckpoint:
        path = self.path_for(name)
        if not path.exists():
            raise FileNotFoundError(f"no checkpoint named {name!r} in {self.root}")
        return read_checkpoint(path)

    def names(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob(f"*{self.SUFFIX}"))


def aggregate_checkpoints(store: CheckpointStore, names: Sequence[str]) -> QNetwork:
    """Load the named checkpoints and return their unweighted parameter mean."""
    if not names:
        raise ValueError("need at least one checkpoint name")
    models = [store.load(name).to_qnetwork() for name in names]
    return average_models(models)
