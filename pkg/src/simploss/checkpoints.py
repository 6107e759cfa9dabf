"""JSON checkpoints for trained modes and simplicial complexes.

Plain JSON with Python's shortest-repr float encoding, which
round-trips every finite binary64 exactly.  A checkpoint embeds the
model spec and the configs that produced it, so consumers can refuse
mismatched architectures.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import netcore
from .geometry import Simplex, SimplicialComplex, VertexStore

SCHEMA_VERSION = 1


class CheckpointError(ValueError):
    """Malformed checkpoint or mismatched model."""


def _dump(path: str | Path, payload: dict) -> None:
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _load(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no such checkpoint: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise CheckpointError(f"{path}: invalid JSON ({err})") from err
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise CheckpointError(
            f"{path}: unsupported schema version {payload.get('schema_version')!r}"
        )
    return payload


@dataclass
class ModeCheckpoint:
    spec: netcore.ModelSpec
    params: np.ndarray
    seed: int
    train_config: dict
    history: list[dict]


def save_mode(
    path: str | Path,
    spec: netcore.ModelSpec,
    params: np.ndarray,
    seed: int,
    train_config: dict,
    history: list[dict],
) -> None:
    _dump(
        path,
        {
            "schema_version": SCHEMA_VERSION,
            "kind": "mode",
            "model": spec.to_dict(),
            "seed": seed,
            "train": train_config,
            "params": [float(v) for v in np.asarray(params).reshape(-1)],
            "history": history,
        },
    )


def load_mode(path: str | Path) -> ModeCheckpoint:
    payload = _load(path)
    if payload.get("kind") != "mode":
        raise CheckpointError(f"{path}: expected a mode checkpoint")
    spec = netcore.ModelSpec.from_dict(payload["model"])
    params = np.asarray(payload["params"], dtype=np.float64)
    if params.size != netcore.param_count(spec):
        raise CheckpointError(f"{path}: parameter count does not match model")
    return ModeCheckpoint(
        spec, params, payload["seed"], payload["train"], payload["history"]
    )


@dataclass
class ComplexCheckpoint:
    spec: netcore.ModelSpec
    complex: SimplicialComplex
    seeds: dict
    config: dict
    history: dict[str, list[dict]]


def save_complex(
    path: str | Path,
    spec: netcore.ModelSpec,
    complex_: SimplicialComplex,
    seeds: dict,
    config: dict,
    history: dict[str, list[dict]],
) -> None:
    vertices = []
    for vid in complex_.store.ids():
        vertex = complex_.store.vertex(vid)
        vertices.append(
            {
                "id": vid,
                "role": vertex.role,
                "trainable": vertex.trainable,
                "values": [float(v) for v in vertex.values],
            }
        )
    _dump(
        path,
        {
            "schema_version": SCHEMA_VERSION,
            "kind": "complex",
            "model": spec.to_dict(),
            "vertices": vertices,
            "simplexes": [list(s.vertex_ids) for s in complex_.simplexes],
            "seeds": seeds,
            "config": config,
            "history": history,
        },
    )


def load_complex(path: str | Path) -> ComplexCheckpoint:
    payload = _load(path)
    if payload.get("kind") != "complex":
        raise CheckpointError(f"{path}: expected a complex checkpoint")
    spec = netcore.ModelSpec.from_dict(payload["model"])
    store = VertexStore()
    for vertex in payload["vertices"]:
        store.add(
            vertex["id"],
            np.asarray(vertex["values"], dtype=np.float64),
            vertex["role"],
            vertex["trainable"],
        )
    if len(store) and store.dimension != netcore.param_count(spec):
        raise CheckpointError(f"{path}: vertex dimension does not match model")
    complex_ = SimplicialComplex(
        store, [Simplex(tuple(ids)) for ids in payload["simplexes"]]
    )
    complex_.validate()
    return ComplexCheckpoint(
        spec, complex_, payload["seeds"], payload["config"], payload["history"]
    )
