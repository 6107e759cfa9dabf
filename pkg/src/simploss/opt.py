"""SGD training of base modes.

Plain momentum SGD with additive weight decay and an optional
single-cycle cosine learning-rate schedule.  Data order and parameter
init come from separately spawned RNG streams so either can be
reproduced independently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import netcore


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


SCHEDULES = ("constant", "cosine_single_cycle")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 1e-4
    epochs: int = 400
    batch_size: int = 32
    schedule: str = "cosine_single_cycle"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}")

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "momentum": self.momentum,
            "weight_decay": self.weight_decay,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "schedule": self.schedule,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


# Large-scale image-classification recipe kept for reference; desk-scale
# runs use the (much smaller) defaults above.
TRAIN_PRESETS = {
    "vgg_cifar_reference": TrainConfig(
        lr=0.05, momentum=0.9, weight_decay=5e-4, epochs=300, batch_size=128
    ),
}


def lr_at(config: TrainConfig, step: int, total_steps: int) -> float:
    """Learning rate at a global step (0 <= step <= total_steps)."""
    if not 0 <= step <= total_steps:
        raise ValueError("step out of range")
    if config.schedule == "constant":
        return config.lr
    return config.lr * 0.5 * (1.0 + np.cos(np.pi * step / total_steps))


def iter_batches(
    n: int, batch_size: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """A fresh shuffle split into batches (last one may be short)."""
    order = rng.permutation(n)
    size = min(batch_size, n)
    return [order[start : start + size] for start in range(0, n, size)]


def train_base(
    spec: netcore.ModelSpec,
    dataset: netcore.Batch,
    config: TrainConfig,
    init: np.ndarray | None = None,
) -> tuple[np.ndarray, list[dict]]:
    """Train a mode from scratch; returns final params and history.

    History holds one record per epoch: mean minibatch loss and the
    learning rate at the epoch's first step.
    """
    init_seq, shuffle_seq = np.random.SeedSequence(config.seed).spawn(2)
    if init is None:
        params = netcore.init_params(spec, np.random.default_rng(init_seq))
    else:
        params = np.asarray(init, dtype=np.float64).copy()
    shuffle_rng = np.random.default_rng(shuffle_seq)

    n = dataset.size
    steps_per_epoch = len(range(0, n, min(config.batch_size, n)))
    total_steps = config.epochs * steps_per_epoch
    velocity = np.zeros_like(params)
    history: list[dict] = []
    step = 0
    for epoch in range(config.epochs):
        epoch_lr = lr_at(config, step, total_steps)
        losses = []
        for idx in iter_batches(n, config.batch_size, shuffle_rng):
            batch = netcore.Batch(dataset.inputs[idx], dataset.targets[idx])
            loss, grad = netcore.loss_and_grad(spec, params, batch)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss {loss} at epoch {epoch}, step {step}"
                )
            grad = grad + config.weight_decay * params
            velocity = config.momentum * velocity + grad
            params = params - lr_at(config, step, total_steps) * velocity
            losses.append(loss)
            step += 1
        history.append(
            {"epoch": epoch, "loss": float(np.mean(losses)), "lr": float(epoch_lr)}
        )
    return params, history


def history_to_jsonl(history: list[dict]) -> str:
    """One JSON object per line, e.g. {"epoch": 0, "loss": ..., "lr": ...}."""
    return "\n".join(json.dumps(entry, sort_keys=True) for entry in history) + "\n"
