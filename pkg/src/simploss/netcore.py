"""Micro MLP engine: forward pass, losses, and manual backpropagation.

Everything runs in float64 on flat parameter vectors so that models are
points in R^D and simplex geometry applies directly.  Parameters are
laid out layer by layer as W (fan_in x fan_out, row-major) followed by
the bias, for every consecutive width pair.

Losses: mean softmax cross-entropy for classifiers, or a Gaussian
negative log-likelihood with fixed observation variance for scalar
regression (the 0.5*log(2*pi*sigma^2) constant is included so reported
values match the standard definition).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class NetError(ValueError):
    """Invalid model specification or mismatched shapes."""


@dataclass(frozen=True)
class ModelSpec:
    """Architecture of a fully-connected network.

    ``loss_kind`` is ``"cross_entropy"`` (with ``output_kind="logits"``)
    or ``"gaussian_nll"`` (with ``output_kind="scalar"`` and a fixed
    ``noise_variance``).
    """

    layer_widths: tuple[int, ...]
    activation: str = "relu"
    output_kind: str = "logits"
    loss_kind: str = "cross_entropy"
    noise_variance: float | None = None

    def __post_init__(self) -> None:
        if len(self.layer_widths) < 2:
            raise NetError("need at least input and output widths")
        if any(w < 1 for w in self.layer_widths):
            raise NetError("layer widths must be >= 1")
        if self.activation not in ("relu", "tanh"):
            raise NetError(f"unknown activation {self.activation!r}")
        if self.output_kind not in ("logits", "scalar"):
            raise NetError(f"unknown output kind {self.output_kind!r}")
        if self.loss_kind == "cross_entropy":
            if self.output_kind != "logits":
                raise NetError("cross_entropy requires logits output")
        elif self.loss_kind == "gaussian_nll":
            if self.output_kind != "scalar":
                raise NetError("gaussian_nll requires scalar output")
            if self.noise_variance is None or self.noise_variance <= 0:
                raise NetError("gaussian_nll needs noise_variance > 0")
            if self.layer_widths[-1] != 1:
                raise NetError("scalar output requires final width 1")
        else:
            raise NetError(f"unknown loss kind {self.loss_kind!r}")

    def to_dict(self) -> dict:
        return {
            "layer_widths": list(self.layer_widths),
            "activation": self.activation,
            "output_kind": self.output_kind,
            "loss_kind": self.loss_kind,
            "noise_variance": self.noise_variance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        return cls(
            layer_widths=tuple(data["layer_widths"]),
            activation=data.get("activation", "relu"),
            output_kind=data.get("output_kind", "logits"),
            loss_kind=data.get("loss_kind", "cross_entropy"),
            noise_variance=data.get("noise_variance"),
        )


@dataclass
class Batch:
    """Inputs plus class indices (classification) or real targets."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] < 1:
            raise NetError("inputs must be a non-empty (n, d) matrix")
        targets = np.asarray(self.targets)
        if np.issubdtype(targets.dtype, np.integer):
            self.targets = targets.astype(np.int64).reshape(-1)
        else:
            self.targets = targets.astype(np.float64).reshape(-1)
        if self.targets.shape[0] != self.inputs.shape[0]:
            raise NetError("target length must match input rows")

    @property
    def size(self) -> int:
        return self.inputs.shape[0]


def param_count(spec: ModelSpec) -> int:
    widths = spec.layer_widths
    return sum((w_in + 1) * w_out for w_in, w_out in zip(widths[:-1], widths[1:]))


def init_params(spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    """He-style init: weights ~ Normal(0, 2/fan_in), biases zero."""
    chunks = []
    for w_in, w_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        std = np.sqrt(2.0 / w_in)
        chunks.append(rng.normal(0.0, std, size=w_in * w_out))
        chunks.append(np.zeros(w_out))
    return np.concatenate(chunks)


def unflatten(spec: ModelSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    if params.size != param_count(spec):
        raise NetError(
            f"expected {param_count(spec)} parameters, got {params.size}"
        )
    layers = []
    offset = 0
    for w_in, w_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        weight = params[offset : offset + w_in * w_out].reshape(w_in, w_out)
        offset += w_in * w_out
        bias = params[offset : offset + w_out]
        offset += w_out
        layers.append((weight, bias))
    return layers


def flatten(layers: Sequence[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in layers])


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad(activated: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return (activated > 0.0).astype(np.float64)
    return 1.0 - activated**2


def forward(spec: ModelSpec, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Network outputs: an (n, C) logit matrix or an (n, 1) scalar column."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != spec.layer_widths[0]:
        raise NetError("inputs must be (n, input_width)")
    layers = unflatten(spec, params)
    hidden = inputs
    for weight, bias in layers[:-1]:
        hidden = _activate(hidden @ weight + bias, spec.activation)
    weight, bias = layers[-1]
    return hidden @ weight + bias


def _forward_cached(spec, layers, inputs):
    activations = [inputs]
    hidden = inputs
    for weight, bias in layers[:-1]:
        hidden = _activate(hidden @ weight + bias, spec.activation)
        activations.append(hidden)
    weight, bias = layers[-1]
    return activations, hidden @ weight + bias


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _loss_and_output_grad(spec, outputs, targets):
    n = outputs.shape[0]
    if spec.loss_kind == "cross_entropy":
        if not np.issubdtype(targets.dtype, np.integer):
            raise NetError("cross_entropy expects integer class targets")
        if targets.min() < 0 or targets.max() >= outputs.shape[1]:
            raise NetError("class index out of range")
        shifted = outputs - outputs.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1))
        loss = float(np.mean(log_norm - shifted[np.arange(n), targets]))
        grad = _softmax(outputs)
        grad[np.arange(n), targets] -= 1.0
        return loss, grad / n
    sigma_sq = spec.noise_variance
    residual = outputs[:, 0] - targets
    loss = float(
        np.mean(residual**2) / (2.0 * sigma_sq)
        + 0.5 * np.log(2.0 * np.pi * sigma_sq)
    )
    return loss, (residual / (sigma_sq * n)).reshape(-1, 1)


def batch_loss(spec: ModelSpec, params: np.ndarray, batch: Batch) -> float:
    """Mean training loss without the gradient (for grids and paths)."""
    outputs = forward(spec, params, batch.inputs)
    loss, _ = _loss_and_output_grad(spec, outputs, batch.targets)
    return loss


def loss_and_grad(
    spec: ModelSpec, params: np.ndarray, batch: Batch
) -> tuple[float, np.ndarray]:
    """Mean batch loss and its gradient with respect to the flat params."""
    layers = unflatten(spec, params)
    activations, outputs = _forward_cached(spec, layers, batch.inputs)
    loss, delta = _loss_and_output_grad(spec, outputs, batch.targets)
    grads: list[tuple[np.ndarray, np.ndarray]] = []
    for index in range(len(layers) - 1, -1, -1):
        weight, _ = layers[index]
        prev = activations[index]
        grads.append((prev.T @ delta, delta.sum(axis=0)))
        if index > 0:
            delta = (delta @ weight.T) * _activation_grad(prev, spec.activation)
    grads.reverse()
    return loss, flatten(grads)


def predict_proba(spec: ModelSpec, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Row-stochastic class probabilities (softmax of the logits)."""
    if spec.output_kind != "logits":
        raise NetError("predict_proba requires a logits-output model")
    return _softmax(forward(spec, params, inputs))


def accuracy(spec: ModelSpec, params: np.ndarray, batch: Batch) -> float:
    """Fraction of argmax predictions matching the class targets."""
    outputs = forward(spec, params, batch.inputs)
    return float(np.mean(outputs.argmax(axis=1) == batch.targets))
