"""Prediction by averaging models sampled from a simplicial complex.

Each simplex contributes a fixed quota of uniform samples (default 25,
past which test error is flat).  Classifiers average in probability
space, which is what makes the ensemble's NLL provably no worse than
the mean member NLL; regression models report the predictive mean, the
across-sample variance of the noise-free function, and the total
variance including the observation noise.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import netcore
from .geometry import SimplicialComplex, sample_from_complex


@dataclass(frozen=True)
class EnsembleConfig:
    j_samples_per_simplex: int = 25
    seed: int = 0

    def __post_init__(self) -> None:
        if self.j_samples_per_simplex < 1:
            raise ValueError("j_samples_per_simplex must be >= 1")

    def to_dict(self) -> dict:
        return {
            "j_samples_per_simplex": self.j_samples_per_simplex,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EnsembleConfig":
        return cls(**data)


@dataclass
class RegressionPrediction:
    mean: np.ndarray  # (n,) predictive mean
    function_variance: np.ndarray  # (n,) across-sample variance of f
    total_variance: np.ndarray  # (n,) function variance + noise variance


def _sampled_params(
    complex_: SimplicialComplex, spec: netcore.ModelSpec, config: EnsembleConfig
) -> list[np.ndarray]:
    if complex_.store.dimension != netcore.param_count(spec):
        raise netcore.NetError(
            "complex vertex dimension does not match the model's parameter count"
        )
    rng = np.random.default_rng(config.seed)
    samples = sample_from_complex(complex_, rng, config.j_samples_per_simplex)
    return [s.point for s in samples]


def sample_probabilities(
    complex_: SimplicialComplex,
    spec: netcore.ModelSpec,
    inputs: np.ndarray,
    config: EnsembleConfig,
) -> np.ndarray:
    """Per-member class probabilities, stacked as (members, n, classes)."""
    params = _sampled_params(complex_, spec, config)
    return np.stack([netcore.predict_proba(spec, p, inputs) for p in params])


def predict(
    complex_: SimplicialComplex,
    spec: netcore.ModelSpec,
    inputs: np.ndarray,
    config: EnsembleConfig,
) -> np.ndarray | RegressionPrediction:
    """Ensemble prediction over a complex.

    Classifiers return the mean of per-sample softmax probabilities;
    scalar models return mean / function variance / total variance per
    input (the latter adds the model's fixed observation noise).
    """
    if spec.output_kind == "logits":
        return sample_probabilities(complex_, spec, inputs, config).mean(axis=0)
    params = _sampled_params(complex_, spec, config)
    outputs = np.stack([netcore.forward(spec, p, inputs)[:, 0] for p in params])
    function_variance = outputs.var(axis=0)
    noise = spec.noise_variance or 0.0
    return RegressionPrediction(
        outputs.mean(axis=0), function_variance, function_variance + noise
    )


def functional_diversity(
    complex_: SimplicialComplex,
    spec: netcore.ModelSpec,
    probe_inputs: np.ndarray,
    config: EnsembleConfig,
) -> float:
    """Mean pairwise argmax disagreement rate across sampled members."""
    if spec.output_kind != "logits":
        raise netcore.NetError("functional_diversity requires a classifier")
    probs = sample_probabilities(complex_, spec, probe_inputs, config)
    votes = probs.argmax(axis=2)
    pairs = list(itertools.combinations(range(votes.shape[0]), 2))
    if not pairs:
        return 0.0
    return float(np.mean([np.mean(votes[i] != votes[j]) for i, j in pairs]))


def save_predictions_csv(
    path: str | Path,
    prediction: np.ndarray | RegressionPrediction,
    inputs: np.ndarray | None = None,
) -> None:
    """Write predictions with a leading input id column.

    Classification: ``id,p0,p1,...``; regression: ``id,x,mean,var_f,var_y``
    (``x`` included when 1-d inputs are supplied).
    """
    lines = []
    if isinstance(prediction, RegressionPrediction):
        if inputs is not None and inputs.shape[1] == 1:
            lines.append("id,x,mean,var_f,var_y")
            for i in range(prediction.mean.size):
                cells = (
                    inputs[i, 0],
                    prediction.mean[i],
                    prediction.function_variance[i],
                    prediction.total_variance[i],
                )
                lines.append(f"{i}," + ",".join(repr(float(c)) for c in cells))
        else:
            lines.append("id,mean,var_f,var_y")
            for i in range(prediction.mean.size):
                cells = (
                    prediction.mean[i],
                    prediction.function_variance[i],
                    prediction.total_variance[i],
                )
                lines.append(f"{i}," + ",".join(repr(float(c)) for c in cells))
    else:
        n_classes = prediction.shape[1]
        lines.append("id," + ",".join(f"p{c}" for c in range(n_classes)))
        for i, row in enumerate(prediction):
            lines.append(f"{i}," + ",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
