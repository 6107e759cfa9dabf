"""Classification metrics: accuracy, NLL, ECE, and temperature scaling.

ECE uses 15 equal-width bins over the max-probability confidence.
Temperature scaling follows the usual post-hoc recipe: a single T > 0
dividing the logits, fitted by golden-section search to minimize
validation NLL.  Scaling never changes the argmax, so accuracy is
invariant under any T.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

N_BINS = 15
PROB_FLOOR = 1e-12
T_RANGE = (0.05, 5.0)
T_TOL = 1e-4


@dataclass
class BinStat:
    confidence: float
    accuracy: float
    count: int


@dataclass
class CalibrationReport:
    accuracy: float
    nll: float
    ece: float
    bins: list[BinStat] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "nll": self.nll,
            "ece": self.ece,
            "bins": [
                {"confidence": b.confidence, "accuracy": b.accuracy, "count": b.count}
                for b in self.bins
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


@dataclass(frozen=True)
class TemperatureScaler:
    T: float

    def __post_init__(self) -> None:
        if self.T <= 0:
            raise ValueError("temperature must be > 0")

    def apply_to_logits(self, logits: np.ndarray) -> np.ndarray:
        return np.asarray(logits, dtype=np.float64) / self.T

    def apply_to_probs(self, probs: np.ndarray) -> np.ndarray:
        return _softmax(np.log(np.clip(probs, PROB_FLOOR, None)) / self.T)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _check(probabilities: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    probs = np.asarray(probabilities, dtype=np.float64)
    targets = np.asarray(targets).astype(np.int64).reshape(-1)
    if probs.ndim != 2 or probs.shape[0] != targets.shape[0]:
        raise ValueError("probabilities must be (n, C) matching targets")
    if not np.allclose(probs.sum(axis=1), 1.0, atol=1e-6):
        raise ValueError("probability rows must sum to 1")
    if targets.min() < 0 or targets.max() >= probs.shape[1]:
        raise ValueError("target class out of range")
    return probs, targets


def nll_of_probs(probabilities: np.ndarray, targets: np.ndarray) -> float:
    probs, targets = _check(probabilities, targets)
    picked = probs[np.arange(targets.size), targets]
    return float(-np.mean(np.log(np.clip(picked, PROB_FLOOR, None))))


def evaluate(probabilities: np.ndarray, targets: np.ndarray) -> CalibrationReport:
    """Accuracy, NLL, and 15-bin ECE of predicted class probabilities."""
    probs, targets = _check(probabilities, targets)
    n = targets.size
    predictions = probs.argmax(axis=1)
    correct = predictions == targets
    accuracy = float(np.mean(correct))
    nll = nll_of_probs(probs, targets)

    confidence = probs.max(axis=1)
    indices = np.minimum((confidence * N_BINS).astype(int), N_BINS - 1)
    bins: list[BinStat] = []
    ece = 0.0
    for b in range(N_BINS):
        mask = indices == b
        count = int(mask.sum())
        if count == 0:
            bins.append(BinStat(0.0, 0.0, 0))
            continue
        conf_b = float(confidence[mask].mean())
        acc_b = float(correct[mask].mean())
        bins.append(BinStat(conf_b, acc_b, count))
        ece += (count / n) * abs(acc_b - conf_b)
    return CalibrationReport(accuracy, nll, float(ece), bins)


def fit_temperature(
    values: np.ndarray, targets: np.ndarray, probabilities: bool = False
) -> TemperatureScaler:
    """Fit the single temperature minimizing NLL on a validation set.

    ``values`` are logits unless ``probabilities=True``, in which case
    logits are recovered as log p (softmax is shift-invariant).  Golden
    section search over T in [0.05, 5.0] to 1e-4; the result is never
    worse than T=1 on the fitting set.
    """
    values = np.asarray(values, dtype=np.float64)
    targets = np.asarray(targets).astype(np.int64).reshape(-1)
    if values.ndim != 2 or values.shape[0] != targets.size:
        raise ValueError("values must be (n, C) matching targets")
    if np.unique(targets).size < 2:
        raise ValueError("validation set needs at least two classes")
    logits = np.log(np.clip(values, PROB_FLOOR, None)) if probabilities else values

    def nll_at(temperature: float) -> float:
        return nll_of_probs(_softmax(logits / temperature), targets)

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = T_RANGE
    x1 = hi - inv_phi * (hi - lo)
    x2 = lo + inv_phi * (hi - lo)
    f1, f2 = nll_at(x1), nll_at(x2)
    while hi - lo > T_TOL:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - inv_phi * (hi - lo)
            f1 = nll_at(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + inv_phi * (hi - lo)
            f2 = nll_at(x2)
    best = 0.5 * (lo + hi)
    if nll_at(best) > nll_at(1.0):
        best = 1.0
    return TemperatureScaler(best)
