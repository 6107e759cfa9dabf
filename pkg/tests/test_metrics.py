import math

import numpy as np
import pytest

from simploss import metrics


def calibrated_predictions(rng, n, classes=2):
    """Confidence c on the argmax class; correct with probability c."""
    conf = rng.uniform(1.0 / classes, 1.0, size=n)
    probs = np.empty((n, classes))
    targets = np.empty(n, dtype=np.int64)
    for i, c in enumerate(conf):
        winner = rng.integers(classes)
        probs[i] = (1.0 - c) / (classes - 1)
        probs[i, winner] = c
        if rng.random() < c:
            targets[i] = winner
        else:
            losers = [k for k in range(classes) if k != winner]
            targets[i] = rng.choice(losers)
    return probs, targets


class TestEvaluate:
    def test_one_hot_correct(self):
        probs = np.eye(3)[[0, 1, 2, 1]]
        report = metrics.evaluate(probs, np.array([0, 1, 2, 1]))
        assert report.accuracy == 1.0
        assert report.nll == pytest.approx(0.0, abs=1e-9)
        assert report.ece == pytest.approx(0.0, abs=1e-9)
        assert sum(b.count for b in report.bins) == 4

    def test_uniform_predictions_nll_is_log_c(self):
        probs = np.full((10, 5), 0.2)
        report = metrics.evaluate(probs, np.zeros(10, dtype=int))
        assert report.nll == pytest.approx(math.log(5.0), rel=1e-12)

    def test_calibrated_predictor_has_small_ece(self):
        rng = np.random.default_rng(0)
        probs, targets = calibrated_predictions(rng, 100_000)
        report = metrics.evaluate(probs, targets)
        assert report.ece == pytest.approx(0.0, abs=0.01)

    def test_confident_correct_predictor_has_zero_ece(self):
        probs = np.eye(4)[np.arange(20) % 4]
        report = metrics.evaluate(probs, np.arange(20) % 4)
        assert report.ece == 0.0

    def test_row_sum_validation(self):
        with pytest.raises(ValueError):
            metrics.evaluate(np.array([[0.7, 0.7]]), np.array([0]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            metrics.evaluate(np.full((3, 2), 0.5), np.array([0, 1]))


class TestTemperature:
    def make_calibrated_logits(self, rng, n=50_000, classes=3):
        logits = rng.normal(scale=2.0, size=(n, classes))
        probs = metrics._softmax(logits)
        targets = np.array([rng.choice(classes, p=p) for p in probs])
        return logits, targets

    def test_calibrated_logits_give_t_near_one(self):
        rng = np.random.default_rng(1)
        logits, targets = self.make_calibrated_logits(rng)
        scaler = metrics.fit_temperature(logits, targets)
        assert scaler.T == pytest.approx(1.0, abs=0.05)

    def test_doubled_logits_recover_t_two(self):
        rng = np.random.default_rng(2)
        logits, targets = self.make_calibrated_logits(rng)
        scaler = metrics.fit_temperature(2.0 * logits, targets)
        assert scaler.T == pytest.approx(2.0, abs=0.05)

    def test_fit_never_worse_than_unit_temperature(self):
        rng = np.random.default_rng(3)
        logits = rng.normal(size=(500, 4))
        targets = rng.integers(0, 4, size=500)
        scaler = metrics.fit_temperature(logits, targets)
        nll_fit = metrics.nll_of_probs(
            metrics._softmax(logits / scaler.T), targets
        )
        nll_one = metrics.nll_of_probs(metrics._softmax(logits), targets)
        assert nll_fit <= nll_one + 1e-12

    def test_accuracy_invariant_under_scaling(self):
        rng = np.random.default_rng(4)
        logits = rng.normal(size=(200, 3))
        targets = rng.integers(0, 3, size=200)
        base = metrics.evaluate(metrics._softmax(logits), targets).accuracy
        for temperature in (0.1, 0.7, 3.0):
            scaled = metrics.evaluate(
                metrics._softmax(logits / temperature), targets
            ).accuracy
            assert scaled == base

    def test_probability_input_path(self):
        rng = np.random.default_rng(5)
        logits, targets = self.make_calibrated_logits(rng, n=20_000)
        probs = metrics._softmax(2.0 * logits)
        scaler = metrics.fit_temperature(probs, targets, probabilities=True)
        assert scaler.T == pytest.approx(2.0, abs=0.1)

    def test_single_class_validation_rejected(self):
        with pytest.raises(ValueError):
            metrics.fit_temperature(np.zeros((5, 2)), np.zeros(5, dtype=int))

    def test_temperature_must_be_positive(self):
        with pytest.raises(ValueError):
            metrics.TemperatureScaler(0.0)
