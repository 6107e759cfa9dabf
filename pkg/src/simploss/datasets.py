"""Desk-scale dataset generators and CSV ingestion.

Two interleaved spirals for classification, a random-teacher 1-D
regression task with three disjoint input intervals, and a plain CSV
round trip (header ``x0,x1,...,y``) that preserves binary64 values
exactly via repr/parse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import netcore
from .netcore import Batch


class CsvFormatError(ValueError):
    """Malformed or schema-mismatched CSV input."""


@dataclass(frozen=True)
class SpiralsConfig:
    n_per_class: int = 100
    noise_sigma: float = 0.02
    turns_angle: float = 3.0 * math.pi
    seed: int = 0
    n_test_per_class: int | None = None  # defaults to n_per_class

    def __post_init__(self) -> None:
        if self.n_per_class < 1:
            raise ValueError("n_per_class must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.turns_angle <= 0:
            raise ValueError("turns_angle must be > 0")

    def to_dict(self) -> dict:
        return {
            "n_per_class": self.n_per_class,
            "noise_sigma": self.noise_sigma,
            "turns_angle": self.turns_angle,
            "seed": self.seed,
            "n_test_per_class": self.n_test_per_class,
        }


@dataclass(frozen=True)
class RegressionTeacherConfig:
    hidden_width: int = 100
    points_per_interval: int = 40
    noise_sigma_sq: float = 0.1
    seed: int = 0
    intervals: tuple[tuple[float, float], ...] = ((-7.0, -5.0), (-1.0, 1.0), (5.0, 7.0))
    grid_lo: float = -9.0
    grid_hi: float = 9.0
    grid_step: float = 0.05

    def __post_init__(self) -> None:
        if self.hidden_width < 1:
            raise ValueError("hidden_width must be >= 1")
        if self.points_per_interval < 1:
            raise ValueError("points_per_interval must be >= 1")
        if self.noise_sigma_sq < 0:
            raise ValueError("noise_sigma_sq must be >= 0")

    def to_dict(self) -> dict:
        return {
            "hidden_width": self.hidden_width,
            "points_per_interval": self.points_per_interval,
            "noise_sigma_sq": self.noise_sigma_sq,
            "seed": self.seed,
            "intervals": [list(iv) for iv in self.intervals],
            "grid_lo": self.grid_lo,
            "grid_hi": self.grid_hi,
            "grid_step": self.grid_step,
        }


@dataclass
class Regression1D:
    train: Batch
    grid_inputs: np.ndarray  # (g, 1) dense evaluation grid
    teacher_values: np.ndarray  # (g,) noiseless teacher outputs on the grid


def _spiral_points(config: SpiralsConfig, rng: np.random.Generator) -> Batch:
    points = []
    labels = []
    for cls in (0, 1):
        u = rng.uniform(0.0, 1.0, size=config.n_per_class)
        theta = config.turns_angle * np.sqrt(u)
        radius = theta / config.turns_angle
        angle = theta + cls * math.pi
        xy = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
        xy += rng.normal(0.0, config.noise_sigma, size=xy.shape)
        points.append(xy)
        labels.append(np.full(config.n_per_class, cls, dtype=np.int64))
    return Batch(np.vstack(points), np.concatenate(labels))


def gen_two_spirals(config: SpiralsConfig) -> tuple[Batch, Batch]:
    """Interleaved two-spirals train and test splits.

    Each class traces theta = turns_angle * sqrt(u), radius sqrt(u),
    with class 1 rotated by pi; the sqrt warp keeps density roughly
    even along the arms.  The test split uses an independently spawned
    stream of the same size unless ``n_test_per_class`` says otherwise.
    """
    train_seq, test_seq = np.random.SeedSequence(config.seed).spawn(2)
    train = _spiral_points(config, np.random.default_rng(train_seq))
    test_config = config
    if config.n_test_per_class is not None:
        test_config = SpiralsConfig(
            n_per_class=config.n_test_per_class,
            noise_sigma=config.noise_sigma,
            turns_angle=config.turns_angle,
            seed=config.seed,
        )
    test = _spiral_points(test_config, np.random.default_rng(test_seq))
    return train, test


def teacher_spec(config: RegressionTeacherConfig) -> netcore.ModelSpec:
    return netcore.ModelSpec(
        (1, config.hidden_width, 1),
        activation="tanh",
        output_kind="scalar",
        loss_kind="gaussian_nll",
        noise_variance=max(config.noise_sigma_sq, 1e-12),
    )


def gen_regression_1d(config: RegressionTeacherConfig) -> Regression1D:
    """Noisy draws from a random tanh teacher on three input intervals.

    The teacher is a 1 -> hidden -> 1 tanh network with standard-normal
    weights scaled by sqrt(2/fan_in).  Targets add Normal(0, sigma^2)
    noise; the evaluation grid carries the noiseless teacher values.
    """
    teacher_seq, input_seq, noise_seq = np.random.SeedSequence(config.seed).spawn(3)
    spec = teacher_spec(config)
    params = netcore.init_params(spec, np.random.default_rng(teacher_seq))

    input_rng = np.random.default_rng(input_seq)
    xs = []
    for lo, hi in config.intervals:
        xs.append(input_rng.uniform(lo, hi, size=config.points_per_interval))
    x = np.concatenate(xs).reshape(-1, 1)
    clean = netcore.forward(spec, params, x)[:, 0]
    noise = np.random.default_rng(noise_seq).normal(
        0.0, math.sqrt(config.noise_sigma_sq), size=clean.shape
    )
    train = Batch(x, clean + noise)

    n_grid = int(round((config.grid_hi - config.grid_lo) / config.grid_step)) + 1
    grid = np.linspace(config.grid_lo, config.grid_hi, n_grid).reshape(-1, 1)
    teacher_values = netcore.forward(spec, params, grid)[:, 0]
    return Regression1D(train, grid, teacher_values)


@dataclass(frozen=True)
class CsvSchema:
    n_features: int
    target_kind: str = "class"  # "class" | "real"

    def __post_init__(self) -> None:
        if self.n_features < 1:
            raise ValueError("n_features must be >= 1")
        if self.target_kind not in ("class", "real"):
            raise ValueError(f"unknown target kind {self.target_kind!r}")

    @property
    def header(self) -> list[str]:
        return [f"x{i}" for i in range(self.n_features)] + ["y"]


def save_csv(path: str | Path, batch: Batch, schema: CsvSchema) -> None:
    if batch.inputs.shape[1] != schema.n_features:
        raise CsvFormatError("batch does not match schema feature count")
    lines = [",".join(schema.header)]
    for row, target in zip(batch.inputs, batch.targets):
        cells = [repr(float(v)) for v in row]
        if schema.target_kind == "class":
            cells.append(str(int(target)))
        else:
            cells.append(repr(float(target)))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_csv(path: str | Path, schema: CsvSchema) -> Batch:
    """Parse a saved batch; every malformed row is reported by line number."""
    path = Path(path)
    if not path.exists():
        raise CsvFormatError(f"no such file: {path}")
    text = path.read_text(encoding="utf-8")
    lines = [line for line in text.splitlines()]
    if not lines:
        raise CsvFormatError(f"{path}: empty file")
    if lines[0].split(",") != schema.header:
        raise CsvFormatError(
            f"{path}: header {lines[0]!r} does not match schema {schema.header}"
        )
    rows: list[list[float]] = []
    targets: list[float] = []
    bad: list[str] = []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != schema.n_features + 1:
            bad.append(f"line {number}: expected {schema.n_features + 1} fields")
            continue
        try:
            rows.append([float(c) for c in cells[:-1]])
            if schema.target_kind == "class":
                targets.append(int(cells[-1]))
            else:
                targets.append(float(cells[-1]))
        except ValueError:
            bad.append(f"line {number}: unparseable value")
    if bad:
        raise CsvFormatError(f"{path}: " + "; ".join(bad))
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    target_array = (
        np.asarray(targets, dtype=np.int64)
        if schema.target_kind == "class"
        else np.asarray(targets, dtype=np.float64)
    )
    return Batch(np.asarray(rows, dtype=np.float64), target_array)
