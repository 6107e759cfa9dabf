"""Experiment configuration: one JSON document, validated up front.

Unknown keys anywhere in the document are rejected so that typos fail
fast instead of silently running with defaults.  Section seeds default
to offsets of the top-level seed, which the CLI's --seed flag can
override wholesale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from . import datasets, ensemble, netcore, opt, spro


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _take(section: dict, allowed: set[str], where: str) -> dict:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return dict(section)


@dataclass(frozen=True)
class CsvDatasetConfig:
    train_path: str
    test_path: str | None
    n_features: int
    target_kind: str = "class"

    @property
    def schema(self) -> datasets.CsvSchema:
        return datasets.CsvSchema(self.n_features, self.target_kind)


@dataclass
class ExperimentConfig:
    seed: int
    out_dir: str
    model: netcore.ModelSpec
    dataset: datasets.SpiralsConfig | datasets.RegressionTeacherConfig | CsvDatasetConfig
    train: opt.TrainConfig
    spro: spro.SproConfig
    reg: spro.RegSchedule
    ensemble: ensemble.EnsembleConfig

    @property
    def dataset_kind(self) -> str:
        if isinstance(self.dataset, datasets.SpiralsConfig):
            return "two_spirals"
        if isinstance(self.dataset, datasets.RegressionTeacherConfig):
            return "regression_1d"
        return "csv"


def _model_from(section: dict) -> netcore.ModelSpec:
    data = _take(
        section,
        {"layer_widths", "activation", "output_kind", "loss_kind", "noise_variance"},
        "model",
    )
    try:
        return netcore.ModelSpec.from_dict(data)
    except netcore.NetError as err:
        raise ConfigError(f"model: {err}") from err


def _dataset_from(section: dict, seed: int):
    kind = section.get("kind")
    if kind == "two_spirals":
        data = _take(
            section,
            {"kind", "n_per_class", "noise_sigma", "turns_angle", "seed",
             "n_test_per_class"},
            "dataset",
        )
        data.pop("kind")
        data.setdefault("seed", seed)
        return datasets.SpiralsConfig(**data)
    if kind == "regression_1d":
        data = _take(
            section,
            {"kind", "hidden_width", "points_per_interval", "noise_sigma_sq",
             "seed", "grid_lo", "grid_hi", "grid_step"},
            "dataset",
        )
        data.pop("kind")
        data.setdefault("seed", seed)
        return datasets.RegressionTeacherConfig(**data)
    if kind == "csv":
        data = _take(
            section,
            {"kind", "train_path", "test_path", "n_features", "target_kind"},
            "dataset",
        )
        data.pop("kind")
        data.setdefault("test_path", None)
        return CsvDatasetConfig(**data)
    raise ConfigError(f"dataset: unknown kind {kind!r}")


def _train_from(section: dict, seed: int, where: str) -> opt.TrainConfig:
    data = _take(
        section,
        {"lr", "momentum", "weight_decay", "epochs", "batch_size", "schedule", "seed"},
        where,
    )
    data.setdefault("seed", seed)
    try:
        return opt.TrainConfig(**data)
    except ValueError as err:
        raise ConfigError(f"{where}: {err}") from err


def load_config(path: str | Path, seed_override: int | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON ({err})") from err
    return config_from_dict(document, seed_override)


def config_from_dict(
    document: dict, seed_override: int | None = None
) -> ExperimentConfig:
    document = _take(
        document,
        {"seed", "out_dir", "model", "dataset", "train", "spro", "reg", "ensemble"},
        "top level",
    )
    seed = int(document.get("seed", 0)) if seed_override is None else seed_override
    if "model" not in document or "dataset" not in document:
        raise ConfigError("config needs 'model' and 'dataset' sections")

    spro_section = _take(
        document.get("spro", {}),
        {"train", "h_samples", "jitter_sigma", "volume_grad_clip", "sample_globally"},
        "spro",
    )
    spro_train = _train_from(
        spro_section.pop("train", {"lr": 0.02, "momentum": 0.9, "weight_decay": 0.0,
                                   "epochs": 60, "batch_size": 32}),
        seed + 1,
        "spro.train",
    )
    try:
        spro_config = spro.SproConfig(train=spro_train, **spro_section)
    except ValueError as err:
        raise ConfigError(f"spro: {err}") from err

    reg_section = _take(
        document.get("reg", {}), {"lambda_star", "probe_jitter_sigma"}, "reg"
    )
    try:
        reg = spro.RegSchedule(**reg_section)
    except ValueError as err:
        raise ConfigError(f"reg: {err}") from err

    ens_section = _take(
        document.get("ensemble", {}), {"j_samples_per_simplex", "seed"}, "ensemble"
    )
    ens_section.setdefault("seed", seed + 2)
    try:
        ens = ensemble.EnsembleConfig(**ens_section)
    except ValueError as err:
        raise ConfigError(f"ensemble: {err}") from err

    return ExperimentConfig(
        seed=seed,
        out_dir=str(document.get("out_dir", "runs/experiment")),
        model=_model_from(document["model"]),
        dataset=_dataset_from(document["dataset"], seed),
        train=_train_from(document.get("train", {}), seed, "train"),
        spro=spro_config,
        reg=reg,
        ensemble=ens,
    )


def load_dataset(config: ExperimentConfig):
    """Materialize (train, test) batches; test may be None for CSV runs.

    Regression runs return (train, Regression1D) so callers can reach
    the evaluation grid.
    """
    dataset = config.dataset
    if isinstance(dataset, datasets.SpiralsConfig):
        return datasets.gen_two_spirals(dataset)
    if isinstance(dataset, datasets.RegressionTeacherConfig):
        data = datasets.gen_regression_1d(dataset)
        return data.train, data
    train = datasets.load_csv(dataset.train_path, dataset.schema)
    test = (
        datasets.load_csv(dataset.test_path, dataset.schema)
        if dataset.test_path
        else None
    )
    return train, test
