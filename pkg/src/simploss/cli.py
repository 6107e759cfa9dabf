"""Command-line driver: reproducible experiments with config + seed.

Subcommands: gen-data | train-base | spro | probe-dim | eval | surface.
Every command takes --config/--seed/--out; identical config and seed
reproduce byte-identical science artifacts (timestamps go only to
run.log).  Each run directory gets a manifest listing artifact hashes.

Exit codes: 0 success, 2 validation error, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import checkpoints, datasets, ensemble, metrics, netcore, opt, spro, surface
from .config import ConfigError, CsvDatasetConfig, ExperimentConfig, load_config, load_dataset
from .datasets import CsvFormatError
from .geometry import GeometryError

EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3


def _log(out_dir: Path, message: str) -> None:
    stamp = datetime.datetime.now().isoformat(timespec="seconds")
    with (out_dir / "run.log").open("a", encoding="utf-8") as handle:
        handle.write(f"{stamp} {message}\n")
    print(message)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, command: str, paths: list[Path]) -> None:
    manifest = {
        "command": command,
        "artifacts": {
            str(p.relative_to(out_dir)): _sha256(p) for p in sorted(paths)
        },
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _prepare(args) -> tuple[ExperimentConfig, Path]:
    config = load_config(args.config, args.seed)
    out_dir = Path(args.out) if args.out else Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return config, out_dir


def _is_regression(config: ExperimentConfig) -> bool:
    return config.model.output_kind == "scalar"


def cmd_gen_data(args) -> int:
    config, out_dir = _prepare(args)
    train, test = load_dataset(config)
    written: list[Path] = []
    if isinstance(test, datasets.Regression1D):
        schema = datasets.CsvSchema(1, "real")
        datasets.save_csv(out_dir / "train.csv", train, schema)
        grid = netcore.Batch(test.grid_inputs, test.teacher_values)
        datasets.save_csv(out_dir / "grid.csv", grid, schema)
        written = [out_dir / "train.csv", out_dir / "grid.csv"]
    else:
        kind = "real" if _is_regression(config) else "class"
        schema = datasets.CsvSchema(train.inputs.shape[1], kind)
        datasets.save_csv(out_dir / "train.csv", train, schema)
        written = [out_dir / "train.csv"]
        if test is not None:
            datasets.save_csv(out_dir / "test.csv", test, schema)
            written.append(out_dir / "test.csv")
    _write_manifest(out_dir, "gen-data", written)
    _log(out_dir, f"gen-data: wrote {', '.join(p.name for p in written)} "
                  f"({train.size} train rows)")
    return 0


def cmd_train_base(args) -> int:
    config, out_dir = _prepare(args)
    train, test = load_dataset(config)
    params, history = opt.train_base(config.model, train, config.train)
    name = args.tag or "mode"
    ckpt_path = out_dir / f"{name}.json"
    checkpoints.save_mode(
        ckpt_path, config.model, params, config.train.seed,
        config.train.to_dict(), history,
    )
    (out_dir / f"{name}_history.jsonl").write_text(
        opt.history_to_jsonl(history), encoding="utf-8"
    )
    written = [ckpt_path, out_dir / f"{name}_history.jsonl"]
    _write_manifest(out_dir, "train-base", written)

    summary = f"train-base[{name}]: final loss {history[-1]['loss']:.6f}"
    if not _is_regression(config):
        summary += f", train acc {netcore.accuracy(config.model, params, train):.4f}"
        if isinstance(test, netcore.Batch):
            summary += f", test acc {netcore.accuracy(config.model, params, test):.4f}"
    _log(out_dir, summary)
    return 0


def _load_modes(paths: list[str], spec: netcore.ModelSpec) -> dict[str, np.ndarray]:
    modes: dict[str, np.ndarray] = {}
    for index, path in enumerate(paths):
        ckpt = checkpoints.load_mode(path)
        if ckpt.spec != spec:
            raise checkpoints.CheckpointError(
                f"{path}: model spec does not match the experiment config"
            )
        modes[f"w{index}"] = ckpt.params
    return modes


def cmd_spro(args) -> int:
    config, out_dir = _prepare(args)
    train, _ = load_dataset(config)
    modes = _load_modes(args.modes, config.model)
    if args.mode == "espro":
        if args.k < 0:
            raise ConfigError("--k must be >= 0")
        built, history = spro.build_espro_complex(
            config.model, modes, args.k, train, config.spro, config.reg,
            seed=config.spro.train.seed,
        )
    else:
        if not args.layout:
            raise ConfigError("--mode connect requires --layout")
        layout = spro.ComplexSpec.from_dict(
            json.loads(Path(args.layout).read_text(encoding="utf-8"))
        )
        if set(layout.modes) != set(modes):
            raise ConfigError(
                f"layout modes {sorted(layout.modes)} do not match the "
                f"{len(modes)} supplied checkpoints (expected ids "
                f"{sorted(modes)})"
            )
        built, history = spro.build_connecting_complex(
            config.model, modes, layout, train, config.spro, config.reg,
            seed=config.spro.train.seed,
        )
    ckpt_path = out_dir / "complex.json"
    checkpoints.save_complex(
        ckpt_path,
        config.model,
        built,
        seeds={"spro_train": config.spro.train.seed, "experiment": config.seed},
        config={
            "spro": config.spro.to_dict(),
            "reg": config.reg.to_dict(),
            "mode": args.mode,
            "k": args.k if args.mode == "espro" else None,
        },
        history=history,
    )
    _write_manifest(out_dir, "spro", [ckpt_path])
    from .geometry import log_complex_volume

    _log(
        out_dir,
        f"spro[{args.mode}]: {len(built.simplexes)} simplexes, "
        f"log volume {log_complex_volume(built):.4f}, wrote {ckpt_path.name}",
    )
    return 0


def cmd_probe_dim(args) -> int:
    config, out_dir = _prepare(args)
    train, _ = load_dataset(config)
    w0 = checkpoints.load_mode(args.w0)
    w1 = checkpoints.load_mode(args.w1)
    for path, ckpt in ((args.w0, w0), (args.w1, w1)):
        if ckpt.spec != config.model:
            raise checkpoints.CheckpointError(
                f"{path}: model spec does not match the experiment config"
            )
    result = spro.dimensionality_probe(
        config.model, w0.params, w1.params, args.max_k, train,
        config.spro, config.reg, seed=config.spro.train.seed,
    )
    table = out_dir / "probe.csv"
    lines = ["k,log_volume,sample_acc_mean,sample_acc_min"]
    for record in result.records:
        lines.append(
            f"{record.n_connectors},{record.log_volume!r},"
            f"{record.sample_acc_mean!r},{record.sample_acc_min!r}"
        )
    table.write_text("\n".join(lines) + "\n", encoding="utf-8")
    report = out_dir / "probe_report.json"
    _write_json(
        report,
        {
            "max_k": args.max_k,
            "collapse_at": result.collapse_at,
            "dimension_lower_bound": result.dimension_lower_bound,
        },
    )
    _write_manifest(out_dir, "probe-dim", [table, report])
    if result.collapse_at is None:
        _log(out_dir, f"probe-dim: no collapse up to max_k={args.max_k}")
    else:
        _log(
            out_dir,
            f"probe-dim: collapse at k={result.collapse_at}, "
            f"dimension lower bound {result.dimension_lower_bound}",
        )
    return 0


def _eval_classifier(args, config, out_dir, ckpt, train, test) -> list[Path]:
    data = test if isinstance(test, netcore.Batch) else train
    # fixed shuffle so the temperature-fitting half sees every class
    order = np.random.default_rng(config.ensemble.seed).permutation(data.size)
    data = netcore.Batch(data.inputs[order], data.targets[order])
    members = ensemble.sample_probabilities(
        ckpt.complex, config.model, data.inputs, config.ensemble
    )
    probs = members.mean(axis=0)
    half = data.size // 2
    scaler = metrics.fit_temperature(
        probs[:half], data.targets[:half], probabilities=True
    )
    report = metrics.evaluate(probs[half:], data.targets[half:])
    scaled_report = metrics.evaluate(
        scaler.apply_to_probs(probs[half:]), data.targets[half:]
    )
    member_nll = float(
        np.mean([metrics.nll_of_probs(m[half:], data.targets[half:]) for m in members])
    )
    payload = {
        "kind": "classification",
        "temperature": scaler.T,
        "eval_split": "second half of the evaluation set",
        "unscaled": report.to_dict(),
        "scaled": scaled_report.to_dict(),
        "ensemble_nll": report.nll,
        "member_nll_mean": member_nll,
    }
    written = [out_dir / "report.json", out_dir / "predictions.csv"]
    _write_json(out_dir / "report.json", payload)
    ensemble.save_predictions_csv(out_dir / "predictions.csv", probs)

    if args.j_sweep:
        sweeps = [int(v) for v in args.j_sweep.split(",")]
        lines = ["j,test_error"]
        for j in sweeps:
            sub = ensemble.predict(
                ckpt.complex, config.model, data.inputs,
                ensemble.EnsembleConfig(j, config.ensemble.seed),
            )
            error = 1.0 - float(np.mean(sub.argmax(axis=1) == data.targets))
            lines.append(f"{j},{error!r}")
        (out_dir / "j_sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(out_dir / "j_sweep.csv")

    if args.boundary_grid:
        side = np.linspace(-2.0, 2.0, args.boundary_grid)
        grid = np.array([[x, y] for y in side for x in side])
        n_simplexes = len(ckpt.complex.simplexes)
        per = max(1, math.ceil(args.boundary_samples / n_simplexes))
        stack = ensemble.sample_probabilities(
            ckpt.complex, config.model, grid,
            ensemble.EnsembleConfig(per, config.ensemble.seed),
        )[: args.boundary_samples]
        votes = stack.argmax(axis=2)
        header = "x0,x1," + ",".join(f"sample{i}" for i in range(votes.shape[0]))
        lines = [header]
        for i, (x, y) in enumerate(grid):
            lines.append(
                f"{float(x)!r},{float(y)!r},"
                + ",".join(str(int(v)) for v in votes[:, i])
            )
        (out_dir / "boundary.csv").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )
        written.append(out_dir / "boundary.csv")

    _log(
        out_dir,
        f"eval: acc {report.accuracy:.4f}, nll {report.nll:.4f}, "
        f"ece {report.ece:.4f}, T {scaler.T:.3f}",
    )
    return written


def _eval_regression(args, config, out_dir, ckpt, train, data) -> list[Path]:
    grid_inputs = data.grid_inputs if isinstance(data, datasets.Regression1D) else train.inputs
    prediction = ensemble.predict(
        ckpt.complex, config.model, grid_inputs, config.ensemble
    )
    ensemble.save_predictions_csv(
        out_dir / "predictions.csv", prediction, inputs=grid_inputs
    )
    train_pred = ensemble.predict(
        ckpt.complex, config.model, train.inputs, config.ensemble
    )
    sigma_sq = config.model.noise_variance or 0.0
    residual = train_pred.mean - train.targets
    nll = float(
        np.mean(
            0.5 * residual**2 / (train_pred.function_variance + sigma_sq)
            + 0.5 * np.log(2 * np.pi * (train_pred.function_variance + sigma_sq))
        )
    )
    _write_json(
        out_dir / "report.json",
        {"kind": "regression", "train_predictive_nll": nll},
    )
    _log(out_dir, f"eval: regression predictive nll {nll:.4f}")
    return [out_dir / "report.json", out_dir / "predictions.csv"]


def cmd_eval(args) -> int:
    config, out_dir = _prepare(args)
    train, test = load_dataset(config)
    ckpt = checkpoints.load_complex(args.checkpoint)
    if ckpt.spec != config.model:
        raise checkpoints.CheckpointError(
            f"{args.checkpoint}: model spec does not match the experiment config"
        )
    if _is_regression(config):
        written = _eval_regression(args, config, out_dir, ckpt, train, test)
    else:
        written = _eval_classifier(args, config, out_dir, ckpt, train, test)
    _write_manifest(out_dir, "eval", written)
    return 0


def cmd_surface(args) -> int:
    config, out_dir = _prepare(args)
    train, _ = load_dataset(config)
    labels: list[str]
    if args.checkpoint and args.vertices:
        ckpt = checkpoints.load_complex(args.checkpoint)
        if ckpt.spec != config.model:
            raise checkpoints.CheckpointError(
                f"{args.checkpoint}: model spec does not match the experiment config"
            )
        labels = args.vertices.split(",")
        if len(labels) != 3:
            raise ConfigError("--vertices needs exactly three comma-separated ids")
        points = [ckpt.complex.store.values(v) for v in labels]
    elif args.points and len(args.points) == 3:
        modes = _load_modes(args.points, config.model)
        labels = list(modes)
        points = [modes[k] for k in labels]
    else:
        raise ConfigError(
            "surface needs either --checkpoint with --vertices a,b,c "
            "or three --points checkpoints"
        )
    basis = surface.plane_basis(*points, margin=args.margin)
    markers = [
        surface.Marker(label, *surface.project(basis, p)[:2])
        for label, p in zip(labels, points)
    ]
    grid = surface.grid_losses(basis, args.resolution, config.model, train, markers)
    csv_path = out_dir / "surface.csv"
    sidecar = surface.save_surface(grid, csv_path)
    _write_manifest(out_dir, "surface", [csv_path, sidecar])
    _log(
        out_dir,
        f"surface: {args.resolution}x{args.resolution} grid, "
        f"loss range [{grid.losses.min():.4f}, {grid.losses.max():.4f}]",
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simploss",
        description="Low-loss simplexes in neural network parameter space.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override output directory")

    p = sub.add_parser("gen-data", help="write dataset CSV files")
    common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-base", help="train a base mode")
    common(p)
    p.add_argument("--tag", default=None, help="checkpoint name (default: mode)")
    p.set_defaults(func=cmd_train_base)

    p = sub.add_parser("spro", help="grow a low-loss simplex or complex")
    common(p)
    p.add_argument("--mode", choices=("espro", "connect"), required=True)
    p.add_argument("--k", type=int, default=3, help="connectors per mode (espro)")
    p.add_argument("--layout", default=None, help="complex layout JSON (connect)")
    p.add_argument("--modes", nargs="+", required=True,
                   help="mode checkpoint paths")
    p.set_defaults(func=cmd_spro)

    p = sub.add_parser("probe-dim", help="probe low-loss manifold dimension")
    common(p)
    p.add_argument("--w0", required=True)
    p.add_argument("--w1", required=True)
    p.add_argument("--max-k", type=int, default=12)
    p.set_defaults(func=cmd_probe_dim)

    p = sub.add_parser("eval", help="evaluate an ensemble checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--j-sweep", default=None,
                   help="comma-separated sample counts, e.g. 1,5,25,200")
    p.add_argument("--boundary-grid", type=int, default=None,
                   help="emit per-sample decision classes on an NxN grid")
    p.add_argument("--boundary-samples", type=int, default=2)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("surface", help="export a loss-plane grid")
    common(p)
    p.add_argument("--checkpoint", default=None, help="complex checkpoint")
    p.add_argument("--vertices", default=None, help="three ids, e.g. w0,theta0,theta1")
    p.add_argument("--points", nargs="*", default=None,
                   help="three mode checkpoints defining the plane")
    p.add_argument("--resolution", type=int, default=41)
    p.add_argument("--margin", type=float, default=1.2)
    p.set_defaults(func=cmd_surface)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CsvFormatError, checkpoints.CheckpointError,
            GeometryError, netcore.NetError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except opt.DivergenceError as err:
        print(f"divergence: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
