"""Acceptance suite: one test per release criterion.

Each test prints one `[ACCEPTANCE] <name>: PASS|FAIL` line (run with
`pytest tests/test_acceptance.py -s` to see them live) and enforces the
stated tolerances and runtime budgets.  Experiment-backed criteria run
the full desk-scale pipelines across seeds.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from simploss import checkpoints, cli, datasets, ensemble, metrics, netcore, opt, spro
from simploss.geometry import (
    NEG_INF,
    Simplex,
    SimplicialComplex,
    VertexStore,
    hull_distance_and_grad,
    log_volume_of_points,
    sample_uniform,
)

SPIRAL_SEEDS = range(5)
WIDTHS = (2, 32, 32, 2)
PROBE_WIDTHS = (2, 16, 16, 2)  # 354 parameters


def _verdict(name, ok, detail, started, budget_s):
    elapsed = time.time() - started
    status = "PASS" if ok else "FAIL"
    print(f"[ACCEPTANCE] {name}: {status} ({detail}; {elapsed:.1f}s)")
    assert ok, f"{name}: {detail}"
    assert elapsed < budget_s, f"{name}: runtime {elapsed:.1f}s over budget {budget_s}s"


def _base_train_config(seed):
    return opt.TrainConfig(lr=0.05, momentum=0.9, weight_decay=1e-4,
                           epochs=400, batch_size=32, seed=seed)


def _connector_config(seed, epochs=60):
    return spro.SproConfig(
        train=opt.TrainConfig(lr=0.02, momentum=0.9, weight_decay=0.0,
                              epochs=epochs, batch_size=32, seed=seed)
    )


@pytest.fixture(scope="session")
def spiral_runs():
    """Per seed: two-spirals data plus two independently trained modes."""
    spec = netcore.ModelSpec(WIDTHS)
    runs = []
    for seed in SPIRAL_SEEDS:
        config = datasets.SpiralsConfig(
            n_per_class=100, noise_sigma=0.02, seed=seed, n_test_per_class=500
        )
        train, test = datasets.gen_two_spirals(config)
        w0, _ = opt.train_base(spec, train, _base_train_config(100 + seed))
        w1, _ = opt.train_base(spec, train, _base_train_config(150 + seed))
        runs.append({"seed": seed, "train": train, "test": test, "w0": w0, "w1": w1})
    return spec, runs


@pytest.fixture(scope="session")
def espro_simplexes(spiral_runs):
    """A 3-simplex grown from each run's first mode."""
    spec, runs = spiral_runs
    grown = []
    for run in runs:
        cx, _ = spro.build_espro_simplex(
            spec, run["w0"], 3, run["train"],
            _connector_config(200 + run["seed"]),
            spro.RegSchedule(lambda_star=1.0),
        )
        grown.append(cx)
    return grown


class TestGeometryOracles:
    def test_geometry_oracle_suite(self):
        started = time.time()
        failures = []

        segment = np.array([[0.0, 0.0], [1.0, 0.0]])
        log_v, _ = log_volume_of_points(segment)
        if abs(math.exp(log_v) - 1.0) > 1e-10:
            failures.append("unit segment")

        triangle = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
        log_v, _ = log_volume_of_points(triangle)
        if abs(math.exp(log_v) - math.sqrt(3) / 4) / (math.sqrt(3) / 4) > 1e-10:
            failures.append("equilateral triangle")

        tetra = np.array(
            [
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.5, math.sqrt(3) / 2, 0.0],
                [0.5, math.sqrt(3) / 6, math.sqrt(2.0 / 3.0)],
            ]
        )
        log_v, _ = log_volume_of_points(tetra)
        expected = 1.0 / (6.0 * math.sqrt(2.0))
        if abs(math.exp(log_v) - expected) / expected > 1e-10:
            failures.append("regular tetrahedron")

        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(100):
            m = int(rng.integers(2, 7))
            dim = int(rng.integers(m, m + 25))
            base = rng.normal(size=(m, dim))
            theta = rng.normal(size=dim)
            h, _ = hull_distance_and_grad(theta, base)
            log_base, _ = log_volume_of_points(base)
            log_full, _ = log_volume_of_points(np.vstack([theta, base]))
            expected = log_base + math.log(h) - math.log(m)
            worst = max(worst, abs(log_full - expected) / max(abs(expected), 1e-12))
        if worst > 1e-6:
            failures.append(f"recursion mismatch {worst:.2e}")

        _verdict(
            "geometry-oracles",
            not failures,
            failures or f"analytic volumes at 1e-10, recursion worst {worst:.2e}",
            started,
            budget_s=10,
        )


class TestSamplingStatistics:
    def test_sampling_statistics(self):
        started = time.time()
        n = 100_000
        failures = []

        store = VertexStore()
        verts = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 3.0]])
        for i, p in enumerate(verts):
            store.add(f"v{i}", p)
        simplex = Simplex(("v0", "v1", "v2"))
        rng = np.random.default_rng(7)
        total = np.zeros(2)
        for _ in range(n):
            point, _ = sample_uniform(simplex, store, rng)
            total += point
        centroid_err = np.abs(total / n - verts.mean(axis=0)).max()
        if centroid_err > 0.01:
            failures.append(f"centroid {centroid_err:.4f}")

        unit_store = VertexStore()
        for i, p in enumerate(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])):
            unit_store.add(f"v{i}", p)
        unit = Simplex(("v0", "v1", "v2"))
        rng = np.random.default_rng(8)
        hits = 0
        firsts = np.empty(n)
        for i in range(n):
            point, weights = sample_uniform(unit, unit_store, rng)
            hits += point[0] + point[1] < 0.5
            firsts[i] = weights[0]
        ratio = hits / n
        if abs(ratio - 0.25) > 0.01:
            failures.append(f"area ratio {ratio:.4f}")

        firsts.sort()
        cdf = 2.0 * firsts - firsts**2
        grid = np.arange(1, n + 1) / n
        ks = max(np.abs(grid - cdf).max(), np.abs(grid - 1.0 / n - cdf).max())
        if ks > 0.01:
            failures.append(f"KS {ks:.4f}")

        _verdict(
            "sampling-statistics",
            not failures,
            failures or f"centroid {centroid_err:.4f}, ratio {ratio:.4f}, KS {ks:.4f}",
            started,
            budget_s=30,
        )


class TestGradientSuite:
    def test_gradient_suite(self):
        started = time.time()
        step = 1e-5
        worst_plain = 0.0
        rng = np.random.default_rng(31)
        for _ in range(20):
            widths = (2, int(rng.integers(3, 7)), 2)
            if rng.random() < 0.5:
                spec = netcore.ModelSpec(widths, activation="tanh")
            else:
                spec = netcore.ModelSpec(widths)
            params = netcore.init_params(spec, rng) + 0.05 * rng.normal(
                size=netcore.param_count(spec)
            )
            batch = netcore.Batch(
                rng.normal(size=(8, 2)), rng.integers(0, 2, size=8)
            )
            _, grad = netcore.loss_and_grad(spec, params, batch)
            fd = np.empty_like(params)
            for i in range(params.size):
                up, down = params.copy(), params.copy()
                up[i] += step
                down[i] -= step
                fd[i] = (
                    netcore.batch_loss(spec, up, batch)
                    - netcore.batch_loss(spec, down, batch)
                ) / (2 * step)
            scale = np.maximum(np.abs(fd), 1e-6)
            worst_plain = max(worst_plain, float(np.max(np.abs(grad - fd) / scale)))

        worst_reg = 0.0
        spec = netcore.ModelSpec((2, 5, 2))  # 27 parameters
        d = netcore.param_count(spec)
        for trial in range(20):
            trial_rng = np.random.default_rng(1000 + trial)
            store = VertexStore()
            store.add("a", trial_rng.normal(size=d), role="mode")
            store.add("b", trial_rng.normal(size=d), role="mode")
            store.add("t", trial_rng.normal(size=d), trainable=True)
            cx = SimplicialComplex(store, [Simplex(("a", "b", "t"))])
            batch = netcore.Batch(
                trial_rng.normal(size=(10, 2)), trial_rng.integers(0, 2, size=10)
            )
            lambda_j = 1e-3
            frozen = 555 + trial
            theta = store.values("t").copy()

            def objective(values):
                cx.store.set_values("t", values)
                return spro.regularized_loss_and_grad(
                    cx, "t", batch, spec, 5, lambda_j,
                    np.random.default_rng(frozen),
                ).objective

            cx.store.set_values("t", theta)
            analytic = spro.regularized_loss_and_grad(
                cx, "t", batch, spec, 5, lambda_j, np.random.default_rng(frozen)
            ).grad
            fd = np.empty(d)
            for i in range(d):
                up, down = theta.copy(), theta.copy()
                up[i] += step
                down[i] -= step
                fd[i] = (objective(up) - objective(down)) / (2 * step)
            scale = np.maximum(np.abs(fd), 1e-6)
            worst_reg = max(worst_reg, float(np.max(np.abs(analytic - fd) / scale)))

        ok = worst_plain < 1e-4 and worst_reg < 1e-4
        _verdict(
            "gradient-suite",
            ok,
            f"plain worst {worst_plain:.2e}, regularized worst {worst_reg:.2e}",
            started,
            budget_s=60,
        )


class TestModeConnectivity:
    def test_mode_connectivity(self, spiral_runs):
        started = time.time()
        spec, runs = spiral_runs
        layout = spro.ComplexSpec(
            modes=("w0", "w1"), connectors=("t0",),
            simplexes=(("w0", "t0"), ("w1", "t0")),
        )
        wins = 0
        details = []
        for run in runs:
            cx, _ = spro.build_connecting_complex(
                spec, {"w0": run["w0"], "w1": run["w1"]}, layout, run["train"],
                _connector_config(300 + run["seed"]),
                spro.RegSchedule(lambda_star=1.0),
            )
            theta = cx.store.values("t0")
            direct = spro.polyline_losses(
                spec, run["train"], [run["w0"], run["w1"]], 50
            ).max()
            path = spro.polyline_losses(
                spec, run["train"], [run["w0"], theta, run["w1"]], 50
            ).max()
            wins += path < direct
            details.append(f"{path:.3f}<{direct:.3f}")
        _verdict(
            "mode-connectivity",
            wins >= 4,
            f"{wins}/5 seeds (path<direct max loss: {', '.join(details)})",
            started,
            budget_s=300,
        )


class TestEsproSimplexQuality:
    def test_espro_simplex_quality(self, spiral_runs, espro_simplexes):
        started = time.time()
        spec, runs = spiral_runs
        side = np.linspace(-2.0, 2.0, 41)
        grid = np.array([[x, y] for y in side for x in side])
        wins = 0
        details = []
        for run, cx in zip(runs, espro_simplexes):
            config = ensemble.EnsembleConfig(
                j_samples_per_simplex=25, seed=400 + run["seed"]
            )
            members = ensemble.sample_probabilities(
                cx, spec, run["train"].inputs, config
            )
            member_accs = [
                float(np.mean(m.argmax(axis=1) == run["train"].targets))
                for m in members
            ]
            disagreement = ensemble.functional_diversity(cx, spec, grid, config)
            ens_probs = ensemble.predict(cx, spec, run["test"].inputs, config)
            ens_err = 1.0 - float(
                np.mean(ens_probs.argmax(axis=1) == run["test"].targets)
            )
            base_err = 1.0 - netcore.accuracy(spec, run["w0"], run["test"])
            ok = (
                min(member_accs) >= 0.95
                and disagreement > 0.01
                and ens_err <= base_err + 0.005
            )
            wins += ok
            details.append(
                f"acc{min(member_accs):.2f}/dis{disagreement:.3f}/"
                f"err{ens_err:.3f}vs{base_err:.3f}"
            )
        _verdict(
            "espro-simplex-quality",
            wins >= 4,
            f"{wins}/5 seeds ({'; '.join(details)})",
            started,
            budget_s=600,
        )


class TestErrorVsSamplesPlateau:
    def test_error_vs_j_plateau(self, spiral_runs, espro_simplexes):
        started = time.time()
        spec, runs = spiral_runs
        run, cx = runs[0], espro_simplexes[0]
        errors = {}
        for j in (25, 200):
            probs = ensemble.predict(
                cx, spec, run["test"].inputs,
                ensemble.EnsembleConfig(j_samples_per_simplex=j, seed=500),
            )
            errors[j] = 1.0 - float(
                np.mean(probs.argmax(axis=1) == run["test"].targets)
            )
        gap = abs(errors[25] - errors[200])
        _verdict(
            "error-vs-j-plateau",
            gap < 0.01,
            f"err(25)={errors[25]:.4f}, err(200)={errors[200]:.4f}, gap {gap:.4f}",
            started,
            budget_s=120,
        )


class TestDimensionalityProbe:
    def test_dimensionality_probe(self):
        started = time.time()
        spec = netcore.ModelSpec(PROBE_WIDTHS)
        config = datasets.SpiralsConfig(
            n_per_class=75, noise_sigma=0.01, seed=0, n_test_per_class=100
        )
        train, _ = datasets.gen_two_spirals(config)
        mode_config = opt.TrainConfig(lr=0.05, momentum=0.9, weight_decay=5e-4,
                                      epochs=400, batch_size=32, seed=600)
        w0, _ = opt.train_base(spec, train, mode_config)
        w1, _ = opt.train_base(
            spec, train,
            opt.TrainConfig(lr=0.05, momentum=0.9, weight_decay=5e-4,
                            epochs=400, batch_size=32, seed=601),
        )
        probe_config = spro.SproConfig(
            train=opt.TrainConfig(lr=0.05, momentum=0.9, weight_decay=0.0,
                                  epochs=150, batch_size=32, seed=602),
            h_samples=10,
        )
        result = spro.dimensionality_probe(
            spec, w0, w1, 12, train, probe_config,
            spro.RegSchedule(lambda_star=0.001),
        )
        small_k_positive = all(
            r.log_volume > NEG_INF for r in result.records[:2]
        )
        fired_or_none = result.collapse_at is None or result.collapse_at <= 12
        pre_collapse = [
            r for r in result.records
            if result.collapse_at is None or r.n_connectors < result.collapse_at
        ]
        pre_acc = min(r.sample_acc_min for r in pre_collapse)

        forced = spro.dimensionality_probe(
            spec, w0, w1, 5, train,
            spro.SproConfig(
                train=opt.TrainConfig(lr=0.0, momentum=0.0, weight_decay=0.0,
                                      epochs=1, batch_size=32, seed=603),
                jitter_sigma=0.0,
            ),
            spro.RegSchedule(lambda_star=0.01),
        )
        forced_immediate = (
            forced.collapse_at is not None
            and forced.collapse_at <= 2
            and forced.records[-1].log_volume == NEG_INF
        )
        ok = small_k_positive and fired_or_none and forced_immediate and pre_acc >= 0.95
        _verdict(
            "dimensionality-probe",
            ok,
            f"collapse_at={result.collapse_at}, "
            f"pre-collapse sampled acc min {pre_acc:.3f}, "
            f"forced collapse at {forced.collapse_at}",
            started,
            budget_s=600,
        )


class TestRegressionUncertainty:
    def test_regression_uncertainty(self):
        started = time.time()
        spec = netcore.ModelSpec(
            (1, 100, 1), activation="tanh", output_kind="scalar",
            loss_kind="gaussian_nll", noise_variance=0.1,
        )
        wins = 0
        ratios = []
        for seed in range(5):
            data = datasets.gen_regression_1d(
                datasets.RegressionTeacherConfig(points_per_interval=40, seed=seed)
            )
            x = data.grid_inputs[:, 0]
            gap = ((x > -5) & (x < -1)) | ((x > 1) & (x < 5))
            datr = (
                ((x >= -7) & (x <= -5)) | ((x >= -1) & (x <= 1))
                | ((x >= 5) & (x <= 7))
            )
            modes = {}
            for m in range(3):
                train_config = opt.TrainConfig(
                    lr=0.005, momentum=0.9, weight_decay=1e-4,
                    epochs=800, batch_size=32, seed=1000 * seed + m,
                )
                modes[f"w{m}"], _ = opt.train_base(spec, data.train, train_config)
            grow_config = spro.SproConfig(
                train=opt.TrainConfig(lr=0.005, momentum=0.9, weight_decay=0.0,
                                      epochs=150, batch_size=32, seed=2000 + seed)
            )
            cx, _ = spro.build_espro_complex(
                spec, modes, 2, data.train, grow_config,
                spro.RegSchedule(lambda_star=3.0),
            )
            prediction = ensemble.predict(
                cx, spec, data.grid_inputs,
                ensemble.EnsembleConfig(j_samples_per_simplex=25, seed=3000 + seed),
            )
            std = np.sqrt(prediction.function_variance)
            ratio = float(std[gap].mean() / std[datr].mean())
            ratios.append(ratio)
            wins += ratio >= 1.5

        noise_config = datasets.RegressionTeacherConfig(
            points_per_interval=4000, noise_sigma_sq=0.1, seed=9
        )
        noise_data = datasets.gen_regression_1d(noise_config)
        teacher_seq, _, _ = np.random.SeedSequence(noise_config.seed).spawn(3)
        teacher = datasets.teacher_spec(noise_config)
        teacher_params = netcore.init_params(teacher, np.random.default_rng(teacher_seq))
        clean = netcore.forward(teacher, teacher_params, noise_data.train.inputs)[:, 0]
        noise_var = float((noise_data.train.targets - clean).var())
        noise_ok = abs(noise_var - 0.1) <= 0.01
        _verdict(
            "regression-uncertainty",
            wins >= 4 and noise_ok,
            f"{wins}/5 seeds with gap/data std ratio >= 1.5 "
            f"({', '.join(f'{r:.2f}' for r in ratios)}); "
            f"noise variance {noise_var:.4f}",
            started,
            budget_s=600,
        )


class TestMetricsCriteria:
    def test_metrics(self, spiral_runs, espro_simplexes):
        started = time.time()
        spec, runs = spiral_runs
        rng = np.random.default_rng(99)

        n = 100_000
        conf = rng.uniform(0.5, 1.0, size=n)
        probs = np.column_stack([conf, 1.0 - conf])
        flips = rng.random(n) >= conf
        targets = flips.astype(np.int64)  # class 0 is the confident pick
        ece = metrics.evaluate(probs, targets).ece
        ece_ok = abs(ece) <= 0.01

        logits = rng.normal(scale=2.0, size=(50_000, 3))
        soft = metrics._softmax(logits)
        draw = np.array([rng.choice(3, p=p) for p in soft])
        scaler = metrics.fit_temperature(2.0 * logits, draw)
        t_ok = abs(scaler.T - 2.0) <= 0.05

        jensen_ok = True
        for run, cx in zip(runs, espro_simplexes):
            members = ensemble.sample_probabilities(
                cx, spec, run["test"].inputs,
                ensemble.EnsembleConfig(j_samples_per_simplex=25,
                                        seed=700 + run["seed"]),
            )
            ens_nll = metrics.nll_of_probs(members.mean(axis=0), run["test"].targets)
            member_mean = float(np.mean(
                [metrics.nll_of_probs(m, run["test"].targets) for m in members]
            ))
            if ens_nll > member_mean:
                jensen_ok = False

        ok = ece_ok and t_ok and jensen_ok
        _verdict(
            "metrics",
            ok,
            f"ECE {ece:.4f}, fitted T {scaler.T:.3f}, Jensen on 5 checkpoints "
            f"{'holds' if jensen_ok else 'violated'}",
            started,
            budget_s=120,
        )


class TestDeterminism:
    def test_cli_determinism(self, tmp_path):
        started = time.time()
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({
            "seed": 5,
            "out_dir": str(tmp_path / "unused"),
            "model": {"layer_widths": [2, 8, 8, 2]},
            "dataset": {"kind": "two_spirals", "n_per_class": 40,
                        "noise_sigma": 0.02, "n_test_per_class": 40},
            "train": {"lr": 0.05, "momentum": 0.9, "weight_decay": 1e-4,
                      "epochs": 50, "batch_size": 32},
            "spro": {"train": {"lr": 0.02, "momentum": 0.9, "weight_decay": 0.0,
                               "epochs": 8, "batch_size": 32}},
            "reg": {"lambda_star": 1.0},
            "ensemble": {"j_samples_per_simplex": 10},
        }))

        digests = []
        for label in ("x", "y"):
            base = tmp_path / label
            assert cli.main(["gen-data", "--config", str(config_path),
                             "--out", str(base / "data")]) == 0
            assert cli.main(["train-base", "--config", str(config_path),
                             "--out", str(base / "mode")]) == 0
            assert cli.main(["spro", "--config", str(config_path),
                             "--out", str(base / "cx"), "--mode", "espro",
                             "--k", "2",
                             "--modes", str(base / "mode" / "mode.json")]) == 0
            assert cli.main(["eval", "--config", str(config_path),
                             "--out", str(base / "eval"),
                             "--checkpoint", str(base / "cx" / "complex.json"),
                             "--j-sweep", "1,5"]) == 0
            assert cli.main(["surface", "--config", str(config_path),
                             "--out", str(base / "surf"),
                             "--checkpoint", str(base / "cx" / "complex.json"),
                             "--vertices", "w0,w0_theta0,w0_theta1",
                             "--resolution", "7"]) == 0
            science = []
            for sub in ("data", "mode", "cx", "eval", "surf"):
                for f in sorted((base / sub).iterdir()):
                    if f.name != "run.log":
                        science.append((f"{sub}/{f.name}", f.read_bytes()))
            digests.append(science)

        names_match = [n for n, _ in digests[0]] == [n for n, _ in digests[1]]
        bytes_match = all(a == b for (_, a), (_, b) in zip(*digests))
        _verdict(
            "cli-determinism",
            names_match and bytes_match,
            f"{len(digests[0])} artifacts byte-identical across reruns",
            started,
            budget_s=300,
        )
