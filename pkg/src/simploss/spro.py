"""Growing low-loss simplexes and complexes around trained modes.

A new connector vertex starts at the mean of the vertices it will
join (plus a tiny jitter so it sits off their affine hull) and is then
trained to minimize

    (1/H) sum_h L(D, phi_h)  -  lambda_j * log V(K),

where the phi_h are uniform draws from the simplexes incident to the
trainable vertex and V(K) is the complex volume.  The data term's
gradient reaches the vertex through the barycentric weights of each
draw; the volume term's gradient uses the hull-distance decomposition
V_k = V_{k-1} * h / k per incident simplex, which is exact and O(k*D)
instead of differentiating the determinant.

lambda_j is renormalized per vertex: lambda_j = lambda_star / log V of
a freshly jittered probe complex with the same structure, falling back
to lambda_star when that log-volume is not positive (desk-scale
volumes are often below 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import netcore, opt
from .geometry import (
    NEG_INF,
    DegenerateSimplexError,
    GeometryError,
    PointOnHullError,
    Simplex,
    SimplicialComplex,
    VertexStore,
    hull_distance_and_grad,
    log_complex_volume,
    log_simplex_volume,
    logsumexp,
    sample_uniform,
)

COLLAPSE_DROP = math.log(1e6)


@dataclass(frozen=True)
class RegSchedule:
    """Volume-regularization strength and its per-vertex normalization."""

    lambda_star: float = 1e-8
    probe_jitter_sigma: float = 1e-4

    def __post_init__(self) -> None:
        if self.lambda_star <= 0:
            raise ValueError("lambda_star must be > 0")
        if self.probe_jitter_sigma < 0:
            raise ValueError("probe_jitter_sigma must be >= 0")

    def to_dict(self) -> dict:
        return {
            "lambda_star": self.lambda_star,
            "probe_jitter_sigma": self.probe_jitter_sigma,
        }


@dataclass(frozen=True)
class SproConfig:
    """Connector-training knobs; ``train`` is the inner SGD recipe."""

    train: opt.TrainConfig = field(
        default_factory=lambda: opt.TrainConfig(
            lr=0.01, momentum=0.9, weight_decay=0.0, epochs=60, batch_size=32
        )
    )
    h_samples: int = 5
    jitter_sigma: float = 1e-4
    volume_grad_clip: float = 1.0
    sample_globally: bool = False

    def __post_init__(self) -> None:
        if self.h_samples < 1:
            raise ValueError("h_samples must be >= 1")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")
        if self.volume_grad_clip <= 0:
            raise ValueError("volume_grad_clip must be > 0")

    def to_dict(self) -> dict:
        return {
            "train": self.train.to_dict(),
            "h_samples": self.h_samples,
            "jitter_sigma": self.jitter_sigma,
            "volume_grad_clip": self.volume_grad_clip,
            "sample_globally": self.sample_globally,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SproConfig":
        data = dict(data)
        train = opt.TrainConfig.from_dict(data.pop("train"))
        return cls(train=train, **data)


@dataclass(frozen=True)
class ComplexSpec:
    """Declarative complex layout: which vertices form which simplexes.

    Connectors are created and trained in the listed order; every
    simplex may reference modes and connectors only from these lists.
    """

    modes: tuple[str, ...]
    connectors: tuple[str, ...]
    simplexes: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        declared = set(self.modes) | set(self.connectors)
        if len(declared) != len(self.modes) + len(self.connectors):
            raise ValueError("mode and connector ids must be distinct")
        for simplex in self.simplexes:
            unknown = set(simplex) - declared
            if unknown:
                raise ValueError(f"simplex references undeclared vertices {unknown}")
        for connector in self.connectors:
            if not any(connector in s for s in self.simplexes):
                raise ValueError(f"connector {connector!r} appears in no simplex")

    def to_dict(self) -> dict:
        return {
            "modes": list(self.modes),
            "connectors": list(self.connectors),
            "simplexes": [list(s) for s in self.simplexes],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ComplexSpec":
        return cls(
            modes=tuple(data["modes"]),
            connectors=tuple(data["connectors"]),
            simplexes=tuple(tuple(s) for s in data["simplexes"]),
        )


@dataclass
class RegularizedStep:
    data_loss: float
    log_volume: float
    volume_term: float
    grad: np.ndarray

    @property
    def objective(self) -> float:
        return self.data_loss + self.volume_term


@dataclass
class ProbeRecord:
    n_connectors: int
    log_volume: float
    sample_acc_mean: float
    sample_acc_min: float


@dataclass
class ProbeResult:
    records: list[ProbeRecord]
    collapse_at: int | None

    @property
    def dimension_lower_bound(self) -> int | None:
        if self.collapse_at is None:
            return None
        return self.collapse_at - 1


def incident_vertices(complex_: SimplicialComplex, vertex_id: str) -> list[str]:
    """Other vertices sharing at least one simplex, in first-seen order."""
    seen: list[str] = []
    for index in complex_.simplexes_with(vertex_id):
        for vid in complex_.simplexes[index].vertex_ids:
            if vid != vertex_id and vid not in seen:
                seen.append(vid)
    return seen


def init_connector(
    complex_: SimplicialComplex,
    new_id: str,
    incident_vertex_ids: list[str],
    rng: np.random.Generator,
    jitter_sigma: float,
) -> VertexStore:
    """Place a new trainable vertex at the jittered mean of its neighbors.

    The jitter is isotropic Gaussian with std jitter_sigma * RMS(mean),
    which keeps the hull distance nonzero (almost surely) so the
    log-volume is finite at step zero.
    """
    if not incident_vertex_ids:
        raise GeometryError("connector needs at least one incident vertex")
    mean = complex_.store.matrix(incident_vertex_ids).mean(axis=0)
    scale = jitter_sigma * float(np.sqrt(np.mean(mean**2)))
    values = mean + rng.normal(size=mean.shape) * scale
    complex_.store.add(new_id, values, role="connector", trainable=True)
    return complex_.store


def compute_lambda(reg: RegSchedule, probe_complex: SimplicialComplex) -> float:
    """Per-vertex regularization weight lambda_star / log V(probe).

    Falls back to lambda_star when the probe's log-volume is not
    positive; a degenerate probe (no volume at all) is an error.
    """
    log_v = log_complex_volume(probe_complex)
    if log_v == NEG_INF:
        raise DegenerateSimplexError("probe complex has zero volume")
    if log_v <= 0.0:
        return reg.lambda_star
    return reg.lambda_star / log_v


def _probe_lambda(
    complex_: SimplicialComplex,
    trainable_id: str,
    reg: RegSchedule,
    rng: np.random.Generator,
) -> float:
    """Build the randomly re-initialized probe of the same structure."""
    probe = SimplicialComplex(complex_.store.copy(), list(complex_.simplexes))
    neighbors = incident_vertices(probe, trainable_id)
    mean = probe.store.matrix(neighbors).mean(axis=0)
    scale = reg.probe_jitter_sigma * float(np.sqrt(np.mean(mean**2)))
    probe.store.set_values(trainable_id, mean + rng.normal(size=mean.shape) * scale)
    return compute_lambda(reg, probe)


def regularized_loss_and_grad(
    complex_: SimplicialComplex,
    trainable_id: str,
    batch: netcore.Batch,
    spec: netcore.ModelSpec,
    h_samples: int,
    lambda_j: float,
    rng: np.random.Generator,
    volume_grad_clip: float = math.inf,
    sample_globally: bool = False,
) -> RegularizedStep:
    """One stochastic evaluation of the volume-regularized objective.

    Loss samples are drawn round-robin from the simplexes incident to
    the trainable vertex (or from the whole complex when
    ``sample_globally``); each draw's gradient reaches the vertex
    scaled by its barycentric weight.  The volume gradient aggregates
    the per-simplex hull-distance gradients weighted by each simplex's
    share of the total volume, and its norm is clipped.
    """
    incident = complex_.simplexes_with(trainable_id)
    if not incident:
        raise GeometryError(f"{trainable_id!r} belongs to no simplex")
    pool = list(range(len(complex_.simplexes))) if sample_globally else incident
    theta = complex_.store.values(trainable_id)

    data_loss = 0.0
    data_grad = np.zeros_like(theta)
    for h in range(h_samples):
        simplex = complex_.simplexes[pool[h % len(pool)]]
        point, weights = sample_uniform(simplex, complex_.store, rng)
        loss, grad_phi = netcore.loss_and_grad(spec, point, batch)
        data_loss += loss / h_samples
        if trainable_id in simplex:
            b_h = weights[simplex.vertex_ids.index(trainable_id)]
            data_grad += (b_h / h_samples) * grad_phi

    log_vols = [
        log_simplex_volume(s, complex_.store)[0] if s.dim >= 1 else NEG_INF
        for s in complex_.simplexes
    ]
    log_volume = logsumexp(log_vols)

    if lambda_j == 0.0:
        return RegularizedStep(data_loss, log_volume, 0.0, data_grad)

    grad_log_v = np.zeros_like(theta)
    any_alive = False
    for index in incident:
        simplex = complex_.simplexes[index]
        if simplex.dim < 1 or log_vols[index] == NEG_INF:
            continue
        base_ids = [v for v in simplex.vertex_ids if v != trainable_id]
        try:
            _, grad_s = hull_distance_and_grad(theta, complex_.store.matrix(base_ids))
        except (PointOnHullError, DegenerateSimplexError):
            continue
        any_alive = True
        grad_log_v += math.exp(log_vols[index] - log_volume) * grad_s
    if not any_alive:
        raise DegenerateSimplexError(
            f"all simplexes incident to {trainable_id!r} are degenerate"
        )

    volume_grad = -lambda_j * grad_log_v
    norm = float(np.linalg.norm(volume_grad))
    if norm > volume_grad_clip:
        volume_grad *= volume_grad_clip / norm
    return RegularizedStep(
        data_loss, log_volume, -lambda_j * log_volume, data_grad + volume_grad
    )


def train_connector(
    complex_: SimplicialComplex,
    trainable_id: str,
    dataset: netcore.Batch,
    spec: netcore.ModelSpec,
    config: SproConfig,
    reg: RegSchedule,
    seed: int | None = None,
) -> list[dict]:
    """Train one connector vertex in place, all other vertices frozen.

    Returns per-epoch history records with the mean sampled data loss,
    the complex log-volume at epoch end, and the lambda used.
    """
    if trainable_id not in complex_.store:
        raise GeometryError(f"unknown vertex {trainable_id!r}")
    train_cfg = config.train
    root = np.random.SeedSequence(train_cfg.seed if seed is None else seed)
    probe_seq, shuffle_seq, sample_seq = root.spawn(3)
    lambda_j = _probe_lambda(
        complex_, trainable_id, reg, np.random.default_rng(probe_seq)
    )
    shuffle_rng = np.random.default_rng(shuffle_seq)
    sample_rng = np.random.default_rng(sample_seq)

    params = complex_.store.values(trainable_id).copy()
    velocity = np.zeros_like(params)
    n = dataset.size
    steps_per_epoch = len(range(0, n, min(train_cfg.batch_size, n)))
    total_steps = train_cfg.epochs * steps_per_epoch
    history: list[dict] = []
    step = 0
    for epoch in range(train_cfg.epochs):
        losses = []
        for idx in opt.iter_batches(n, train_cfg.batch_size, shuffle_rng):
            batch = netcore.Batch(dataset.inputs[idx], dataset.targets[idx])
            result = regularized_loss_and_grad(
                complex_,
                trainable_id,
                batch,
                spec,
                config.h_samples,
                lambda_j,
                sample_rng,
                volume_grad_clip=config.volume_grad_clip,
                sample_globally=config.sample_globally,
            )
            if not np.isfinite(result.objective):
                raise opt.DivergenceError(
                    f"non-finite objective at epoch {epoch}, step {step}"
                )
            grad = result.grad + train_cfg.weight_decay * params
            velocity = train_cfg.momentum * velocity + grad
            params = params - opt.lr_at(train_cfg, step, total_steps) * velocity
            complex_.store.set_values(trainable_id, params)
            losses.append(result.data_loss)
            step += 1
        history.append(
            {
                "epoch": epoch,
                "data_loss": float(np.mean(losses)),
                "log_volume": float(log_complex_volume(complex_)),
                "lambda": lambda_j,
            }
        )
    return history


def build_espro_simplex(
    spec: netcore.ModelSpec,
    mode_values: np.ndarray,
    k: int,
    dataset: netcore.Batch,
    config: SproConfig,
    reg: RegSchedule | None = None,
    mode_id: str = "w0",
    seed: int | None = None,
) -> tuple[SimplicialComplex, dict[str, list[dict]]]:
    """Grow a single k-simplex of low loss out of one trained mode.

    Vertices are added and trained one at a time; each gets a fresh
    lambda from the probe normalization.  k=0 returns the bare mode (a
    deep-ensemble component).
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    reg = reg or RegSchedule()
    base_seed = config.train.seed if seed is None else seed
    store = VertexStore()
    store.add(mode_id, mode_values, role="mode", trainable=False)
    complex_ = SimplicialComplex(store, [Simplex((mode_id,))])
    ids = [mode_id]
    histories: dict[str, list[dict]] = {}
    for j in range(k):
        new_id = f"theta{j}"
        vertex_seq = np.random.SeedSequence([base_seed, j])
        jitter_seq, train_seq = vertex_seq.spawn(2)
        init_connector(
            complex_, new_id, list(ids), np.random.default_rng(jitter_seq), config.jitter_sigma
        )
        ids.append(new_id)
        complex_.simplexes = [Simplex(tuple(ids))]
        histories[new_id] = train_connector(
            complex_,
            new_id,
            dataset,
            spec,
            config,
            reg,
            seed=int(train_seq.generate_state(1)[0]),
        )
    return complex_, histories


def build_espro_complex(
    spec: netcore.ModelSpec,
    modes: dict[str, np.ndarray],
    k: int,
    dataset: netcore.Batch,
    config: SproConfig,
    reg: RegSchedule | None = None,
    seed: int | None = None,
) -> tuple[SimplicialComplex, dict[str, list[dict]]]:
    """Grow one k-simplex per independently trained mode.

    The result is a complex of disjoint simplexes sharing one store;
    sampling it with a per-simplex quota is the multi-simplex ensemble.
    """
    reg = reg or RegSchedule()
    base_seed = config.train.seed if seed is None else seed
    store = VertexStore()
    merged = SimplicialComplex(store)
    histories: dict[str, list[dict]] = {}
    for index, (mode_id, values) in enumerate(modes.items()):
        sub, sub_hist = build_espro_simplex(
            spec,
            values,
            k,
            dataset,
            config,
            reg,
            mode_id=mode_id,
            seed=int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0]),
        )
        renamed = []
        for vid in sub.simplexes[0].vertex_ids:
            vertex = sub.store.vertex(vid)
            new_id = vid if vid == mode_id else f"{mode_id}_{vid}"
            store.add(new_id, vertex.values, vertex.role, vertex.trainable)
            renamed.append(new_id)
            if vid != mode_id:
                histories[new_id] = sub_hist[vid]
        merged.add_simplex(tuple(renamed))
    return merged, histories


def build_connecting_complex(
    spec: netcore.ModelSpec,
    modes: dict[str, np.ndarray],
    layout: ComplexSpec,
    dataset: netcore.Batch,
    config: SproConfig,
    reg: RegSchedule | None = None,
    seed: int | None = None,
) -> tuple[SimplicialComplex, dict[str, list[dict]]]:
    """Train the connectors of a declared multi-simplex layout.

    Connectors are trained in the declared order; while training each
    one, only the simplexes whose vertices all exist yet are active.
    """
    missing = set(layout.modes) - set(modes)
    if missing:
        raise ValueError(f"missing mode parameter vectors for {sorted(missing)}")
    reg = reg or RegSchedule()
    base_seed = config.train.seed if seed is None else seed
    store = VertexStore()
    for mode_id in layout.modes:
        store.add(mode_id, modes[mode_id], role="mode", trainable=False)
    complex_ = SimplicialComplex(store)
    placed = set(layout.modes)
    histories: dict[str, list[dict]] = {}

    def active_simplexes(extra: set[str]) -> list[Simplex]:
        # every declared simplex restricted to the vertices placed so
        # far, deduplicated; later connectors extend these restrictions
        ready = placed | extra
        seen: set[tuple[str, ...]] = set()
        result = []
        for vertex_ids in layout.simplexes:
            sub = tuple(v for v in vertex_ids if v in ready)
            if sub and sub not in seen:
                seen.add(sub)
                result.append(Simplex(sub))
        return result

    for j, connector in enumerate(layout.connectors):
        incident = []
        for simplex in layout.simplexes:
            if connector in simplex:
                incident.extend(v for v in simplex if v in placed and v not in incident)
        if not incident:
            raise GeometryError(f"connector {connector!r} has no placed neighbors")
        vertex_seq = np.random.SeedSequence([base_seed, j])
        jitter_seq, train_seq = vertex_seq.spawn(2)
        init_connector(
            complex_, connector, incident, np.random.default_rng(jitter_seq), config.jitter_sigma
        )
        complex_.simplexes = active_simplexes({connector})
        histories[connector] = train_connector(
            complex_,
            connector,
            dataset,
            spec,
            config,
            reg,
            seed=int(train_seq.generate_state(1)[0]),
        )
        placed.add(connector)

    complex_.simplexes = [Simplex(s) for s in layout.simplexes]
    if not complex_.simplexes:
        complex_.simplexes = [Simplex((m,)) for m in layout.modes]
    return complex_, histories


def dimensionality_probe(
    spec: netcore.ModelSpec,
    w0: np.ndarray,
    w1: np.ndarray,
    max_k: int,
    dataset: netcore.Batch,
    config: SproConfig,
    reg: RegSchedule | None = None,
    seed: int | None = None,
    eval_samples: int = 10,
) -> ProbeResult:
    """Grow a two-mode connecting complex until its volume collapses.

    After each new connector the complex log-volume and sampled train
    accuracies are recorded.  Collapse is declared when the log-volume
    drops more than log(1e6) below its running maximum (or becomes
    -inf / untrainable); the number of connectors at collapse minus one
    lower-bounds the low-loss manifold dimension.
    """
    if max_k < 1:
        raise ValueError("max_k must be >= 1")
    reg = reg or RegSchedule()
    base_seed = config.train.seed if seed is None else seed
    store = VertexStore()
    store.add("w0", w0, role="mode", trainable=False)
    store.add("w1", w1, role="mode", trainable=False)
    complex_ = SimplicialComplex(store)
    connectors: list[str] = []
    records: list[ProbeRecord] = []
    running_max = NEG_INF
    collapse_at: int | None = None
    for j in range(max_k):
        new_id = f"theta{j}"
        vertex_seq = np.random.SeedSequence([base_seed, j])
        jitter_seq, train_seq, eval_seq = vertex_seq.spawn(3)
        incident = ["w0", "w1", *connectors]
        init_connector(
            complex_, new_id, incident, np.random.default_rng(jitter_seq), config.jitter_sigma
        )
        connectors.append(new_id)
        complex_.simplexes = [
            Simplex(("w0", *connectors)),
            Simplex(("w1", *connectors)),
        ]
        try:
            train_connector(
                complex_,
                new_id,
                dataset,
                spec,
                config,
                reg,
                seed=int(train_seq.generate_state(1)[0]),
            )
            log_volume = log_complex_volume(complex_)
        except (DegenerateSimplexError, PointOnHullError):
            log_volume = NEG_INF
        eval_rng = np.random.default_rng(eval_seq)
        accs = []
        for _ in range(eval_samples):
            simplex = complex_.simplexes[len(accs) % 2]
            point, _ = sample_uniform(simplex, complex_.store, eval_rng)
            accs.append(netcore.accuracy(spec, point, dataset))
        records.append(
            ProbeRecord(
                n_connectors=j + 1,
                log_volume=float(log_volume),
                sample_acc_mean=float(np.mean(accs)),
                sample_acc_min=float(np.min(accs)),
            )
        )
        if log_volume == NEG_INF or log_volume < running_max - COLLAPSE_DROP:
            collapse_at = j + 1
            break
        running_max = max(running_max, log_volume)
    return ProbeResult(records, collapse_at)


def polyline_losses(
    spec: netcore.ModelSpec,
    batch: netcore.Batch,
    waypoints: list[np.ndarray],
    n_points: int = 50,
) -> np.ndarray:
    """Full-batch losses at evenly spaced points along a polyline.

    Points are spaced by arc length over the whole chain (endpoints
    included), so a two-leg path and a straight segment are compared on
    equal footing.
    """
    if len(waypoints) < 2:
        raise ValueError("need at least two waypoints")
    if n_points < 2:
        raise ValueError("need at least two evaluation points")
    points = [np.asarray(w, dtype=np.float64) for w in waypoints]
    lengths = [
        float(np.linalg.norm(b - a)) for a, b in zip(points[:-1], points[1:])
    ]
    total = sum(lengths)
    if total == 0.0:
        raise ValueError("polyline has zero length")
    cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
    losses = np.empty(n_points)
    for i, t in enumerate(np.linspace(0.0, total, n_points)):
        seg = min(np.searchsorted(cumulative, t, side="right") - 1, len(lengths) - 1)
        seg_len = lengths[seg] if lengths[seg] > 0 else 1.0
        frac = (t - cumulative[seg]) / seg_len
        vec = points[seg] + frac * (points[seg + 1] - points[seg])
        losses[i] = netcore.batch_loss(spec, vec, batch)
    return losses
