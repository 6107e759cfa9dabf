"""Exact simplex geometry on flat parameter vectors.

Simplexes are stored as ordered vertex-id tuples over a shared
:class:`VertexStore`; a k-simplex has k+1 vertices.  Volumes come from
Cayley-Menger determinants on pairwise squared distances:

    V(S)^2 = (-1)^(k+1) / ((k!)^2 2^k) * det(B),

where B is the (k+2)x(k+2) bordered matrix whose upper-left block holds
the squared distances (zero diagonal), bordered by ones with a zero
corner.  Distances are max-normalized before the determinant and the
scale is restored in log space, so volumes of tiny or huge simplexes in
high dimension stay representable.

Uniform sampling uses the exponential trick: draw y_i ~ Exp(1), set
w_i = y_i / sum(y), and return sum_i w_i v_i.  This is exactly uniform
on any non-degenerate simplex (the barycentric map is affine); samples
from a whole complex use a fixed per-simplex quota.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

NEG_INF = float("-inf")

# Normalized squared volume below this is treated as exactly degenerate.
VOLUME_UNDERFLOW_FLOOR = 1e-300

VertexRole = str  # "mode" | "connector"


class GeometryError(ValueError):
    """Base class for simplex geometry failures."""


class DegenerateSimplexError(GeometryError):
    """Vertices are affinely dependent where independence is required."""


class PointOnHullError(GeometryError):
    """A point sits (numerically) on the affine hull of its base."""


@dataclass
class Vertex:
    values: np.ndarray
    role: VertexRole = "connector"
    trainable: bool = False


class VertexStore:
    """Shared vertex storage; all vertices have one common dimension."""

    def __init__(self) -> None:
        self._vertices: dict[str, Vertex] = {}
        self._dim: int | None = None

    @property
    def dimension(self) -> int:
        if self._dim is None:
            raise GeometryError("store is empty; dimension undefined")
        return self._dim

    def ids(self) -> list[str]:
        return list(self._vertices)

    def __contains__(self, vertex_id: str) -> bool:
        return vertex_id in self._vertices

    def __len__(self) -> int:
        return len(self._vertices)

    def add(
        self,
        vertex_id: str,
        values: Sequence[float] | np.ndarray,
        role: VertexRole = "connector",
        trainable: bool = False,
    ) -> None:
        if vertex_id in self._vertices:
            raise GeometryError(f"duplicate vertex id {vertex_id!r}")
        if role not in ("mode", "connector"):
            raise GeometryError(f"unknown vertex role {role!r}")
        arr = np.asarray(values, dtype=np.float64).reshape(-1).copy()
        if not np.isfinite(arr).all():
            raise GeometryError(f"vertex {vertex_id!r} has non-finite entries")
        if self._dim is None:
            self._dim = arr.size
        elif arr.size != self._dim:
            raise GeometryError(
                f"vertex {vertex_id!r} has dimension {arr.size}, store has {self._dim}"
            )
        self._vertices[vertex_id] = Vertex(arr, role, trainable)

    def vertex(self, vertex_id: str) -> Vertex:
        try:
            return self._vertices[vertex_id]
        except KeyError:
            raise GeometryError(f"unknown vertex id {vertex_id!r}") from None

    def values(self, vertex_id: str) -> np.ndarray:
        return self.vertex(vertex_id).values

    def set_values(self, vertex_id: str, values: np.ndarray) -> None:
        arr = np.asarray(values, dtype=np.float64).reshape(-1)
        if arr.size != self.dimension:
            raise GeometryError("dimension mismatch in set_values")
        if not np.isfinite(arr).all():
            raise GeometryError(f"vertex {vertex_id!r} update has non-finite entries")
        self._vertices[vertex_id].values = arr.copy()

    def matrix(self, vertex_ids: Iterable[str]) -> np.ndarray:
        """Stack the named vertices as rows of an (m, D) array."""
        return np.stack([self.values(v) for v in vertex_ids])

    def copy(self) -> "VertexStore":
        dup = VertexStore()
        for vid, vert in self._vertices.items():
            dup.add(vid, vert.values, vert.role, vert.trainable)
        return dup


@dataclass(frozen=True)
class Simplex:
    """An ordered list of k+1 distinct vertex ids (a k-simplex)."""

    vertex_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.vertex_ids) == 0:
            raise GeometryError("simplex needs at least one vertex")
        if len(set(self.vertex_ids)) != len(self.vertex_ids):
            raise GeometryError(f"duplicate vertex ids in simplex {self.vertex_ids}")

    @property
    def dim(self) -> int:
        return len(self.vertex_ids) - 1

    def __contains__(self, vertex_id: str) -> bool:
        return vertex_id in self.vertex_ids


@dataclass
class SimplicialComplex:
    """A collection of simplexes over one shared vertex store."""

    store: VertexStore
    simplexes: list[Simplex] = field(default_factory=list)

    def add_simplex(self, vertex_ids: Sequence[str]) -> Simplex:
        simplex = Simplex(tuple(vertex_ids))
        for vid in simplex.vertex_ids:
            if vid not in self.store:
                raise GeometryError(f"simplex references unknown vertex {vid!r}")
        self.simplexes.append(simplex)
        return simplex

    def simplexes_with(self, vertex_id: str) -> list[int]:
        """Indices of the simplexes incident to a vertex."""
        return [i for i, s in enumerate(self.simplexes) if vertex_id in s]

    def validate(self) -> None:
        for s in self.simplexes:
            for vid in s.vertex_ids:
                if vid not in self.store:
                    raise GeometryError(f"simplex references unknown vertex {vid!r}")

    def copy(self) -> "SimplicialComplex":
        return SimplicialComplex(self.store.copy(), list(self.simplexes))


class ComplexSample(NamedTuple):
    point: np.ndarray
    simplex_index: int
    weights: np.ndarray


def _pairwise_sq_distances(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise GeometryError("expected an (m, D) vertex matrix")
    m = points.shape[0]
    out = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            diff = points[i] - points[j]
            out[i, j] = out[j, i] = float(diff @ diff)
    return out


def pairwise_sq_distances(simplex: Simplex, store: VertexStore) -> np.ndarray:
    """Symmetric matrix of squared Euclidean distances between vertices."""
    return _pairwise_sq_distances(store.matrix(simplex.vertex_ids))


def _log_volume_from_sq_distances(d2: np.ndarray) -> tuple[float, bool]:
    k = d2.shape[0] - 1
    if k == 0:
        return 0.0, True
    max_d2 = float(d2.max())
    if max_d2 == 0.0:
        return NEG_INF, False
    scaled = d2 / max_d2
    bordered = np.ones((k + 2, k + 2))
    bordered[: k + 1, : k + 1] = scaled
    np.fill_diagonal(bordered[: k + 1, : k + 1], 0.0)
    bordered[k + 1, k + 1] = 0.0
    sign, log_abs_det = np.linalg.slogdet(bordered)
    expected_sign = 1.0 if (k + 1) % 2 == 0 else -1.0
    if sign == 0.0 or sign != expected_sign:
        return NEG_INF, False
    # log V^2 of the max-normalized simplex; then restore the scale:
    # lengths were divided by sqrt(max_d2), so V scales by max_d2^(k/2).
    log_v2_scaled = log_abs_det - 2.0 * math.lgamma(k + 1) - k * math.log(2.0)
    if log_v2_scaled <= math.log(VOLUME_UNDERFLOW_FLOOR):
        return NEG_INF, False
    return 0.5 * log_v2_scaled + 0.5 * k * math.log(max_d2), True


def log_volume_of_points(points: np.ndarray) -> tuple[float, bool]:
    """Cayley-Menger log-volume of the simplex spanned by the given rows.

    Returns ``(log_volume, sign_valid)``.  A 0-simplex has volume 1 by
    convention (log 0).  Degenerate simplexes return ``(-inf, False)``.
    """
    points = np.asarray(points, dtype=np.float64)
    if not np.isfinite(points).all():
        raise GeometryError("non-finite vertex entries")
    return _log_volume_from_sq_distances(_pairwise_sq_distances(points))


def log_simplex_volume(simplex: Simplex, store: VertexStore) -> tuple[float, bool]:
    """Log-volume of a stored simplex via the Cayley-Menger determinant."""
    return log_volume_of_points(store.matrix(simplex.vertex_ids))


def logsumexp(values: Sequence[float]) -> float:
    finite = [v for v in values if v > NEG_INF]
    if not finite:
        return NEG_INF
    top = max(finite)
    return top + math.log(sum(math.exp(v - top) for v in finite))


def log_complex_volume(complex_: SimplicialComplex) -> float:
    """Log of the summed volumes of a complex's components.

    Point simplexes (k=0) carry no measure and contribute zero to the
    sum, so a complex of bare modes has zero volume even though each
    mode's own log_simplex_volume is 0 by convention.
    """
    if not complex_.simplexes:
        raise GeometryError("complex has no simplexes")
    logs = [
        log_simplex_volume(s, complex_.store)[0]
        for s in complex_.simplexes
        if s.dim >= 1
    ]
    return logsumexp(logs)


def hull_distance_and_grad(
    theta: np.ndarray,
    base_vertices: np.ndarray,
    min_distance: float = 1e-12,
) -> tuple[float, np.ndarray]:
    """Distance from ``theta`` to the affine hull of the base vertices.

    Uses the recursion V_k = V_{k-1} * h / k: the log-volume of the
    simplex (theta, base) differs from the base's by log h - log k, so
    grad_theta log V = (theta - proj(theta)) / h^2, which is what this
    returns alongside h.

    Raises :class:`DegenerateSimplexError` when the base is affinely
    dependent and :class:`PointOnHullError` when h falls below
    ``min_distance`` (the caller should re-jitter).
    """
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    base = np.asarray(base_vertices, dtype=np.float64)
    if base.ndim != 2 or base.shape[1] != theta.size:
        raise GeometryError("base vertices must be (m, D) matching theta")
    if not (np.isfinite(theta).all() and np.isfinite(base).all()):
        raise GeometryError("non-finite vertex entries")
    log_v_base, ok = log_volume_of_points(base)
    if not ok and base.shape[0] > 1:
        raise DegenerateSimplexError("base vertices are affinely dependent")
    residual = theta - base[0]
    if base.shape[0] > 1:
        spanning = (base[1:] - base[0]).T  # (D, m-1)
        coeffs, *_ = np.linalg.lstsq(spanning, residual, rcond=None)
        residual = residual - spanning @ coeffs
    h = float(np.linalg.norm(residual))
    if h < min_distance:
        raise PointOnHullError(
            f"hull distance {h:.3e} below floor {min_distance:.3e}"
        )
    return h, residual / (h * h)


def sample_uniform(
    simplex: Simplex, store: VertexStore, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw one point uniformly from a simplex.

    Returns the point and its barycentric weights (normalized iid
    Exp(1) draws, one per vertex); the weights feed the chain rule when
    differentiating through the sampled point.
    """
    vertices = store.matrix(simplex.vertex_ids)
    draws = rng.exponential(1.0, size=vertices.shape[0])
    weights = draws / draws.sum()
    return weights @ vertices, weights


def sample_from_complex(
    complex_: SimplicialComplex,
    rng: np.random.Generator,
    per_simplex_count: int,
) -> list[ComplexSample]:
    """Draw a fixed quota of uniform samples from every simplex."""
    if per_simplex_count < 1:
        raise GeometryError("per_simplex_count must be >= 1")
    if not complex_.simplexes:
        raise GeometryError("cannot sample from an empty complex")
    samples: list[ComplexSample] = []
    for index, simplex in enumerate(complex_.simplexes):
        for _ in range(per_simplex_count):
            point, weights = sample_uniform(simplex, complex_.store, rng)
            samples.append(ComplexSample(point, index, weights))
    return samples
