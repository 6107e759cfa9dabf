"""Loss evaluation on the plane through three parameter vectors.

The plane is centered at the mean of the points with a Gram-Schmidt
orthonormal basis (u along p1-p0, v the orthogonalized p2-p0), and the
loss is sampled on a square grid w = c + r_u * u + r_v * v with both
coordinates ranging over [-R, R].  R is the largest in-plane coordinate
magnitude of the defining points times a margin, so all three always
fall inside the plot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import netcore

SCHEMA_VERSION = 1


class SurfaceError(ValueError):
    """Invalid plane construction or grid request."""


@dataclass
class PlaneBasis:
    center: np.ndarray
    u: np.ndarray
    v: np.ndarray
    radius: float  # coordinate range R

    def point_at(self, r_u: float, r_v: float) -> np.ndarray:
        return self.center + r_u * self.u + r_v * self.v


@dataclass
class Marker:
    label: str
    r_u: float
    r_v: float


@dataclass
class SurfaceGrid:
    basis: PlaneBasis
    r_u: np.ndarray  # (resolution,) column coordinates
    r_v: np.ndarray  # (resolution,) row coordinates
    losses: np.ndarray  # (resolution, resolution), rows indexed by r_v
    markers: list[Marker] = field(default_factory=list)


def plane_basis(
    p0: np.ndarray, p1: np.ndarray, p2: np.ndarray, margin: float = 1.2
) -> PlaneBasis:
    """Orthonormal in-plane basis through three parameter vectors."""
    p0, p1, p2 = (np.asarray(p, dtype=np.float64).reshape(-1) for p in (p0, p1, p2))
    if not (p0.size == p1.size == p2.size):
        raise SurfaceError("points must share one dimension")
    if margin <= 0:
        raise SurfaceError("margin must be > 0")
    center = (p0 + p1 + p2) / 3.0
    first = p1 - p0
    norm_first = np.linalg.norm(first)
    if norm_first == 0.0:
        raise SurfaceError("p0 and p1 coincide")
    u = first / norm_first
    second = p2 - p0
    second = second - (second @ u) * u
    norm_second = np.linalg.norm(second)
    if norm_second < 1e-12 * max(1.0, np.linalg.norm(p2 - p0)):
        raise SurfaceError("points are collinear; no plane defined")
    v = second / norm_second
    coords = [
        (float((p - center) @ u), float((p - center) @ v)) for p in (p0, p1, p2)
    ]
    extent = max(max(abs(a), abs(b)) for a, b in coords)
    return PlaneBasis(center, u, v, margin * extent)


def project(basis: PlaneBasis, p: np.ndarray) -> tuple[float, float, float]:
    """In-plane coordinates of p and the out-of-plane residual norm."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if p.size != basis.center.size:
        raise SurfaceError("dimension mismatch")
    offset = p - basis.center
    r_u = float(offset @ basis.u)
    r_v = float(offset @ basis.v)
    residual = offset - r_u * basis.u - r_v * basis.v
    return r_u, r_v, float(np.linalg.norm(residual))


def grid_losses(
    basis: PlaneBasis,
    resolution: int,
    spec: netcore.ModelSpec,
    dataset: netcore.Batch,
    markers: list[Marker] | None = None,
) -> SurfaceGrid:
    """Full-dataset loss at every point of the [-R, R]^2 grid."""
    if resolution < 2:
        raise SurfaceError("resolution must be >= 2")
    coords = np.linspace(-basis.radius, basis.radius, resolution)
    losses = np.empty((resolution, resolution))
    for i, r_v in enumerate(coords):
        for j, r_u in enumerate(coords):
            losses[i, j] = netcore.batch_loss(spec, basis.point_at(r_u, r_v), dataset)
    return SurfaceGrid(basis, coords.copy(), coords.copy(), losses, markers or [])


def save_surface(grid: SurfaceGrid, csv_path: str | Path) -> Path:
    """Write the loss grid CSV plus a JSON sidecar next to it.

    CSV layout: first cell names the axes, the first row holds the r_u
    coordinates, and each following row starts with its r_v coordinate.
    The sidecar (same stem, .json) carries schema version, range, and
    marker coordinates.
    """
    csv_path = Path(csv_path)
    header = ["r_v\\r_u"] + [repr(float(c)) for c in grid.r_u]
    lines = [",".join(header)]
    for i, r_v in enumerate(grid.r_v):
        row = [repr(float(r_v))] + [repr(float(x)) for x in grid.losses[i]]
        lines.append(",".join(row))
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "kind": "surface_grid",
        "resolution": int(grid.losses.shape[0]),
        "radius": float(grid.basis.radius),
        "markers": [
            {"label": m.label, "r_u": m.r_u, "r_v": m.r_v} for m in grid.markers
        ],
    }
    sidecar_path = csv_path.with_suffix(".json")
    sidecar_path.write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return sidecar_path
