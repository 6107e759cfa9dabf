"""The five figure kinds and their input-file schemas.

contour            surface grid CSV (+ JSON sidecar) -> filled log-loss
                   contours with the defining vertices marked
volume_curve       probe CSV (k,log_volume,...) -> log-volume vs k
decision_boundary  boundary CSV (x0,x1,sample*) -> per-sample class maps
error_curve        two-column CSV (e.g. j,test_error) -> line plot
uncertainty_band   predictions CSV (id,x,mean,var_f,var_y) -> mean with
                   2-sigma bands for the noise-free and noisy outputs

Rendering is deterministic for a given style version: identical inputs
produce identical image bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

STYLE_VERSION = 1
SUPPORTED_SIDECAR_VERSIONS = (1,)
KINDS = (
    "contour",
    "volume_curve",
    "decision_boundary",
    "error_curve",
    "uncertainty_band",
)

_RC = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.titlesize": 10,
    "svg.hashsalt": "plotkit",
}


class SchemaError(ValueError):
    """Input file does not match the declared kind's schema."""


@dataclass
class FigureRequest:
    kind: str
    input_path: str | Path
    output_path: str | Path
    sidecar_path: str | Path | None = None  # contour only; default: stem + .json
    overlay_path: str | Path | None = None  # uncertainty_band: train CSV points
    log_loss: bool = True  # contour color scale
    max_panels: int = 4  # decision_boundary panel cap

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}")


def _read_lines(path: str | Path) -> list[str]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"no such input file: {path}")
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line]
    if not lines:
        raise SchemaError(f"{path}: empty file")
    return lines


def _floats(cells: list[str], path, line_no) -> list[float]:
    try:
        return [float(c) for c in cells]
    except ValueError as err:
        raise SchemaError(f"{path}: line {line_no}: {err}") from err


def _save(fig, output_path: str | Path) -> None:
    fig.savefig(
        output_path,
        metadata={"Software": f"plotkit style {STYLE_VERSION}"},
    )
    plt.close(fig)


def _load_surface(path: str | Path, sidecar_path: str | Path | None):
    lines = _read_lines(path)
    header = lines[0].split(",")
    if header[0] != "r_v\\r_u":
        raise SchemaError(f"{path}: not a surface grid (header {header[0]!r})")
    r_u = np.array(_floats(header[1:], path, 1))
    r_v = []
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != r_u.size + 1:
            raise SchemaError(f"{path}: line {i}: expected {r_u.size + 1} cells")
        values = _floats(cells, path, i)
        r_v.append(values[0])
        rows.append(values[1:])
    sidecar = Path(sidecar_path) if sidecar_path else Path(path).with_suffix(".json")
    markers = []
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        if meta.get("schema_version") not in SUPPORTED_SIDECAR_VERSIONS:
            raise SchemaError(
                f"{sidecar}: unsupported schema version "
                f"{meta.get('schema_version')!r}"
            )
        markers = meta.get("markers", [])
    return r_u, np.array(r_v), np.array(rows), markers


def _render_contour(request: FigureRequest):
    r_u, r_v, losses, markers = _load_surface(
        request.input_path, request.sidecar_path
    )
    values = np.log(np.maximum(losses, 1e-12)) if request.log_loss else losses
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    filled = ax.contourf(r_u, r_v, values, levels=24, cmap="viridis")
    ax.contour(r_u, r_v, values, levels=12, colors="white", linewidths=0.4)
    label = "log loss" if request.log_loss else "loss"
    fig.colorbar(filled, ax=ax, label=label)
    for marker in markers:
        ax.plot(marker["r_u"], marker["r_v"], "o", color="orange", markersize=5)
        ax.annotate(
            marker["label"],
            (marker["r_u"], marker["r_v"]),
            textcoords="offset points",
            xytext=(4, 4),
            color="white",
            fontsize=8,
        )
    ax.set_xlabel("r_u")
    ax.set_ylabel("r_v")
    fig.tight_layout()
    return fig


def _render_volume_curve(request: FigureRequest):
    lines = _read_lines(request.input_path)
    header = lines[0].split(",")
    if header[:2] != ["k", "log_volume"]:
        raise SchemaError(f"{request.input_path}: not a probe table")
    ks, vols = [], []
    for i, line in enumerate(lines[1:], start=2):
        values = _floats(line.split(",")[:2], request.input_path, i)
        if math.isfinite(values[1]):
            ks.append(values[0])
            vols.append(values[1])
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.plot(ks, vols, marker="o", color="tab:blue")
    ax.set_xlabel("connecting vertices k")
    ax.set_ylabel("log volume")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def _render_decision_boundary(request: FigureRequest):
    lines = _read_lines(request.input_path)
    header = lines[0].split(",")
    if header[:2] != ["x0", "x1"] or len(header) < 3:
        raise SchemaError(f"{request.input_path}: not a boundary table")
    sample_names = header[2:]
    rows = [
        _floats(line.split(","), request.input_path, i)
        for i, line in enumerate(lines[1:], start=2)
    ]
    data = np.array(rows)
    x0 = np.unique(data[:, 0])
    x1 = np.unique(data[:, 1])
    if x0.size * x1.size != data.shape[0]:
        raise SchemaError(f"{request.input_path}: rows do not form a full grid")
    n_panels = min(len(sample_names), request.max_panels)
    fig, axes = plt.subplots(
        1, n_panels, figsize=(3.2 * n_panels, 3.0), squeeze=False
    )
    for panel in range(n_panels):
        grid = data[:, 2 + panel].reshape(x1.size, x0.size)
        ax = axes[0][panel]
        ax.imshow(
            grid,
            origin="lower",
            extent=(x0[0], x0[-1], x1[0], x1[-1]),
            cmap="viridis",
            interpolation="nearest",
        )
        ax.set_title(sample_names[panel])
        ax.set_xlabel("x0")
        if panel == 0:
            ax.set_ylabel("x1")
    fig.tight_layout()
    return fig


def _render_error_curve(request: FigureRequest):
    lines = _read_lines(request.input_path)
    header = lines[0].split(",")
    if len(header) != 2:
        raise SchemaError(f"{request.input_path}: expected a two-column table")
    xs, ys = [], []
    for i, line in enumerate(lines[1:], start=2):
        values = _floats(line.split(","), request.input_path, i)
        xs.append(values[0])
        ys.append(values[1])
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.plot(xs, ys, marker="s", color="tab:red")
    ax.set_xlabel(header[0])
    ax.set_ylabel(header[1])
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def _render_uncertainty_band(request: FigureRequest):
    lines = _read_lines(request.input_path)
    header = lines[0].split(",")
    if header != ["id", "x", "mean", "var_f", "var_y"]:
        raise SchemaError(
            f"{request.input_path}: expected header id,x,mean,var_f,var_y"
        )
    rows = np.array(
        [
            _floats(line.split(","), request.input_path, i)
            for i, line in enumerate(lines[1:], start=2)
        ]
    )
    x, mean = rows[:, 1], rows[:, 2]
    std_f, std_y = np.sqrt(rows[:, 3]), np.sqrt(rows[:, 4])
    order = np.argsort(x)
    x, mean, std_f, std_y = x[order], mean[order], std_f[order], std_y[order]
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    ax.fill_between(
        x, mean - 2 * std_y, mean + 2 * std_y,
        color="tab:orange", alpha=0.25, label="2-sigma with noise",
    )
    ax.fill_between(
        x, mean - 2 * std_f, mean + 2 * std_f,
        color="tab:blue", alpha=0.35, label="2-sigma noise-free",
    )
    ax.plot(x, mean, color="tab:blue", lw=1.5, label="predictive mean")
    if request.overlay_path:
        overlay = _read_lines(request.overlay_path)
        if overlay[0].split(",") != ["x0", "y"]:
            raise SchemaError(f"{request.overlay_path}: expected header x0,y")
        points = np.array(
            [
                _floats(line.split(","), request.overlay_path, i)
                for i, line in enumerate(overlay[1:], start=2)
            ]
        )
        ax.plot(points[:, 0], points[:, 1], ".", color="black", markersize=3,
                label="train data")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(loc="upper right", fontsize=7)
    fig.tight_layout()
    return fig


_RENDERERS = {
    "contour": _render_contour,
    "volume_curve": _render_volume_curve,
    "decision_boundary": _render_decision_boundary,
    "error_curve": _render_error_curve,
    "uncertainty_band": _render_uncertainty_band,
}


def render(request: FigureRequest) -> Path:
    """Render one figure; returns the written image path."""
    with plt.rc_context(_RC):
        fig = _RENDERERS[request.kind](request)
        _save(fig, request.output_path)
    return Path(request.output_path)
