"""Delimited outputs, JSON reports and SVG figures for the CLI.

Figures are rendered with a pinned SVG hash salt and no timestamp
metadata, so rerunning with the same inputs reproduces files byte for
byte.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "soda"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .classify import DiMatrix, EvalReport, Prediction
from .localize import DiSurface, PeakList

# bubble radius in points is BUBBLE_BASE_RADIUS / pval, clipped at the max
BUBBLE_BASE_RADIUS = 1.5
BUBBLE_MAX_RADIUS = 25.0


def _save_svg(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_surface_csv(surface: DiSurface, path) -> None:
    rows = ["tau_x,tau_y,di,pval"]
    nx, ny = surface.di.shape
    for a in range(nx):
        for b in range(ny):
            pv = "" if surface.pval is None else repr(float(surface.pval[a, b]))
            rows.append(f"{surface.tau_x[a]},{surface.tau_y[b]},{float(surface.di[a, b])!r},{pv}")
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def write_peaks_json(peaks: PeakList, path) -> None:
    payload = {
        "max_stat": peaks.max_stat,
        "peaks": [
            {
                "tau_x": p.tau_x,
                "tau_y": p.tau_y,
                "di": p.di,
                "z": p.z,
                "pval": p.pval,
                "significant": p.significant,
            }
            for p in peaks
        ],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_matrix_csv(matrix: DiMatrix, path) -> None:
    """Symmetrized DI with ids on both axes; forward values in a second block."""
    rows = ["id," + ",".join(matrix.ids)]
    for i, name in enumerate(matrix.ids):
        rows.append(name + "," + ",".join(repr(float(v)) for v in matrix.sym[i]))
    rows.append("")
    rows.append("forward_id," + ",".join(matrix.ids))
    for i, name in enumerate(matrix.ids):
        rows.append(name + "," + ",".join(repr(float(v)) for v in matrix.forward[i]))
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def write_predictions_csv(predictions: list[Prediction], path) -> None:
    rows = ["id,predicted,truth"]
    rows.extend(f"{p.sequence_id},{p.predicted},{p.truth}" for p in predictions)
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def write_report_json(report: EvalReport, path, extra: dict | None = None) -> None:
    payload = {
        "accuracy": report.accuracy,
        "labels": list(report.labels),
        "confusion": report.confusion.tolist(),
        "average_precision": report.average_precision,
    }
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def bubble_svg(surface: DiSurface, path, peaks: PeakList | None = None,
               q: float | None = None, seed: int | None = None) -> None:
    """Bubble chart of the surface at block-start coordinates.

    Bubble radius is proportional to 1/pval and clipped at
    BUBBLE_MAX_RADIUS points, so stronger evidence means a bigger mark
    without tiny p-values swallowing the plot. Significant peaks get a red
    ring.
    """
    xs, ys = np.meshgrid(surface.tau_x, surface.tau_y, indexing="ij")
    if surface.pval is not None:
        radius = np.minimum(BUBBLE_BASE_RADIUS / np.maximum(surface.pval, 1e-300),
                            BUBBLE_MAX_RADIUS)
    else:
        span = np.ptp(surface.di)
        scaled = (surface.di - surface.di.min()) / (span if span > 0 else 1.0)
        radius = BUBBLE_BASE_RADIUS + (BUBBLE_MAX_RADIUS - BUBBLE_BASE_RADIUS) * scaled
    fig, ax = plt.subplots(figsize=(8, 6))
    ax.scatter(xs.ravel(), ys.ravel(), s=(2.0 * radius.ravel()) ** 2,
               c="#336699", alpha=0.7, edgecolors="none")
    if peaks is not None:
        sig = [p for p in peaks if p.significant]
        if sig:
            ax.scatter([p.tau_x for p in sig], [p.tau_y for p in sig],
                       s=(2.0 * BUBBLE_MAX_RADIUS) ** 2, facecolors="none",
                       edgecolors="#cc3333", linewidths=1.5)
    ax.set_xlabel("tau_x")
    ax.set_ylabel("tau_y")
    ax.set_title(f"local DI: {surface.x_id} -> {surface.y_id}")
    notes = [f"T={surface.window}"]
    if q is not None:
        notes.append(f"q={q}")
    if seed is not None:
        notes.append(f"seed={seed}")
    ax.text(0.99, 0.01, "  ".join(notes), transform=ax.transAxes,
            ha="right", va="bottom", fontsize=8, alpha=0.8)
    pad = max(surface.window // 2, 1)
    ax.set_xlim(surface.tau_x.min() - pad, surface.tau_x.max() + pad)
    ax.set_ylim(surface.tau_y.min() - pad, surface.tau_y.max() + pad)
    _save_svg(fig, path)


def confusion_svg(report: EvalReport, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(report.confusion, cmap="Blues")
    ax.set_xticks(range(len(report.labels)), report.labels, rotation=45, ha="right")
    ax.set_yticks(range(len(report.labels)), report.labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("truth")
    for i in range(len(report.labels)):
        for j in range(len(report.labels)):
            ax.text(j, i, str(report.confusion[i, j]), ha="center", va="center", fontsize=9)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    _save_svg(fig, path)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, command: str, config_dict: dict, seed: int,
                   inputs: list, artifacts: list) -> Path:
    """Record what a command ran on and what it produced, with digests."""
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "config": config_dict,
        "seed": seed,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "artifacts": {
            str(Path(p).relative_to(out_dir)): sha256_file(p) for p in artifacts
        },
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path
