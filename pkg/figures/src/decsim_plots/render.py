"""Render simulator CSV outputs as figures.

This package only reads the documented CSV schemas and the JSON run
manifest; it has no knowledge of simulator internals. Inputs are never
modified; each job writes exactly its own output image.
"""

from __future__ import annotations

import csv
import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

PLOT_KINDS = ("accuracy_beam", "percolation", "histogram", "difference", "baseline")

_REQUIRED_COLUMNS = {
    "accuracy_beam": {"round", "node_id", "cluster_size", "accuracy"},
    "baseline": {"run_id", "round", "node_id", "cluster_size", "accuracy"},
    "percolation": {"removed_fraction", "phi"},
    "histogram": {"component_size", "count"},
    "difference": {"run_id", "round_after_disruption", "metric_name", "value", "ci95"},
}


class SchemaError(Exception):
    """An input CSV is missing columns the plot kind requires."""


@dataclass
class PlotJob:
    kind: str
    inputs: list[Path]
    output: Path
    manifest: Optional[Path] = None
    cluster_cmap: str = "viridis"
    zoom_inset: bool = False

    def __post_init__(self) -> None:
        if self.kind not in PLOT_KINDS:
            raise SchemaError(f"unknown plot kind {self.kind!r}; expected one of {PLOT_KINDS}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")
        self.inputs = [Path(p) for p in self.inputs]
        self.output = Path(self.output)


def read_rows(path: Path, required: set[str]) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = set(reader.fieldnames or [])
        missing = sorted(required - header)
        if missing:
            raise SchemaError(f"{path}: missing required columns: {', '.join(missing)}")
        return list(reader)


def manifest_hash(job: PlotJob) -> str:
    """Provenance tag embedded in every image.

    Prefers the run manifest's config hash (explicit --manifest, else a
    manifest.json sitting next to the first input); falls back to a content
    hash of the inputs so the tag always identifies what was plotted.
    """
    candidates = []
    if job.manifest is not None:
        candidates.append(Path(job.manifest))
    candidates.append(job.inputs[0].parent / "manifest.json")
    for cand in candidates:
        if cand.is_file():
            payload = json.loads(cand.read_text(encoding="utf-8"))
            if "config_hash" in payload:
                return str(payload["config_hash"])
    digest = hashlib.sha256()
    for path in job.inputs:
        digest.update(path.read_bytes())
    return "sha256:" + digest.hexdigest()[:12]


def _disruption_rounds(job: PlotJob) -> list[int]:
    candidates = []
    if job.manifest is not None:
        candidates.append(Path(job.manifest))
    candidates.append(job.inputs[0].parent / "manifest.json")
    for cand in candidates:
        if cand.is_file():
            payload = json.loads(cand.read_text(encoding="utf-8"))
            rounds = {run.get("disruption", {}).get("triggered_round")
                      for run in payload.get("runs", [])}
            return sorted(r for r in rounds if r is not None)
    return []


def _finish(fig, job: PlotJob, tag: str) -> Path:
    fig.text(0.99, 0.01, f"manifest {tag}", ha="right", va="bottom",
             fontsize=6, color="0.5")
    job.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(job.output, dpi=150,
                metadata={"decsim-manifest-hash": tag})
    plt.close(fig)
    return job.output


def _render_accuracy_beam(job: PlotJob, fig, ax) -> None:
    rows = []
    for path in job.inputs:
        rows.extend(read_rows(path, _REQUIRED_COLUMNS["accuracy_beam"]))
    traces: dict[tuple, list[tuple[int, float]]] = defaultdict(list)
    cluster_of: dict[tuple, int] = {}
    for row in rows:
        key = (row.get("run_id", ""), row.get("seed", ""), row["node_id"])
        traces[key].append((int(row["round"]), float(row["accuracy"])))
        cluster_of[key] = int(row["cluster_size"])
    sizes = sorted(set(cluster_of.values()))
    cmap = plt.get_cmap(job.cluster_cmap)
    colour = {c: cmap(i / max(len(sizes) - 1, 1)) for i, c in enumerate(sizes)}
    for key, points in sorted(traces.items()):
        points.sort()
        xs, ys = zip(*points)
        ax.plot(xs, ys, color=colour[cluster_of[key]], alpha=0.5, linewidth=0.8)
    for r in _disruption_rounds(job):
        ax.axvline(r, color="black", linestyle="--", linewidth=1.0)
    handles = [plt.Line2D([0], [0], color=colour[c], label=f"cluster size {c}")
               for c in sizes]
    ax.legend(handles=handles, fontsize=7, loc="lower right")
    ax.set_xlabel("communication round")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.0)
    if job.zoom_inset and traces:
        last = max(x for pts in traces.values() for x, _ in pts)
        inset = ax.inset_axes([0.55, 0.18, 0.4, 0.3])
        for key, points in sorted(traces.items()):
            xs, ys = zip(*sorted(points))
            inset.plot(xs, ys, color=colour[cluster_of[key]], alpha=0.5, linewidth=0.7)
        inset.set_xlim(last * 0.75, last)
        inset.tick_params(labelsize=6)


def _render_percolation(job: PlotJob, fig, ax) -> None:
    top = 1.0
    for path in job.inputs:
        rows = read_rows(path, _REQUIRED_COLUMNS["percolation"])
        xs = [float(r["removed_fraction"]) for r in rows]
        ys = [float(r["phi"]) for r in rows]
        top = max(top, max(ys, default=1.0))
        label = path.stem.replace("percolation_", "")
        ax.plot(xs, ys, marker="o", markersize=3, label=label)
    ax.set_xlabel("fraction of nodes removed")
    ax.set_ylabel("largest component share")
    ax.set_ylim(0.0, top)
    ax.legend(fontsize=7)


def _render_histogram(job: PlotJob, fig, ax) -> None:
    grouped: dict[str, dict[int, int]] = defaultdict(dict)
    for path in job.inputs:
        for row in read_rows(path, _REQUIRED_COLUMNS["histogram"]):
            group = row.get("centrality", path.stem)
            grouped[group][int(row["component_size"])] = int(row["count"])
    names = sorted(grouped)
    sizes = sorted({s for counts in grouped.values() for s in counts})
    width = 0.8 / max(len(names), 1)
    for i, name in enumerate(names):
        xs = [s + (i - (len(names) - 1) / 2) * width for s in sizes]
        ys = [grouped[name].get(s, 0) for s in sizes]
        ax.bar(xs, ys, width=width, label=name)
    ax.set_xlabel("component size")
    ax.set_ylabel("number of components")
    ax.set_xticks(sizes)
    ax.legend(fontsize=7)


def _render_difference(job: PlotJob, fig, ax) -> None:
    rows = []
    for path in job.inputs:
        rows.extend(read_rows(path, _REQUIRED_COLUMNS["difference"]))
    curves: dict[tuple[str, str], list[tuple[int, float, float]]] = defaultdict(list)
    for row in rows:
        curves[(row["run_id"], row["metric_name"])].append(
            (int(row["round_after_disruption"]), float(row["value"]), float(row["ci95"])))
    for (run_id, metric), points in sorted(curves.items()):
        points.sort()
        xs = np.array([p[0] for p in points])
        ys = np.array([p[1] for p in points])
        ci = np.array([p[2] for p in points])
        line, = ax.plot(xs, ys, label=f"{metric} ({run_id})")
        ax.fill_between(xs, ys - ci, ys + ci, alpha=0.2, color=line.get_color())
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("rounds after disruption")
    ax.set_ylabel("relative accuracy difference")
    ax.legend(fontsize=7)


def _render_baseline(job: PlotJob, fig, ax) -> None:
    rows = []
    for path in job.inputs:
        rows.extend(read_rows(path, _REQUIRED_COLUMNS["baseline"]))
    sums: dict[tuple[str, int], list[float]] = defaultdict(list)
    labels: dict[str, str] = {}
    for row in rows:
        run = row["run_id"]
        sums[(run, int(row["round"]))].append(float(row["accuracy"]))
        case = row.get("case", "")
        threshold = row.get("threshold", "")
        labels[run] = f"{case} (threshold {threshold})" if case else run
    runs = sorted({run for run, _ in sums})
    for run in runs:
        rounds = sorted(t for r, t in sums if r == run)
        means = [float(np.mean(sums[(run, t)])) for t in rounds]
        ax.plot(rounds, means, label=labels[run])
    ax.set_xlabel("communication round")
    ax.set_ylabel("mean accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.legend(fontsize=7)


_RENDERERS = {
    "accuracy_beam": _render_accuracy_beam,
    "percolation": _render_percolation,
    "histogram": _render_histogram,
    "difference": _render_difference,
    "baseline": _render_baseline,
}


def render(job: PlotJob):
    """Render the job and write its image. Returns (figure, output path);
    the figure is already saved and closed, kept for inspection in tests."""
    tag = manifest_hash(job)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    _RENDERERS[job.kind](job, fig, ax)
    out = _finish(fig, job, tag)
    return fig, out
