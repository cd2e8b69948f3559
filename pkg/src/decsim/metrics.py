"""Resilience metrics over completed runs: survivor mean accuracy, means
within same-size clusters, and disruption-aligned accuracy differences.

A MetricsFrame stores one run's per-round, per-node accuracy matrix. Row t
is the evaluation after round t (row 0 is the shared initial model); NaN
marks nodes that are gone or rounds that were not evaluated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DomainError, MetricUndefinedError, ParameterError


@dataclass
class MetricsFrame:
    accuracy: np.ndarray              # (rounds+1, node_count), NaN where absent
    survivors: tuple[int, ...]
    cluster_size: dict[int, int]      # survivor id -> post-disruption component size
    disruption_round: Optional[int]   # None for a run where removal never fired
    meta: dict = field(default_factory=dict)  # run_id, seed, case, threshold

    @property
    def rounds(self) -> int:
        return self.accuracy.shape[0] - 1

    @property
    def node_count(self) -> int:
        return self.accuracy.shape[1]

    def cluster_sizes(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.cluster_size.values())))

    def nodes_in_clusters_of(self, c: int) -> tuple[int, ...]:
        return tuple(n for n in self.survivors if self.cluster_size.get(n) == c)

    def largest_cluster_size(self) -> int:
        if not self.cluster_size:
            raise MetricUndefinedError("no survivors labelled with cluster sizes")
        return max(self.cluster_size.values())


def _checked_values(frame: MetricsFrame, nodes: Sequence[int], t: int, what: str) -> np.ndarray:
    if not 0 <= t <= frame.rounds:
        raise ParameterError(f"round {t} outside 0..{frame.rounds}")
    if not nodes:
        raise MetricUndefinedError(f"{what}: empty node set")
    values = frame.accuracy[t, list(nodes)]
    if np.isnan(values).any():
        raise MetricUndefinedError(f"{what}: missing accuracy entries at round {t}")
    return values


def mean_accuracy(frame: MetricsFrame, t: int) -> float:
    """Unweighted mean accuracy over the surviving nodes at round t."""
    return float(np.mean(_checked_values(frame, frame.survivors, t, "mean_accuracy")))


def cluster_mean_accuracy(frame: MetricsFrame, c: int, t: int) -> float:
    """Mean accuracy over every survivor whose component has size c, pooled
    across distinct components of that size."""
    nodes = frame.nodes_in_clusters_of(c)
    if not nodes:
        raise MetricUndefinedError(f"no surviving node lives in a size-{c} cluster")
    return float(np.mean(_checked_values(frame, nodes, t, f"cluster_mean_accuracy[{c}]")))


def _anchor(frame: MetricsFrame, partner: MetricsFrame) -> int:
    if frame.disruption_round is not None:
        return frame.disruption_round
    if partner.disruption_round is not None:
        # baseline frame: align it at the partner's disruption round
        return partner.disruption_round
    raise MetricUndefinedError("accuracy_difference needs a disruption marker on at least one frame")


def accuracy_difference(frame_i: MetricsFrame, frame_j: MetricsFrame,
                        k: Union[int, str], t: int) -> float:
    """Relative accuracy gap A_i/A_j - 1, with both runs aligned at their own
    disruption rounds (t = 0 is the disruption round itself).

    ``k`` is a node id, or "mean" for the average of per-node differences
    over the nodes surviving in both runs.
    """
    anchor_i = _anchor(frame_i, frame_j)
    anchor_j = _anchor(frame_j, frame_i)
    if t < 0:
        raise ParameterError("rounds-after-disruption must be >= 0")
    if k == "mean":
        common = tuple(sorted(set(frame_i.survivors) & set(frame_j.survivors)))
        a = _checked_values(frame_i, common, anchor_i + t, "accuracy_difference")
        b = _checked_values(frame_j, common, anchor_j + t, "accuracy_difference")
        if np.any(b == 0.0):
            raise MetricUndefinedError("accuracy_difference: zero accuracy in denominator")
        return float(np.mean(a / b - 1.0))
    node = int(k)
    if node not in frame_i.survivors or node not in frame_j.survivors:
        raise DomainError(f"node {node} does not survive in both runs")
    a = _checked_values(frame_i, (node,), anchor_i + t, "accuracy_difference")[0]
    b = _checked_values(frame_j, (node,), anchor_j + t, "accuracy_difference")[0]
    if b == 0.0:
        raise MetricUndefinedError("accuracy_difference: zero accuracy in denominator")
    return float(a / b - 1.0)


def ci95(values: Sequence[float]) -> float:
    """Normal-approximation half-width across repetition seeds."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size <= 1:
        return 0.0
    return float(1.96 * arr.std(ddof=1) / math.sqrt(arr.size))


PER_RUN_COLUMNS = ["run_id", "seed", "case", "threshold", "round",
                   "node_id", "cluster_size", "accuracy"]
AGGREGATE_COLUMNS = ["run_id", "round_after_disruption", "metric_name",
                     "value", "ci95", "n"]


def _format_threshold(threshold: Optional[float]) -> str:
    return "none" if threshold is None else repr(float(threshold))


def write_per_run_csv(frames: Sequence[MetricsFrame], path: str | Path) -> None:
    """One row per (run, round, alive node); schema in PER_RUN_COLUMNS.

    cluster_size is the node's (would-be) post-disruption component size;
    nodes scheduled for removal carry 0 since they are not survivors.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PER_RUN_COLUMNS)
        for frame in frames:
            meta = frame.meta
            threshold = _format_threshold(meta.get("threshold"))
            for t in range(frame.rounds + 1):
                row_vals = frame.accuracy[t]
                for node in range(frame.node_count):
                    if np.isnan(row_vals[node]):
                        continue
                    writer.writerow([
                        meta.get("run_id", ""), meta.get("seed", ""),
                        meta.get("case", ""), threshold, t, node,
                        frame.cluster_size.get(node, 0), repr(float(row_vals[node])),
                    ])


def aggregate_rows(frames: Sequence[MetricsFrame], run_id: str) -> list[dict]:
    """Seed-averaged metric curves on the rounds-after-disruption axis.

    Confidence intervals are computed across repetition seeds using the
    normal approximation; the sample count rides along so intervals stay
    reconstructible downstream.
    """
    rows: list[dict] = []
    if not frames:
        return rows

    def metric_curve(name: str, extractor) -> None:
        per_frame: list[tuple[int, MetricsFrame]] = []
        for frame in frames:
            anchor = frame.disruption_round if frame.disruption_round is not None else 0
            per_frame.append((anchor, frame))
        t_max = min(frame.rounds - anchor for anchor, frame in per_frame)
        for t in range(t_max + 1):
            values = []
            for anchor, frame in per_frame:
                try:
                    values.append(extractor(frame, anchor + t))
                except MetricUndefinedError:
                    continue
            if not values:
                continue
            rows.append({
                "run_id": run_id,
                "round_after_disruption": t,
                "metric_name": name,
                "value": float(np.mean(values)),
                "ci95": ci95(values),
                "n": len(values),
            })

    metric_curve("mean_accuracy", mean_accuracy)
    metric_curve("isolated_mean_accuracy",
                 lambda fr, t: cluster_mean_accuracy(fr, 1, t))
    metric_curve("lcc_mean_accuracy",
                 lambda fr, t: cluster_mean_accuracy(fr, fr.largest_cluster_size(), t))
    return rows


def write_aggregate_csv(rows: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_COLUMNS)
        for row in rows:
            writer.writerow([row["run_id"], row["round_after_disruption"],
                             row["metric_name"], repr(float(row["value"])),
                             repr(float(row["ci95"])), row["n"]])
