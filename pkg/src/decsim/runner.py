"""End-to-end experiment orchestration.

One run: build the graph, pick the disruption set, hand out local data,
then iterate synchronous rounds of (local training, neighbourhood
averaging, evaluation, trigger check). Removal fired at round t takes effect
at the start of round t+1. Everything is a pure function of the config and
the repetition seed.
"""

from __future__ import annotations

import json
import subprocess
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .datadist import (Dataset, LabelSplit, NodeAssignment, load_idx_dataset,
                       partition_case1, partition_case2, partition_case3,
                       synthetic_dataset)
from .disruption import (DisruptionPlan, SurvivorTopology, apply_disruption,
                         check_trigger, event_record, select_disrupted,
                         survivor_view)
from .errors import ConfigError
from .learner import (Contribution, ModelSpec, ModelState, decavg_aggregate,
                      evaluate, init_model, local_train)
from .metrics import (MetricsFrame, aggregate_rows, write_aggregate_csv,
                      write_per_run_csv)
from .topology import (CENTRALITY_KINDS, BAParams, Graph, centrality,
                       generate_ba, percolation_curve, save_edge_list,
                       write_percolation_csv)


def stream_seed(master: int, *tags) -> int:
    """Derive an independent named RNG stream seed.

    Streams are keyed by (master seed, tag words), so changing e.g. the
    partition draw never perturbs the per-node batch shuffles.
    """
    words = [int(master) & 0xFFFFFFFF]
    for tag in tags:
        if isinstance(tag, str):
            words.append(zlib.crc32(tag.encode("utf-8")))
        else:
            words.append(int(tag) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0])


@dataclass
class RunRecord:
    run_id: str
    seed: int
    frame: MetricsFrame
    plan: DisruptionPlan
    view: Optional[SurvivorTopology]
    events: list[dict] = field(default_factory=list)
    wallclock_s: float = 0.0


def _load_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    d = cfg.data
    if d.source == "synthetic":
        train = synthetic_dataset(d.classes, d.dim, d.train_per_class, d.noise_seed)
        test = synthetic_dataset(d.classes, d.dim, d.test_per_class, d.noise_seed + 1)
        return train, test
    train = load_idx_dataset(d.train_images, d.train_labels)
    test = load_idx_dataset(d.test_images, d.test_labels)
    if d.subsample_fraction < 1.0:
        train = _stratified_subsample(train, d.subsample_fraction, d.subsample_seed)
    return train, test


def _stratified_subsample(ds: Dataset, fraction: float, seed: int) -> Dataset:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5B5A]))
    keep: list[np.ndarray] = []
    for c in range(ds.num_classes):
        pool = ds.class_index(c)
        take = max(1, int(round(fraction * pool.shape[0])))
        keep.append(rng.permutation(pool)[:take])
    return ds.subset(np.sort(np.concatenate(keep)))


def _make_assignment(cfg: ExperimentConfig, train: Dataset,
                     plan: DisruptionPlan, seed: int) -> NodeAssignment:
    survivors = plan.survivors(cfg.n)
    part_seed = stream_seed(seed, "partition")
    if cfg.case == "case1":
        return partition_case1(train, survivors, part_seed, per_class=cfg.case1_per_class)
    if cfg.case == "case2":
        return partition_case2(train, range(cfg.n), part_seed, per_class=cfg.case2_per_class)
    split = LabelSplit.default(train.num_classes)
    return partition_case3(train, split, plan.disrupted, survivors,
                           cfg.survivor_l2_per_class, part_seed)


def _make_plan(cfg: ExperimentConfig, graph: Graph) -> DisruptionPlan:
    if cfg.fraction == 0.0:
        return DisruptionPlan(centrality_kind=cfg.centrality_kind, fraction=0.0,
                              disrupted=(), threshold=None)
    return select_disrupted(graph, cfg.centrality_kind, cfg.fraction,
                            threshold=cfg.threshold)


def run_experiment(cfg: ExperimentConfig, seed: Optional[int] = None,
                   graph: Optional[Graph] = None) -> RunRecord:
    """Execute one repetition and return its record.

    ``graph`` may be injected (mainly for tests with hand-built topologies);
    by default it is grown from the config's own graph seed, which is shared
    by every repetition so runs differ only in data and training draws.
    """
    t_start = time.perf_counter()
    if seed is None:
        seed = cfg.repetition_seeds[0]
    if graph is None:
        graph = generate_ba(BAParams(cfg.n, cfg.m, cfg.graph_seed))
    elif graph.node_count != cfg.n:
        raise ConfigError("injected graph node count disagrees with config")

    plan = _make_plan(cfg, graph)
    would_view = survivor_view(graph, plan.disrupted)
    survivors = plan.survivors(cfg.n)

    train_ds, test_ds = _load_datasets(cfg)
    assignment = _make_assignment(cfg, train_ds, plan, seed)
    local_data = {
        node: (train_ds.features[assignment.for_node(node)],
               train_ds.labels[assignment.for_node(node)])
        for node in range(cfg.n)
    }

    spec = ModelSpec(input_dim=train_ds.dim, hidden_sizes=cfg.hidden_sizes,
                     num_classes=train_ds.num_classes)
    shared_init = init_model(spec, stream_seed(seed, "init"))
    states: dict[int, ModelState] = {node: shared_init for node in range(cfg.n)}

    accuracy = np.full((cfg.rounds + 1, cfg.n), np.nan, dtype=np.float64)
    events: list[dict] = []
    alive: set[int] = set(range(cfg.n))
    applied_view: Optional[SurvivorTopology] = None

    def log(phase: str, round_index: int, node: Optional[int] = None, **extra) -> None:
        if cfg.record_events:
            entry = {"round": round_index, "phase": phase}
            if node is not None:
                entry["node"] = node
            entry.update(extra)
            events.append(entry)

    def eval_round(t: int) -> None:
        for node in sorted(alive):
            accuracy[t, node] = evaluate(states[node], test_ds)
            log("evaluate", t, node)

    def maybe_trigger(t: int) -> None:
        nonlocal alive, applied_view
        if plan.triggered or plan.threshold is None:
            return
        survivor_mean = float(np.mean(accuracy[t, list(survivors)]))
        log("trigger_check", t, mean_accuracy=survivor_mean)
        if check_trigger(plan, survivor_mean, t):
            applied_view = apply_disruption(graph, plan)
            alive = set(applied_view.nodes)
            log("disrupt", t, disrupted=list(plan.disrupted))

    eval_round(0)
    maybe_trigger(0)

    for t in range(1, cfg.rounds + 1):
        post_train: dict[int, ModelState] = {}
        for node in sorted(alive):
            x, y = local_data[node]
            result = local_train(states[node], x, y, cfg.train,
                                 stream_seed(seed, "shuffle", node, t))
            post_train[node] = result.state
            log("train", t, node, skipped=result.skipped)
        aggregated: dict[int, ModelState] = {}
        for node in sorted(alive):
            members = sorted((set(graph.adjacency[node]) & alive) | {node})
            contribs = [Contribution(post_train[m], assignment.size_of(m)) for m in members]
            aggregated[node] = decavg_aggregate(contribs)
            log("aggregate", t, node, sources=members, snapshot_round=t)
        for node in sorted(alive):
            states[node] = aggregated[node]

        if t % cfg.eval_stride == 0 or t == cfg.rounds:
            eval_round(t)
            maybe_trigger(t)

    frame = MetricsFrame(
        accuracy=accuracy,
        survivors=survivors,
        cluster_size=dict(would_view.component_size),
        disruption_round=plan.triggered_round,
        meta={
            "run_id": cfg.config_hash(),
            "seed": seed,
            "case": cfg.case,
            "threshold": cfg.threshold,
        },
    )
    return RunRecord(run_id=cfg.config_hash(), seed=seed, frame=frame, plan=plan,
                     view=applied_view, events=events,
                     wallclock_s=time.perf_counter() - t_start)


def run_config(cfg: ExperimentConfig, graph: Optional[Graph] = None) -> list[RunRecord]:
    """All repetitions of one config, in seed order."""
    return [run_experiment(cfg, seed=s, graph=graph) for s in cfg.repetition_seeds]


def verify_synchronous_contract(record: RunRecord, graph: Graph) -> None:
    """Check the event log against the synchronous-round contract.

    Raises AssertionError when an aggregation read a state it should not
    have: a non-neighbour, a removed node, or a snapshot from another round.
    """
    alive = set(range(graph.node_count))
    by_round: dict[int, list[dict]] = {}
    for ev in record.events:
        by_round.setdefault(ev["round"], []).append(ev)
    for t in sorted(by_round):
        evs = by_round[t]
        trained = {ev.get("node") for ev in evs if ev["phase"] == "train"}
        for ev in evs:
            if ev["phase"] != "aggregate":
                continue
            node = ev["node"]
            assert node in alive, f"round {t}: removed node {node} aggregated"
            expected = sorted((set(graph.adjacency[node]) & alive) | {node})
            assert ev["sources"] == expected, (
                f"round {t}: node {node} read {ev['sources']}, expected {expected}")
            assert ev["snapshot_round"] == t, (
                f"round {t}: node {node} read snapshot {ev['snapshot_round']}")
            assert set(ev["sources"]) <= trained, (
                f"round {t}: node {node} read a state that did not pass this "
                f"round's training phase")
        disrupted = [ev for ev in evs if ev["phase"] == "disrupt"]
        if disrupted:
            alive -= set(disrupted[0]["disrupted"])


def version_string() -> str:
    """Package version, decorated with the git revision when available."""
    try:
        described = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5, check=False,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        described = ""
    base = f"decsim-{__version__}"
    return f"{base}+{described}" if described else base


def persist_runs(cfg: ExperimentConfig, records: list[RunRecord],
                 out_dir: str | Path, graph: Optional[Graph] = None) -> Path:
    """Write per-run CSV, seed-aggregated CSV, graph edge list, and the JSON
    manifest under ``out_dir/<config hash>/``. Returns that directory."""
    run_dir = Path(out_dir) / cfg.config_hash()
    run_dir.mkdir(parents=True, exist_ok=True)
    frames = [r.frame for r in records]
    write_per_run_csv(frames, run_dir / "per_run.csv")
    write_aggregate_csv(aggregate_rows(frames, cfg.config_hash()), run_dir / "aggregate.csv")
    if graph is None:
        graph = generate_ba(BAParams(cfg.n, cfg.m, cfg.graph_seed))
    save_edge_list(graph, run_dir / "graph.txt")
    manifest = {
        "config": cfg.as_dict(),
        "config_hash": cfg.config_hash(),
        "version": version_string(),
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "total_wallclock_s": sum(r.wallclock_s for r in records),
        "runs": [
            {
                "seed": r.seed,
                "wallclock_s": r.wallclock_s,
                "disruption": event_record(r.plan, r.view),
            }
            for r in records
        ],
    }
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return run_dir


def _run_one_config(cfg: ExperimentConfig) -> list[RunRecord]:
    return run_config(cfg)


def run_sweep(cfgs: list[ExperimentConfig], out_dir: str | Path,
              workers: int = 1) -> tuple[list[RunRecord], list[dict]]:
    """Run every config, isolating per-config failures.

    Returns (records, errors); errors carry the config hash and the message.
    The merged aggregate CSV is sorted deterministically, so an identical
    sweep reproduces it byte for byte.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    all_records: list[RunRecord] = []
    errors: list[dict] = []
    results: list[tuple[ExperimentConfig, list[RunRecord] | None, Exception | None]] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(cfg, pool.submit(_run_one_config, cfg)) for cfg in cfgs]
            for cfg, fut in futures:
                try:
                    results.append((cfg, fut.result(), None))
                except Exception as exc:  # noqa: BLE001 - isolation is the point
                    results.append((cfg, None, exc))
    else:
        for cfg in cfgs:
            try:
                results.append((cfg, _run_one_config(cfg), None))
            except Exception as exc:  # noqa: BLE001
                results.append((cfg, None, exc))
    merged_rows: list[dict] = []
    for cfg, records, exc in results:
        if exc is not None:
            errors.append({"run_id": cfg.config_hash(), "case": cfg.case,
                           "error": f"{type(exc).__name__}: {exc}"})
            continue
        assert records is not None
        persist_runs(cfg, records, out_dir)
        merged_rows.extend(aggregate_rows([r.frame for r in records], cfg.config_hash()))
        all_records.extend(records)
    merged_rows.sort(key=lambda row: (row["run_id"], row["metric_name"],
                                      row["round_after_disruption"]))
    write_aggregate_csv(merged_rows, out_dir / "aggregate.csv")
    if errors:
        (out_dir / "errors.json").write_text(
            json.dumps(errors, indent=2, sort_keys=True), encoding="utf-8")
    return all_records, errors


def percolation_report(cfg: ExperimentConfig, out_dir: str | Path,
                       step_fraction: float = 0.05) -> Path:
    """Percolation curves for all three centralities on the configured graph,
    the component-size histogram at the configured removal fraction, and the
    per-node centrality table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    graph = generate_ba(BAParams(cfg.n, cfg.m, cfg.graph_seed))
    curves = {}
    for kind in CENTRALITY_KINDS:
        points = percolation_curve(graph, kind, step_fraction)
        curves[kind] = points
        write_percolation_csv(points, out_dir / f"percolation_{kind}.csv")

    fractions = [p.removed_fraction for p in curves["degree"]]
    with open(out_dir / "phi_curves.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("removed_fraction," + ",".join(f"phi_{k}" for k in CENTRALITY_KINDS) + "\n")
        for idx, frac in enumerate(fractions):
            row = [repr(frac)] + [repr(curves[k][idx].phi) for k in CENTRALITY_KINDS]
            fh.write(",".join(row) + "\n")

    with open(out_dir / "components_hist.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("centrality,component_size,count\n")
        for kind in CENTRALITY_KINDS:
            if cfg.fraction > 0.0:
                plan = select_disrupted(graph, kind, cfg.fraction)
                view = survivor_view(graph, plan.disrupted)
                sizes = sorted(set(view.component_size.values()))
                for size in sizes:
                    count = sum(1 for v in view.component_size.values() if v == size) // size
                    fh.write(f"{kind},{size},{count}\n")

    maps = {kind: centrality(graph, kind) for kind in CENTRALITY_KINDS}
    with open(out_dir / "centralities.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("node_id,degree,betweenness,structural_hole\n")
        for node in range(graph.node_count):
            fh.write(f"{node},{maps['degree'].score[node]!r},"
                     f"{maps['betweenness'].score[node]!r},"
                     f"{maps['structural_hole'].score[node]!r}\n")
    return out_dir
