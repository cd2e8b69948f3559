"""Dataset ingestion and per-node training-set assignment.

Three assignment schemes are supported, mirroring the three disruption
scenarios: survivors-only IID (7 images per class), everyone IID (6 images
per class), and a skewed split where the to-be-disrupted nodes hold almost
all images of half the classes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import CapacityError, DataFormatError, ParameterError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

# Class means form a fixed constellation per (classes, dim); the seed only
# drives the noise draws, so two seeds are draws from the same distribution.
_MEANS_ENTROPY = 0x5EEDC0DE
_MEAN_RADIUS = 4.0


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus integer labels, with a per-class index."""

    features: np.ndarray  # (count, dim) float64 in [0, 1] for image data
    labels: np.ndarray    # (count,) int64
    num_classes: int

    def __post_init__(self) -> None:
        if self.features.shape[0] != self.labels.shape[0]:
            raise ParameterError("features and labels disagree on sample count")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ParameterError("labels outside 0..num_classes-1")

    @property
    def count(self) -> int:
        return int(self.labels.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def class_index(self, c: int) -> np.ndarray:
        """Sorted sample indices belonging to class c."""
        return np.flatnonzero(self.labels == c)

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices], self.num_classes)


@dataclass(frozen=True)
class LabelSplit:
    """Disjoint bipartition of the class ids."""

    l1: frozenset[int]
    l2: frozenset[int]

    def __post_init__(self) -> None:
        if self.l1 & self.l2:
            raise ParameterError("label groups overlap")

    @classmethod
    def default(cls, num_classes: int = 10) -> "LabelSplit":
        half = num_classes // 2
        return cls(frozenset(range(half)), frozenset(range(half, num_classes)))

    def validate_for(self, num_classes: int) -> None:
        if self.l1 | self.l2 != set(range(num_classes)):
            raise ParameterError("label groups do not cover all classes")


@dataclass
class NodeAssignment:
    """Per-node sample indices. Missing nodes mean an empty local set."""

    indices: dict[int, np.ndarray] = field(default_factory=dict)
    num_classes: int = 10

    def for_node(self, node: int) -> np.ndarray:
        return self.indices.get(node, np.empty(0, dtype=np.int64))

    def size_of(self, node: int) -> int:
        return int(self.for_node(node).shape[0])

    def class_counts(self, node: int, labels: np.ndarray) -> np.ndarray:
        counts = np.zeros(self.num_classes, dtype=np.int64)
        for lab in labels[self.for_node(node)]:
            counts[lab] += 1
        return counts

    def total(self) -> int:
        return sum(v.shape[0] for v in self.indices.values())

    def to_json(self, path: str | Path) -> None:
        payload = {str(node): sorted(int(i) for i in idx) for node, idx in self.indices.items()}
        Path(path).write_text(json.dumps(payload, sort_keys=True, indent=0), encoding="utf-8")

    @classmethod
    def from_json(cls, path: str | Path, num_classes: int = 10) -> "NodeAssignment":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        indices = {int(node): np.asarray(idx, dtype=np.int64) for node, idx in payload.items()}
        return cls(indices=indices, num_classes=num_classes)


def _read_be_u32(fh, path: Path, what: str) -> int:
    raw = fh.read(4)
    if len(raw) != 4:
        raise DataFormatError(f"{path}: truncated while reading {what}")
    return struct.unpack(">I", raw)[0]


def load_idx_dataset(images_path: str | Path, labels_path: str | Path) -> Dataset:
    """Load an image/label pair of big-endian IDX files.

    Pixels are scaled to [0, 1] and flattened row-major to one feature
    vector per image.
    """
    images_path, labels_path = Path(images_path), Path(labels_path)
    with open(images_path, "rb") as fh:
        magic = _read_be_u32(fh, images_path, "magic")
        if magic != IDX_IMAGE_MAGIC:
            raise DataFormatError(
                f"{images_path}: image magic mismatch (got 0x{magic:08x}, want 0x{IDX_IMAGE_MAGIC:08x})")
        count = _read_be_u32(fh, images_path, "count")
        rows = _read_be_u32(fh, images_path, "rows")
        cols = _read_be_u32(fh, images_path, "cols")
        raw = fh.read(count * rows * cols)
        if len(raw) != count * rows * cols:
            raise DataFormatError(f"{images_path}: truncated pixel data "
                                  f"({len(raw)} bytes for {count}x{rows}x{cols})")
        features = np.frombuffer(raw, dtype=np.uint8).astype(np.float64) / 255.0
        features = features.reshape(count, rows * cols)
    with open(labels_path, "rb") as fh:
        magic = _read_be_u32(fh, labels_path, "magic")
        if magic != IDX_LABEL_MAGIC:
            raise DataFormatError(
                f"{labels_path}: label magic mismatch (got 0x{magic:08x}, want 0x{IDX_LABEL_MAGIC:08x})")
        label_count = _read_be_u32(fh, labels_path, "count")
        raw = fh.read(label_count)
        if len(raw) != label_count:
            raise DataFormatError(f"{labels_path}: truncated label data")
        labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)
    if label_count != count:
        raise DataFormatError(
            f"count mismatch: {images_path} holds {count} images, {labels_path} holds {label_count} labels")
    return Dataset(features=features, labels=labels, num_classes=10)


def class_means(classes: int, dim: int) -> np.ndarray:
    """Deterministic, well-separated class centres for synthetic data."""
    rng = np.random.default_rng(np.random.SeedSequence([_MEANS_ENTROPY, classes, dim]))
    g = rng.normal(size=(max(classes, dim), dim))
    if classes <= dim:
        q, _ = np.linalg.qr(g.T)
        means = q[:, :classes].T  # orthonormal rows: pairwise distance sqrt(2)
    else:
        means = g[:classes]
        means /= np.linalg.norm(means, axis=1, keepdims=True)
    return means * _MEAN_RADIUS


def synthetic_dataset(classes: int, dim: int, per_class: int, seed: int) -> Dataset:
    """Unit-variance Gaussian blobs around fixed class centres.

    The centres depend only on (classes, dim), so datasets drawn with
    different seeds are independent draws from the same distribution.
    """
    if classes < 2:
        raise ParameterError(f"need at least 2 classes, got {classes}")
    if per_class < 1:
        raise ParameterError(f"per_class must be >= 1, got {per_class}")
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    means = class_means(classes, dim)
    rng = np.random.default_rng(np.random.SeedSequence([seed, classes, dim, per_class]))
    features = np.empty((classes * per_class, dim), dtype=np.float64)
    labels = np.empty(classes * per_class, dtype=np.int64)
    for c in range(classes):
        block = slice(c * per_class, (c + 1) * per_class)
        features[block] = means[c] + rng.normal(size=(per_class, dim))
        labels[block] = c
    return Dataset(features=features, labels=labels, num_classes=classes)


def _shuffled_class_pools(ds: Dataset, rng: np.random.Generator) -> list[np.ndarray]:
    return [rng.permutation(ds.class_index(c)) for c in range(ds.num_classes)]


def _assign_counts(pool: np.ndarray, nodes: list[int], counts: dict[int, int],
                   out: dict[int, list[np.ndarray]], what: str) -> None:
    """Hand out consecutive slices of a shuffled pool, nodes in ascending id order."""
    needed = sum(counts[n] for n in nodes)
    if needed > pool.shape[0]:
        raise CapacityError(f"{what}: need {needed} samples but only {pool.shape[0]} available")
    cursor = 0
    for node in nodes:
        take = counts[node]
        if take:
            out.setdefault(node, []).append(pool[cursor:cursor + take])
        cursor += take


def _finalise(parts: dict[int, list[np.ndarray]], num_classes: int) -> NodeAssignment:
    indices = {node: np.sort(np.concatenate(chunks)) for node, chunks in parts.items()}
    return NodeAssignment(indices=indices, num_classes=num_classes)


def partition_case1(ds: Dataset, survivors: Iterable[int], seed: int,
                    per_class: int = 7) -> NodeAssignment:
    """Survivors get exactly ``per_class`` samples of every class; nodes
    outside ``survivors`` get nothing."""
    nodes = sorted(survivors)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    parts: dict[int, list[np.ndarray]] = {}
    for c, pool in enumerate(_shuffled_class_pools(ds, rng)):
        _assign_counts(pool, nodes, {n: per_class for n in nodes}, parts,
                       f"case1 class {c}")
    return _finalise(parts, ds.num_classes)


def partition_case2(ds: Dataset, all_nodes: Iterable[int], seed: int,
                    per_class: int = 6) -> NodeAssignment:
    """Every node gets exactly ``per_class`` samples of every class."""
    nodes = sorted(all_nodes)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    parts: dict[int, list[np.ndarray]] = {}
    for c, pool in enumerate(_shuffled_class_pools(ds, rng)):
        _assign_counts(pool, nodes, {n: per_class for n in nodes}, parts,
                       f"case2 class {c}")
    return _finalise(parts, ds.num_classes)


def partition_case3(ds: Dataset, split: LabelSplit, disrupted: Iterable[int],
                    survivors: Iterable[int], survivor_l2_per_class: int,
                    seed: int) -> NodeAssignment:
    """Skewed split: first-group classes spread evenly over everyone, second-
    group classes concentrated on the to-be-disrupted nodes.

    Each survivor receives exactly ``survivor_l2_per_class`` samples of every
    second-group class; whatever remains of those classes is split evenly over
    the disrupted nodes (remainders to the lowest ids).
    """
    if survivor_l2_per_class < 1:
        raise ParameterError("survivor_l2_per_class must be positive")
    split.validate_for(ds.num_classes)
    disrupted_nodes = sorted(disrupted)
    survivor_nodes = sorted(survivors)
    if set(disrupted_nodes) & set(survivor_nodes):
        raise ParameterError("disrupted and survivor sets overlap")
    everyone = sorted(disrupted_nodes + survivor_nodes)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    parts: dict[int, list[np.ndarray]] = {}
    pools = _shuffled_class_pools(ds, rng)
    for c in sorted(split.l1):
        counts = _even_counts(pools[c].shape[0], everyone)
        _assign_counts(pools[c], everyone, counts, parts, f"case3 L1 class {c}")
    for c in sorted(split.l2):
        pool = pools[c]
        survivor_total = survivor_l2_per_class * len(survivor_nodes)
        if survivor_total > pool.shape[0]:
            raise CapacityError(
                f"case3 L2 class {c}: survivors demand {survivor_total} "
                f"but only {pool.shape[0]} available")
        counts = {n: survivor_l2_per_class for n in survivor_nodes}
        counts.update(_even_counts(pool.shape[0] - survivor_total, disrupted_nodes))
        ordered = survivor_nodes + disrupted_nodes
        _assign_counts(pool, ordered, counts, parts, f"case3 L2 class {c}")
    return _finalise(parts, ds.num_classes)


def _even_counts(total: int, nodes: list[int]) -> dict[int, int]:
    """Split ``total`` as evenly as possible; remainders go to the lowest ids."""
    if not nodes:
        return {}
    base, rem = divmod(total, len(nodes))
    return {node: base + (1 if pos < rem else 0) for pos, node in enumerate(nodes)}
