"""Declarative experiment configuration.

Configs live in an INI-style file of flat key=value sections. Unknown
sections or keys are rejected outright so typos cannot silently change an
experiment. A missing key falls back to the desk-scale default.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .learner import TrainConfig
from .topology import CENTRALITY_KINDS

CASES = ("case1", "case2", "case3")

_SCHEMA: dict[str, tuple[str, ...]] = {
    "topology": ("nodes", "attach", "seed"),
    "data": ("source", "classes", "dim", "train_per_class", "test_per_class",
             "noise_seed", "train_images", "train_labels", "test_images",
             "test_labels", "subsample_fraction", "subsample_seed"),
    "model": ("hidden",),
    "train": ("learning_rate", "momentum", "batch_size", "local_epochs"),
    "disruption": ("centrality", "fraction", "threshold", "percolation_step"),
    "run": ("case", "rounds", "repetitions", "eval_stride",
            "survivor_l2_per_class", "case1_per_class", "case2_per_class",
            "record_events"),
    "output": ("dir",),
    "sweep": ("cases", "thresholds", "survivor_l2_per_class"),
}


@dataclass(frozen=True)
class DataConfig:
    source: str = "synthetic"  # synthetic | idx
    classes: int = 10
    dim: int = 32
    train_per_class: int = 1000
    test_per_class: int = 100
    noise_seed: int = 7
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    subsample_fraction: float = 1.0
    subsample_seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 30
    m: int = 2
    graph_seed: int = 1
    case: str = "case2"
    centrality_kind: str = "structural_hole"
    fraction: float = 0.1
    threshold: Optional[float] = None  # None = baseline, no disruption
    rounds: int = 60
    eval_stride: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    hidden_sizes: tuple[int, ...] = (64, 32)
    data: DataConfig = field(default_factory=DataConfig)
    survivor_l2_per_class: int = 10
    case1_per_class: int = 7
    case2_per_class: int = 6
    repetition_seeds: tuple[int, ...] = (1,)
    output_dir: str = "results"
    record_events: bool = True

    def __post_init__(self) -> None:
        if self.case not in CASES:
            raise ConfigError(f"case must be one of {CASES}, got {self.case!r}")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.eval_stride < 1:
            raise ConfigError("eval_stride must be >= 1")
        if self.centrality_kind not in CENTRALITY_KINDS:
            raise ConfigError(f"centrality must be one of {CENTRALITY_KINDS}")
        if not 0.0 <= self.fraction < 1.0:
            raise ConfigError("disruption fraction must be in [0, 1)")
        if self.fraction == 0.0:
            if self.threshold is not None:
                raise ConfigError("a threshold needs a positive disruption fraction")
            if self.case in ("case1", "case3"):
                raise ConfigError(f"{self.case} needs a disrupted set; use fraction > 0")
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise ConfigError("threshold must be in [0, 1] or none")
        if not self.repetition_seeds:
            raise ConfigError("at least one repetition seed is required")
        if self.data.source not in ("synthetic", "idx"):
            raise ConfigError("data source must be 'synthetic' or 'idx'")
        if self.data.source == "idx":
            missing = [k for k in ("train_images", "train_labels", "test_images", "test_labels")
                       if not getattr(self.data, k)]
            if missing:
                raise ConfigError(f"idx data source needs paths for: {', '.join(missing)}")

    @property
    def is_baseline(self) -> bool:
        return self.threshold is None

    def as_dict(self) -> dict:
        """Canonical mapping for hashing; output location is excluded so the
        hash identifies the experiment, not where its files land."""
        return {
            "topology": {"n": self.n, "m": self.m, "seed": self.graph_seed},
            "case": self.case,
            "centrality": self.centrality_kind,
            "fraction": self.fraction,
            "threshold": self.threshold,
            "rounds": self.rounds,
            "eval_stride": self.eval_stride,
            "train": {
                "learning_rate": self.train.learning_rate,
                "momentum": self.train.momentum,
                "batch_size": self.train.batch_size,
                "local_epochs": self.train.local_epochs,
            },
            "hidden_sizes": list(self.hidden_sizes),
            "data": {
                "source": self.data.source,
                "classes": self.data.classes,
                "dim": self.data.dim,
                "train_per_class": self.data.train_per_class,
                "test_per_class": self.data.test_per_class,
                "noise_seed": self.data.noise_seed,
                "train_images": self.data.train_images,
                "train_labels": self.data.train_labels,
                "test_images": self.data.test_images,
                "test_labels": self.data.test_labels,
                "subsample_fraction": self.data.subsample_fraction,
                "subsample_seed": self.data.subsample_seed,
            },
            "survivor_l2_per_class": self.survivor_l2_per_class,
            "case1_per_class": self.case1_per_class,
            "case2_per_class": self.case2_per_class,
            "repetition_seeds": list(self.repetition_seeds),
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def _parse_threshold(raw: str) -> Optional[float]:
    raw = raw.strip().lower()
    if raw in ("none", ""):
        return None
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"threshold must be a number or 'none', got {raw!r}") from exc


def _parse_int_list(raw: str, what: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok.strip()) for tok in raw.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"{what} must be a comma-separated list of integers") from exc


def _read_ini(path: str | Path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep keys case-sensitive so typos surface
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
    return parser


def _build(parser: configparser.ConfigParser) -> ExperimentConfig:
    defaults = ExperimentConfig()

    def get(section: str, key: str, fallback):
        if parser.has_option(section, key):
            return parser.get(section, key)
        return fallback

    try:
        data = DataConfig(
            source=get("data", "source", defaults.data.source),
            classes=int(get("data", "classes", defaults.data.classes)),
            dim=int(get("data", "dim", defaults.data.dim)),
            train_per_class=int(get("data", "train_per_class", defaults.data.train_per_class)),
            test_per_class=int(get("data", "test_per_class", defaults.data.test_per_class)),
            noise_seed=int(get("data", "noise_seed", defaults.data.noise_seed)),
            train_images=get("data", "train_images", ""),
            train_labels=get("data", "train_labels", ""),
            test_images=get("data", "test_images", ""),
            test_labels=get("data", "test_labels", ""),
            subsample_fraction=float(get("data", "subsample_fraction", 1.0)),
            subsample_seed=int(get("data", "subsample_seed", 0)),
        )
        train = TrainConfig(
            learning_rate=float(get("train", "learning_rate", defaults.train.learning_rate)),
            momentum=float(get("train", "momentum", defaults.train.momentum)),
            batch_size=int(get("train", "batch_size", defaults.train.batch_size)),
            local_epochs=int(get("train", "local_epochs", defaults.train.local_epochs)),
        )
        hidden_raw = get("model", "hidden", ",".join(str(h) for h in defaults.hidden_sizes))
        record_raw = str(get("run", "record_events", "true")).strip().lower()
        if record_raw not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"record_events must be boolean, got {record_raw!r}")
        cfg = ExperimentConfig(
            n=int(get("topology", "nodes", defaults.n)),
            m=int(get("topology", "attach", defaults.m)),
            graph_seed=int(get("topology", "seed", defaults.graph_seed)),
            case=str(get("run", "case", defaults.case)).strip(),
            centrality_kind=str(get("disruption", "centrality", defaults.centrality_kind)).strip(),
            fraction=float(get("disruption", "fraction", defaults.fraction)),
            threshold=_parse_threshold(str(get("disruption", "threshold", "none"))),
            rounds=int(get("run", "rounds", defaults.rounds)),
            eval_stride=int(get("run", "eval_stride", defaults.eval_stride)),
            train=train,
            hidden_sizes=_parse_int_list(hidden_raw, "model.hidden"),
            data=data,
            survivor_l2_per_class=int(get("run", "survivor_l2_per_class",
                                          defaults.survivor_l2_per_class)),
            case1_per_class=int(get("run", "case1_per_class", defaults.case1_per_class)),
            case2_per_class=int(get("run", "case2_per_class", defaults.case2_per_class)),
            repetition_seeds=_parse_int_list(str(get("run", "repetitions", "1")),
                                             "run.repetitions"),
            output_dir=str(get("output", "dir", defaults.output_dir)),
            record_events=record_raw in ("true", "1", "yes"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    return _build(_read_ini(path))


def load_sweep(path: str | Path) -> list[ExperimentConfig]:
    """Expand the [sweep] section into the cross product of its lists.

    Listed keys override the base config; everything else is shared. The
    expansion order (cases, then thresholds, then survivor counts) is fixed
    so repeated sweeps enumerate runs identically.
    """
    parser = _read_ini(path)
    base = _build(parser)
    if not parser.has_section("sweep"):
        return [base]
    cases = [c.strip() for c in parser.get("sweep", "cases", fallback=base.case).split(",") if c.strip()]
    thresholds = [
        _parse_threshold(tok)
        for tok in str(parser.get("sweep", "thresholds",
                                  fallback="none" if base.threshold is None else repr(base.threshold))).split(",")
    ]
    l2_counts = _parse_int_list(
        str(parser.get("sweep", "survivor_l2_per_class", fallback=str(base.survivor_l2_per_class))),
        "sweep.survivor_l2_per_class")
    configs: list[ExperimentConfig] = []
    for case in cases:
        for threshold in thresholds:
            if case == "case3":
                for l2 in l2_counts:
                    configs.append(replace(base, case=case, threshold=threshold,
                                           survivor_l2_per_class=l2))
            else:
                configs.append(replace(base, case=case, threshold=threshold))
    return configs


def percolation_step(path: str | Path) -> float:
    parser = _read_ini(path)
    return float(parser.get("disruption", "percolation_step", fallback="0.05"))
