"""Deterministic simulator of decentralised model averaging over scale-free
communication graphs, with centrality-targeted node disruption and
resilience metrics."""

__version__ = "0.1.0"

from .config import DataConfig, ExperimentConfig, load_config, load_sweep
from .datadist import (Dataset, LabelSplit, NodeAssignment, load_idx_dataset,
                       partition_case1, partition_case2, partition_case3,
                       synthetic_dataset)
from .disruption import (DisruptionPlan, SurvivorTopology, apply_disruption,
                         check_trigger, select_disrupted, survivor_view)
from .errors import (CapacityError, ConfigError, DataFormatError, DecsimError,
                     DomainError, MetricUndefinedError, ParameterError)
from .learner import (Contribution, ModelSpec, ModelState, TrainConfig,
                      decavg_aggregate, evaluate, forward, init_model,
                      load_checkpoint, local_train, predict, save_checkpoint)
from .metrics import (MetricsFrame, accuracy_difference, cluster_mean_accuracy,
                      mean_accuracy, write_aggregate_csv, write_per_run_csv)
from .topology import (BAParams, CentralityMap, Graph, PercolationPoint,
                       centrality, connected_components, generate_ba,
                       load_edge_list, percolation_curve, save_edge_list)
from .runner import (RunRecord, percolation_report, persist_runs, run_config,
                     run_experiment, run_sweep, stream_seed,
                     verify_synchronous_contract)

__all__ = [name for name in dir() if not name.startswith("_")]
