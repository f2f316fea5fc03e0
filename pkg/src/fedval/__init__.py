"""Deterministic federated-learning simulator with fairness-aware aggregation."""

from .baselines import (
    AFLState,
    QConfig,
    afl_round,
    fedavg_round,
    project_simplex,
    qfedavg_round,
    qfedsgd_round,
)
from .data import (
    ClientProfile,
    ClientSpec,
    DatasetSchema,
    SkewSpec,
    TabularDataset,
    generate_synthetic,
    load_csv,
    partition,
    skew,
    split_validation,
)
from .harness import (
    ExperimentConfig,
    SweepSpec,
    SweepVariant,
    preset,
    preset_names,
    run_experiment,
    run_sweep,
)
from .metrics import ObjectiveSpec, ScoreVector, accuracy, composite_score, eod, spd
from .model import ModelParams, TrainConfig, client_update, gradient, loss, predict_proba
from .reporting import RoundReport, read_jsonl
from .server import (
    AggregationWeights,
    RankingConfig,
    RankState,
    aggregate,
    fedval_round,
    make_weights,
    rank_update,
    score_clients,
    temp_aggregate,
)

__version__ = "0.1.0"

__all__ = [
    "AFLState",
    "AggregationWeights",
    "ClientProfile",
    "ClientSpec",
    "DatasetSchema",
    "ExperimentConfig",
    "ModelParams",
    "ObjectiveSpec",
    "QConfig",
    "RankState",
    "RankingConfig",
    "RoundReport",
    "ScoreVector",
    "SkewSpec",
    "SweepSpec",
    "SweepVariant",
    "TabularDataset",
    "TrainConfig",
    "accuracy",
    "afl_round",
    "aggregate",
    "client_update",
    "composite_score",
    "eod",
    "fedavg_round",
    "fedval_round",
    "generate_synthetic",
    "gradient",
    "load_csv",
    "loss",
    "make_weights",
    "partition",
    "predict_proba",
    "preset",
    "preset_names",
    "project_simplex",
    "qfedavg_round",
    "qfedsgd_round",
    "rank_update",
    "read_jsonl",
    "run_experiment",
    "run_sweep",
    "score_clients",
    "skew",
    "spd",
    "split_validation",
    "temp_aggregate",
]
