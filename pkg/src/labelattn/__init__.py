"""Label-attention networks for next-event label-set prediction."""

__version__ = "0.1.0"

from .checkpoint import load_checkpoint, save_checkpoint
from .dataio import (
    EventRecord,
    SplitDataset,
    Vocabularies,
    WindowSample,
    dataset_stats,
    fit_vocabularies,
    group_events,
    make_windows,
    parse_csv,
    split_chronological,
    write_csv,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    DegenerateLabelError,
    LabelAttnError,
    ShapeError,
    TrainingDivergedError,
)
from .estimator import LabelSetPredictor
from .metrics import evaluate, fit_thresholds, micro_macro_auc, micro_macro_f1, rank_table
from .model import (
    VARIANTS,
    ModelConfig,
    build_model,
    export_attention,
    frequency_scores,
    predict_scores,
)
from .synth import PlantedGraph, bayes_optimal_scores, chain_graph, generate, random_parent_graph
from .tensor import Tensor, no_grad
from .train import TrainConfig, fit_predictor, run_multiseed, train_model

__all__ = [
    "__version__",
    "Tensor",
    "no_grad",
    "LabelAttnError",
    "ShapeError",
    "ConfigError",
    "DataError",
    "DegenerateLabelError",
    "TrainingDivergedError",
    "CheckpointError",
    "EventRecord",
    "WindowSample",
    "SplitDataset",
    "Vocabularies",
    "parse_csv",
    "write_csv",
    "group_events",
    "make_windows",
    "split_chronological",
    "fit_vocabularies",
    "dataset_stats",
    "ModelConfig",
    "VARIANTS",
    "build_model",
    "predict_scores",
    "frequency_scores",
    "export_attention",
    "TrainConfig",
    "fit_predictor",
    "train_model",
    "run_multiseed",
    "micro_macro_auc",
    "micro_macro_f1",
    "fit_thresholds",
    "evaluate",
    "rank_table",
    "save_checkpoint",
    "load_checkpoint",
    "PlantedGraph",
    "generate",
    "bayes_optimal_scores",
    "chain_graph",
    "random_parent_graph",
    "LabelSetPredictor",
]
