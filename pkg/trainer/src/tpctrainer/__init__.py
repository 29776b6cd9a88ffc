"""Training side of the rollback scorer: datasets in, weight files out."""

from .fixtures import export_fixtures, replay_fixtures
from .model import (HalfIterScorer, from_group, init_scorer,
                    read_weight_file, scorer_from_group, to_group,
                    write_weight_file)
from .records import assemble_dataset, build_j, read_records
from .sequential import SequentialConfig, StageError, train_sequential
from .train import Checkpoint, TrainConfig, dataset_accuracy, train_halfiter_model

__all__ = [
    "Checkpoint", "HalfIterScorer", "SequentialConfig", "StageError",
    "TrainConfig", "assemble_dataset", "build_j", "dataset_accuracy",
    "export_fixtures", "from_group", "init_scorer", "read_records",
    "read_weight_file", "replay_fixtures", "scorer_from_group", "to_group",
    "train_halfiter_model", "train_sequential", "write_weight_file",
]
