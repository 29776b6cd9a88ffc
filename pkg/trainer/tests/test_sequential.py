"""End-to-end schedule training through the decoder command line."""

import numpy as np
import pytest

from tpctrainer.model import read_weight_file
from tpctrainer.records import read_records
from tpctrainer.sequential import SequentialConfig, StageError, train_sequential
from tpctrainer.train import TrainConfig


def toy_plan(decoder_cli, out_dir, **overrides):
    base = dict(preset="ehamming_8_4", p=3, n_t=1, frames=64,
                out_dir=str(out_dir), snr_db=-2.0, training_snr=None,
                seed=31, decoder_cmd=(decoder_cli,),
                train=TrainConfig(epochs=3, lr=1e-3, seed=7))
    base.update(overrides)
    return SequentialConfig(**base)


def test_two_stage_toy_schedule(decoder_cli, tmp_path):
    path = train_sequential(toy_plan(decoder_cli, tmp_path))
    meta, groups = read_weight_file(path)
    assert meta == {"p": 3, "n": 8, "n_t": 1, "trained_half_iters": 2}
    assert len(groups) == 2
    assert any(not np.array_equal(groups[0][k], groups[1][k])
               for k in groups[0])
    for t in (1, 2):
        records = read_records(tmp_path / f"records_t{t}.jsonl")
        assert records and all(int(r["t"]) == t for r in records)


def test_datagen_failure_names_the_stage(decoder_cli, tmp_path):
    plan = toy_plan(decoder_cli, tmp_path, frames=0)
    with pytest.raises(StageError, match="t=1") as err:
        train_sequential(plan)
    assert err.value.t == 1
