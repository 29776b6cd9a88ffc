"""Training-loop behavior on controlled synthetic datasets."""

import numpy as np
import pytest

from tpctrainer.model import init_scorer, scorer_from_group, to_group
from tpctrainer.train import TrainConfig, dataset_accuracy, train_halfiter_model

P, N = 3, 8


def separable_records(count=100, seed=5):
    """Keep rows carry the hard decision of l, rollback rows its complement."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        v = i % 2
        l = rng.standard_normal(N) * 2.0
        hard = (l < 0).astype(np.uint8)
        cand = hard if v else 1 - hard
        out.append({"t": 1, "l": l, "candidates": [cand],
                    "correlations": [float(np.abs(l).sum())], "v": v,
                    "frame_index": i, "vector_index": 0})
    return out


def test_separable_dataset_reaches_full_accuracy():
    records = separable_records(100)
    cfg = TrainConfig(epochs=200, lr=5e-3, seed=2)
    ckpt = train_halfiter_model(records, P, cfg)
    model = scorer_from_group(P, N, ckpt.params).eval()
    assert dataset_accuracy(model, records, P) == 1.0
    assert 0 < ckpt.epoch <= 200


def test_zero_epochs_checkpoints_initialization():
    records = separable_records(40)
    cfg = TrainConfig(epochs=0, seed=9)
    ckpt = train_halfiter_model(records, P, cfg)
    assert ckpt.epoch == 0 and ckpt.t == 1
    init = to_group(init_scorer(P, N, seed=9))
    for name, arr in init.items():
        np.testing.assert_array_equal(ckpt.params[name], arr)


def test_empty_dataset_raises():
    with pytest.raises(ValueError, match="empty"):
        train_halfiter_model([], P, TrainConfig(epochs=1))


def test_mixed_half_iterations_raise():
    records = separable_records(10)
    records[3] = dict(records[3], t=2)
    with pytest.raises(ValueError, match="mix"):
        train_halfiter_model(records, P, TrainConfig(epochs=1))


def test_single_class_warns_but_trains():
    records = [dict(r, v=1) for r in separable_records(30)]
    with pytest.warns(UserWarning, match="labels are 1"):
        ckpt = train_halfiter_model(records, P, TrainConfig(epochs=1, seed=0))
    assert ckpt.t == 1


def test_same_seed_reproduces_checkpoint():
    records = separable_records(60)
    cfg = TrainConfig(epochs=3, lr=1e-3, seed=4)
    a = train_halfiter_model(records, P, cfg)
    b = train_halfiter_model(records, P, cfg)
    assert a.val_loss == b.val_loss and a.epoch == b.epoch
    for name in a.params:
        np.testing.assert_array_equal(a.params[name], b.params[name])


def test_class_weight_changes_the_fit():
    records = separable_records(60)
    plain = train_halfiter_model(records, P, TrainConfig(epochs=2, seed=1))
    weighted = train_halfiter_model(
        records, P, TrainConfig(epochs=2, seed=1, class_weight=5.0))
    assert any(not np.array_equal(plain.params[k], weighted.params[k])
               for k in plain.params)


@pytest.mark.parametrize("kwargs", [
    {"lr": 1e-7},                       # floor above the initial rate
    {"val_fraction": 1.0},
    {"epochs": -1},
])
def test_config_invariants(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)
