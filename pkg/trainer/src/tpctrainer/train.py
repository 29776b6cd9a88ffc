"""Supervised training of one half-iteration scorer.

Binary cross-entropy on keep labels, Adam with a plateau-halving
learning-rate schedule, best-validation-loss checkpointing.  Class
weighting is available for the heavily keep-skewed datasets that high
SNR teachers produce, but stays off unless asked for.
"""

import copy
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch
from torch.nn import functional as F

from .model import init_scorer, to_group
from .records import assemble_dataset

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 2500
    lr: float = 1e-4
    min_lr: float = 1e-6
    plateau_patience: int = 50
    plateau_factor: float = 0.5
    batch_size: int = 256
    val_fraction: float = 0.1
    seed: int = 0
    class_weight: Optional[float] = None

    def __post_init__(self):
        if not self.min_lr < self.lr:
            raise ValueError(
                f"learning-rate floor {self.min_lr} must sit below the "
                f"initial rate {self.lr}")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")


@dataclass
class Checkpoint:
    """Best state seen while training one scorer."""

    t: int
    params: dict = field(repr=False)
    val_loss: float
    epoch: int


def _loss(model, x, v, weight):
    scores = model(x)
    w = None
    if weight is not None:
        w = torch.where(v > 0.5, torch.ones_like(v), torch.full_like(v, weight))
    return F.binary_cross_entropy_with_logits(scores, v, weight=w)


def train_halfiter_model(records, p, cfg):
    """Fit one scorer on a single-t record list; returns a Checkpoint.

    Validation is a deterministic 10% split (seeded shuffle); the kept
    parameters are the ones with the lowest validation loss.  With zero
    epochs the initialization itself is checkpointed.
    """
    inputs, labels, t, counts = assemble_dataset(records, p)
    n = inputs.shape[1]
    log.info("t=%d: %d records, labels 0/1 = %d/%d", t, len(labels), *counts)
    if counts[0] == 0 or counts[1] == 0:
        warnings.warn(
            f"t={t}: all {len(labels)} labels are {int(counts[0] == 0)}; "
            f"training proceeds but the scorer cannot learn a boundary")

    torch.manual_seed(cfg.seed)
    model = init_scorer(p, n, cfg.seed)
    x = torch.from_numpy(inputs)
    v = torch.from_numpy(labels)
    n_total = len(labels)
    n_val = int(round(cfg.val_fraction * n_total))
    if cfg.val_fraction > 0 and n_total > 1:
        n_val = min(max(n_val, 1), n_total - 1)
    else:
        n_val = 0
    perm = torch.from_numpy(
        np.random.default_rng(cfg.seed).permutation(n_total))
    val_idx, train_idx = perm[:n_val], perm[n_val:]

    def val_loss():
        idx = val_idx if n_val else train_idx
        with torch.no_grad():
            return float(_loss(model, x[idx], v[idx], cfg.class_weight))

    best = Checkpoint(t=t, params=copy.deepcopy(to_group(model)),
                      val_loss=val_loss(), epoch=0)
    if cfg.epochs == 0:
        return best

    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    sched = torch.optim.lr_scheduler.ReduceLROnPlateau(
        opt, factor=cfg.plateau_factor, patience=cfg.plateau_patience,
        min_lr=cfg.min_lr)
    shuffler = torch.Generator().manual_seed(cfg.seed + 1)
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        order = train_idx[torch.randperm(len(train_idx), generator=shuffler)]
        for s in range(0, len(order), cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            opt.zero_grad()
            loss = _loss(model, x[idx], v[idx], cfg.class_weight)
            loss.backward()
            opt.step()
        model.eval()
        current = val_loss()
        sched.step(current)
        if current < best.val_loss:
            best = Checkpoint(t=t, params=copy.deepcopy(to_group(model)),
                              val_loss=current, epoch=epoch)
    return best


def dataset_accuracy(model, records, p):
    """Fraction of records whose thresholded score matches the label."""
    inputs, labels, _, _ = assemble_dataset(records, p)
    with torch.no_grad():
        scores = model(torch.from_numpy(inputs).to(
            next(model.parameters()).dtype))
    pred = (scores > 0).numpy()
    return float((pred == (labels > 0.5)).mean())
