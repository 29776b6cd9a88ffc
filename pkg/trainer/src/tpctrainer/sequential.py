"""Stage-by-stage training across the half-iteration schedule.

Each stage t asks the decoder CLI for a fresh teacher dataset generated
with the scorers from stages 1..t-1 deployed, trains scorer t on it,
and finally writes the full weight file.  The decoder is driven purely
through its command line and file formats.
"""

import logging
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple

from .model import write_weight_file
from .records import read_records
from .train import TrainConfig, train_halfiter_model

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    """Datagen or training failure, tagged with the half-iteration."""

    def __init__(self, t, message):
        super().__init__(f"half-iteration t={t}: {message}")
        self.t = t


@dataclass
class SequentialConfig:
    preset: str
    p: int
    n_t: int
    frames: int
    out_dir: str
    snr_db: float = 3.0
    training_snr: Optional[Tuple[float, float]] = (2.95, 3.05)
    seed: int = 0
    decoder_cmd: Sequence[str] = ("tpclab",)
    train: TrainConfig = field(default_factory=TrainConfig)


def _datagen_command(cfg, t, dataset, weights):
    cmd = list(cfg.decoder_cmd) + [
        "gen-training-data",
        "--preset", cfg.preset,
        "--p", str(cfg.p),
        "--n-t", str(cfg.n_t),
        "--t", str(t),
        "--frames", str(cfg.frames),
        "--seed", str(cfg.seed + 1000 * t),
        "--snr", str(cfg.snr_db),
        "--out", str(dataset),
    ]
    if cfg.training_snr is None:
        cmd += ["--training-snr", ""]
    else:
        cmd += ["--training-snr", f"{cfg.training_snr[0]},{cfg.training_snr[1]}"]
    if weights is not None:
        cmd += ["--weights", str(weights)]
    return cmd


def train_sequential(cfg):
    """Run the full schedule; returns the final weight file path."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_half = 2 * cfg.n_t
    groups = []
    n = None
    partial = out_dir / "scorers_partial.tpcw"
    for t in range(1, n_half + 1):
        dataset = out_dir / f"records_t{t}.jsonl"
        weights = None
        if t > 1:
            write_weight_file(partial, cfg.p, n, cfg.n_t,
                              trained_half_iters=t - 1, groups=groups)
            weights = partial
        cmd = _datagen_command(cfg, t, dataset, weights)
        log.info("stage t=%d datagen: %s", t, " ".join(cmd))
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-3:]
            raise StageError(t, "training-data generation failed: "
                             + " | ".join(tail))
        records = read_records(dataset)
        if not records:
            raise StageError(t, f"dataset {dataset} came back empty")
        n = records[0]["l"].shape[0]
        stage_cfg = TrainConfig(**{**cfg.train.__dict__,
                                   "seed": cfg.train.seed + t})
        try:
            ckpt = train_halfiter_model(records, cfg.p, stage_cfg)
        except ValueError as exc:
            raise StageError(t, f"training failed: {exc}") from exc
        log.info("stage t=%d: best val loss %.4g at epoch %d",
                 t, ckpt.val_loss, ckpt.epoch)
        groups.append(ckpt.params)
    final = out_dir / "scorers.tpcw"
    write_weight_file(final, cfg.p, n, cfg.n_t,
                      trained_half_iters=n_half, groups=groups)
    return str(final)
