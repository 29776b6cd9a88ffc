"""Command line front end for the scorer training pipeline."""

import argparse
import logging
import sys

from .fixtures import export_fixtures
from .records import read_records
from .sequential import SequentialConfig, StageError, train_sequential
from .train import TrainConfig, train_halfiter_model
from .model import write_weight_file


def _train_flags(sp):
    sp.add_argument("--epochs", type=int, default=2500)
    sp.add_argument("--lr", type=float, default=1e-4)
    sp.add_argument("--batch-size", dest="batch_size", type=int, default=256)
    sp.add_argument("--train-seed", dest="train_seed", type=int, default=0)
    sp.add_argument("--class-weight", dest="class_weight", type=float,
                    default=None, help="loss weight for rollback labels")


def _train_config(args):
    return TrainConfig(epochs=args.epochs, lr=args.lr,
                       batch_size=args.batch_size, seed=args.train_seed,
                       class_weight=args.class_weight)


def build_parser():
    ap = argparse.ArgumentParser(prog="tpctrain")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train", help="fit one scorer on an existing dataset")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n-t", dest="n_t", type=int, required=True)
    sp.add_argument("--out", required=True, help="weight file output path")
    _train_flags(sp)

    sp = sub.add_parser("train-sequential",
                        help="full schedule through the decoder CLI")
    sp.add_argument("--preset", required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n-t", dest="n_t", type=int, required=True)
    sp.add_argument("--frames", type=int, required=True)
    sp.add_argument("--out-dir", dest="out_dir", required=True)
    sp.add_argument("--snr", type=float, default=3.0)
    sp.add_argument("--training-snr", dest="training_snr", default="2.95,3.05",
                    help="SNR window a,b per frame; empty for the fixed --snr")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--decoder", default="tpclab", help="decoder CLI command")
    _train_flags(sp)

    sp = sub.add_parser("export-fixtures",
                        help="score synthetic inputs for decoder replay")
    sp.add_argument("--weights", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--count", type=int, default=128)
    sp.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            records = read_records(args.dataset)
            ckpt = train_halfiter_model(records, args.p, _train_config(args))
            n = records[0]["l"].shape[0]
            write_weight_file(args.out, args.p, n, args.n_t,
                              trained_half_iters=ckpt.t, groups=[ckpt.params])
            print(f"t={ckpt.t}: best val loss {ckpt.val_loss:.4g} at epoch "
                  f"{ckpt.epoch}; wrote {args.out}")
        elif args.command == "train-sequential":
            window = None
            if args.training_snr.strip():
                lo, hi = (float(v) for v in args.training_snr.split(","))
                window = (lo, hi)
            cfg = SequentialConfig(
                preset=args.preset, p=args.p, n_t=args.n_t,
                frames=args.frames, out_dir=args.out_dir, snr_db=args.snr,
                training_snr=window, seed=args.seed,
                decoder_cmd=args.decoder.split(),
                train=_train_config(args))
            path = train_sequential(cfg)
            print(f"wrote {path}")
        else:
            n_rows = export_fixtures(args.weights, args.out,
                                     count=args.count, seed=args.seed)
            print(f"wrote {n_rows} fixtures to {args.out}")
    except (StageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
