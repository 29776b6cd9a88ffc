"""Sweep BER vs Es/N0 for one or more rollback policies on shared noise.

Writes one CSV per policy next to --out-prefix and prints a combined
table.  All policies see identical channel realizations (same master
seed), so curve gaps are paired Monte-Carlo differences.

    python3 scripts/ber_curve.py --preset ehamming_8_4 --snr 0:4:0.5 \
        --policies always_keep,oracle --frames 20000 --out-prefix runs/toy
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from tpclab.harness import PolicyConfig, SimConfig, run_ber  # noqa: E402
from tpclab.thresholds import load_threshold_table  # noqa: E402


def parse_grid(text):
    if ":" in text:
        lo, hi, step = (float(v) for v in text.split(":"))
        return tuple(np.round(np.arange(lo, hi + step / 2, step), 6))
    return tuple(float(v) for v in text.split(","))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="ehamming_8_4")
    ap.add_argument("--snr", default="0:4:0.5", help="lo:hi:step or comma list, dB")
    ap.add_argument("--policies", default="always_keep,oracle")
    ap.add_argument("--frames", type=int, default=20000)
    ap.add_argument("--target-errors", type=int, default=500)
    ap.add_argument("--n-t", type=int, default=4)
    ap.add_argument("--p", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--thresholds", help="threshold table for top1/top2 policies")
    ap.add_argument("--weights", help="weight file for the neural policy")
    ap.add_argument("--out-prefix", default="ber")
    args = ap.parse_args()

    snrs = parse_grid(args.snr)
    table = {}
    for kind in args.policies.split(","):
        pol = PolicyConfig(kind=kind, weights_path=args.weights)
        if args.thresholds and kind in ("top1", "top2"):
            tkind, mu, _ = load_threshold_table(args.thresholds)
            if tkind != kind:
                ap.error(f"threshold table is for {tkind}, not {kind}")
            setattr(pol, "mu1" if kind == "top1" else "mu2", tuple(mu))
        cfg = SimConfig(preset=args.preset, es_n0_db=snrs, n_t=args.n_t,
                        p=args.p, policy=pol, frames=args.frames,
                        target_errors=args.target_errors,
                        master_seed=args.seed, workers=args.workers)
        out = f"{args.out_prefix}_{kind}.csv"
        results = run_ber(cfg, csv_path=out)
        table[kind] = results
        print(f"wrote {out}", file=sys.stderr)

    kinds = list(table)
    print("snr_db," + ",".join(kinds))
    for i, snr in enumerate(snrs):
        row = [f"{snr:g}"] + [f"{table[k][i].ber:.4e}" for k in kinds]
        print(",".join(row))


if __name__ == "__main__":
    main()
