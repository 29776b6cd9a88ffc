"""Paired comparison of rollback policies at one operating point.

Fits Top-1 and Top-2 thresholds on a small common-random-numbers block,
then decodes the same evaluation frames under always-keep, oracle, and
the fitted policies.  Reports BER with Wilson intervals plus the paired
z statistic of each policy against always-keep.

    python3 scripts/policy_comparison.py --preset ebch_256_239 \
        --snr 3.0 --frames 5000 --fit-frames 64 --budget 25
"""

import argparse
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from tpclab.channel import ChannelParams, tpc_extract_info  # noqa: E402
from tpclab.harness import (PolicyConfig, SimConfig, channel_llr,  # noqa: E402
                            decode_tpc, draw_frames, product_spec,
                            wilson_interval)
from tpclab.thresholds import optimize_thresholds, save_threshold_table  # noqa: E402


def frame_errors(cfg, spec, n_frames, block):
    sigma = ChannelParams(cfg.es_n0_db[0]).sigma
    errs = np.empty(n_frames, dtype=np.int64)
    for s in range(0, n_frames, block):
        idx = list(range(s, min(s + block, n_frames)))
        u, x, z, _ = draw_frames(cfg, spec, idx)
        gamma = channel_llr(x, z, np.full(len(idx), sigma))
        need = cfg.policy.kind in ("oracle", "map_assisted")
        l, _, _ = decode_tpc(gamma, cfg, spec=spec,
                             true_blocks=x if need else None)
        errs[idx] = (tpc_extract_info(l, spec) != u).sum(axis=(1, 2))
    return errs


def paired_z(a, b):
    d = a.astype(np.float64) - b.astype(np.float64)
    s = d.std(ddof=1)
    return d.mean() / (s / np.sqrt(d.size)) if s > 0 else 0.0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="ebch_256_239")
    ap.add_argument("--snr", type=float, default=3.0)
    ap.add_argument("--frames", type=int, default=5000)
    ap.add_argument("--fit-frames", type=int, default=64)
    ap.add_argument("--budget", type=int, default=25)
    ap.add_argument("--n-t", type=int, default=4)
    ap.add_argument("--p", type=int, default=6)
    ap.add_argument("--seed", type=int, default=101)
    ap.add_argument("--fit-seed", type=int, default=77)
    ap.add_argument("--save-thresholds", help="prefix for fitted table files")
    args = ap.parse_args()

    fit_cfg = SimConfig(preset=args.preset, es_n0_db=(args.snr,), n_t=args.n_t,
                        p=args.p, frames=args.fit_frames, target_errors=0,
                        master_seed=args.fit_seed)
    fitted = {}
    for kind in ("top1", "top2"):
        t0 = time.perf_counter()
        mu, ber, evals = optimize_thresholds(kind, fit_cfg, args.budget)
        fitted[kind] = mu
        print(f"{kind}: fit ber {ber:.3e} in {evals} evals "
              f"({time.perf_counter() - t0:.0f}s), mu {np.array2string(mu, precision=3)}",
              file=sys.stderr)
        if args.save_thresholds:
            path = f"{args.save_thresholds}_{kind}.txt"
            save_threshold_table(path, kind, mu,
                                 meta={"snr_db": args.snr, "ber": ber})
            print(f"wrote {path}", file=sys.stderr)

    spec = product_spec(args.preset)
    policies = [("always_keep", PolicyConfig(kind="always_keep")),
                ("oracle", PolicyConfig(kind="oracle")),
                ("top1", PolicyConfig(kind="top1", mu1=tuple(fitted["top1"]))),
                ("top2", PolicyConfig(kind="top2", mu2=tuple(fitted["top2"])))]
    errs = {}
    for name, pol in policies:
        cfg = SimConfig(preset=args.preset, es_n0_db=(args.snr,),
                        n_t=args.n_t, p=args.p, policy=pol,
                        frames=args.frames, target_errors=0,
                        master_seed=args.seed)
        t0 = time.perf_counter()
        errs[name] = frame_errors(cfg, spec, args.frames,
                                  32 if args.preset == "ebch_256_239" else 2048)
        print(f"{name}: decoded in {time.perf_counter() - t0:.0f}s",
              file=sys.stderr)

    bits = args.frames * spec.k_c * spec.k_r
    print(f"policy,ber,ci_low,ci_high,z_vs_always_keep")
    for name, _ in policies:
        e = int(errs[name].sum())
        lo, hi = wilson_interval(e, bits)
        z = paired_z(errs["always_keep"], errs[name])
        print(f"{name},{e / bits:.4e},{lo:.3e},{hi:.3e},{z:+.2f}")


if __name__ == "__main__":
    main()
