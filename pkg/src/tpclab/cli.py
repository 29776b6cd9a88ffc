"""Command-line front end.

Subcommands: simulate, optimize-thresholds, gen-training-data,
eval-model, export-fixtures.  Each reads an optional YAML config whose
keys mirror SimConfig, then applies flag overrides.  Exit code 0 on
success, 2 on configuration errors (the offending key is named), 1 on
I/O or runtime failures.
"""

import argparse
import dataclasses
import json
import sys

import numpy as np
import yaml

from .harness import (ConfigError, PolicyConfig, SimConfig,
                      eval_model_accuracy, gen_training_data, run_ber,
                      validate_config, write_run_manifest)
from .thresholds import (load_threshold_table, optimize_thresholds,
                         save_threshold_table)

_SIM_KEYS = {f.name for f in dataclasses.fields(SimConfig)}
_POLICY_KEYS = {f.name for f in dataclasses.fields(PolicyConfig)}


def load_config(path):
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError("config", f"{path} must hold a mapping")
    for key in raw:
        if key not in _SIM_KEYS:
            raise ConfigError(key, "unknown configuration key")
    pol = raw.get("policy")
    if pol is not None:
        if not isinstance(pol, dict):
            raise ConfigError("policy", "must be a mapping")
        for key in pol:
            if key not in _POLICY_KEYS:
                raise ConfigError(f"policy.{key}", "unknown configuration key")
    return SimConfig(**raw)


def apply_overrides(cfg, args):
    updates = {}
    if getattr(args, "snr", None) is not None:
        updates["es_n0_db"] = tuple(float(s) for s in args.snr.split(","))
    for flag, key in (("frames", "frames"), ("seed", "master_seed"),
                      ("workers", "workers"), ("preset", "preset"),
                      ("p", "p"), ("n_t", "n_t"),
                      ("target_errors", "target_errors"),
                      ("block_frames", "block_frames")):
        val = getattr(args, flag, None)
        if val is not None:
            updates[key] = val
    if getattr(args, "uncoded", False):
        updates["uncoded_reference"] = True
    pol = dataclasses.replace(cfg.policy)
    if getattr(args, "policy", None) is not None:
        pol.kind = args.policy
    if getattr(args, "weights", None) is not None:
        pol.weights_path = args.weights
    if getattr(args, "thresholds", None) is not None:
        kind, mu, _ = load_threshold_table(args.thresholds)
        if getattr(args, "policy", None) is None:
            pol.kind = kind
        if pol.kind != kind or kind not in ("top1", "top2"):
            raise ConfigError("thresholds",
                              f"table is for {kind!r}, policy is {pol.kind!r}")
        if kind == "top1":
            pol.mu1 = tuple(mu)
        else:
            pol.mu2 = tuple(mu)
    updates["policy"] = pol
    return dataclasses.replace(cfg, **updates)


def _common_flags(sp, *, policy=True):
    sp.add_argument("--config", help="YAML config file")
    sp.add_argument("--snr", help="comma-separated Es/N0 points in dB")
    sp.add_argument("--frames", type=int)
    sp.add_argument("--seed", type=int, help="master seed")
    sp.add_argument("--workers", type=int)
    sp.add_argument("--preset")
    sp.add_argument("--p", type=int)
    sp.add_argument("--n-t", dest="n_t", type=int)
    sp.add_argument("--target-errors", dest="target_errors", type=int)
    sp.add_argument("--block-frames", dest="block_frames", type=int)
    if policy:
        sp.add_argument("--policy", choices=["always_keep", "oracle", "top1",
                                             "top2", "map_assisted", "neural"])
        sp.add_argument("--weights", help="scorer weight file")
        sp.add_argument("--thresholds", help="threshold table file")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="tpclab",
        description="Turbo product code decoding laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="Monte-Carlo BER measurement")
    _common_flags(sp)
    sp.add_argument("--uncoded", action="store_true",
                    help="uncoded BPSK reference instead of decoding")
    sp.add_argument("--out", help="CSV output path (stdout table otherwise)")

    sp = sub.add_parser("optimize-thresholds",
                        help="fit Top-1/Top-2 rollback thresholds")
    _common_flags(sp, policy=False)
    sp.add_argument("--kind", choices=["top1", "top2"], required=True)
    sp.add_argument("--budget", type=int, default=60,
                    help="objective evaluation budget")
    sp.add_argument("--out", required=True, help="threshold table output path")

    sp = sub.add_parser("gen-training-data",
                        help="oracle-labeled component records")
    _common_flags(sp)
    sp.add_argument("--t", type=int, required=True,
                    help="teacher half-iteration")
    sp.add_argument("--out", required=True, help="JSONL output path")
    sp.add_argument("--training-snr", default="2.95,3.05",
                    help="per-frame SNR range lo,hi in dB (empty to disable)")

    sp = sub.add_parser("eval-model",
                        help="scorer accuracy against stored labels")
    sp.add_argument("--weights", required=True)
    sp.add_argument("--dataset", required=True)

    sp = sub.add_parser("export-fixtures",
                        help="golden forward-pass records, or replay them")
    sp.add_argument("--weights", required=True)
    sp.add_argument("--out")
    sp.add_argument("--count", type=int, default=128)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--replay", help="fixture file to replay instead of exporting")
    sp.add_argument("--rtol", type=float, default=1e-4)
    return ap


def cmd_simulate(args):
    cfg = load_config(args.config) if args.config else SimConfig()
    cfg = apply_overrides(cfg, args)
    validate_config(cfg)
    results = run_ber(cfg, csv_path=args.out)
    if not args.out:
        print("snr_db,frames,bits,bit_errors,ber,ci_low,ci_high")
        for r in results:
            print(f"{r.snr_db!r},{r.frames},{r.bits},{r.bit_errors},"
                  f"{r.ber!r},{r.ci_low!r},{r.ci_high!r}")
    else:
        for r in results:
            print(f"snr {r.snr_db:+.2f} dB: ber {r.ber:.6g} "
                  f"[{r.ci_low:.3g}, {r.ci_high:.3g}] "
                  f"({r.frames} frames, {r.bit_errors} errors)")
    return 0


def cmd_optimize_thresholds(args):
    cfg = load_config(args.config) if args.config else SimConfig()
    cfg = apply_overrides(cfg, args)
    validate_config(cfg)
    mu, ber, evals = optimize_thresholds(args.kind, cfg, args.budget)
    save_threshold_table(args.out, args.kind, mu,
                         meta={"snr_db": cfg.es_n0_db[0], "ber": ber,
                               "frames": cfg.frames, "seed": cfg.master_seed,
                               "evals": evals})
    print(f"{args.kind}: ber {ber:.6g} after {evals} evaluations")
    for t, v in enumerate(mu, start=1):
        print(f"  mu[{t}] = {v:.6g}")
    return 0


def cmd_gen_training_data(args):
    cfg = load_config(args.config) if args.config else SimConfig()
    cfg = apply_overrides(cfg, args)
    if args.training_snr:
        lo, hi = (float(v) for v in args.training_snr.split(","))
        cfg = dataclasses.replace(cfg, training_snr=(lo, hi))
    validate_config(cfg)
    weights = None
    if cfg.policy.weights_path:
        from .model import load_weights
        weights = load_weights(cfg.policy.weights_path)
    n, counts = gen_training_data(cfg, args.t, args.out, weights=weights)
    print(f"wrote {n} records to {args.out} "
          f"(labels: keep {counts[1]}, rollback {counts[0]})")
    return 0


def cmd_eval_model(args):
    from .model import load_weights
    weights = load_weights(args.weights)
    acc, per_t = eval_model_accuracy(weights, args.dataset)
    print(f"decision accuracy {acc:.4f}")
    for t, (hits, total) in sorted(per_t.items()):
        print(f"  t={t}: {hits}/{total} = {hits / total:.4f}")
    return 0


def _synthetic_fixture_inputs(dims, n_half, count, seed):
    """Deterministic (t, J) pairs covering all half-iterations and g values
    including the g=1 and fully populated extremes."""
    from .model import build_inputs_batch
    rng = np.random.default_rng(seed)
    slot = dims.slot_count
    g_cycle = [1, slot] + list(range(2, slot))
    out = []
    for i in range(count):
        t = 1 + i % n_half
        g = np.array([g_cycle[i % len(g_cycle)]])
        llr_arr = rng.standard_normal((1, dims.n))
        bits = rng.integers(0, 2, size=(1, slot, dims.n), dtype=np.uint8)
        j = build_inputs_batch(llr_arr, bits, g, slot)[0]
        out.append((t, j))
    return out


def cmd_export_fixtures(args):
    from .model import forward, load_weights
    weights = load_weights(args.weights)
    dims = weights.dims
    if args.replay:
        worst = 0.0
        bad = 0
        n_rec = 0
        with open(args.replay) as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                j = np.array(rec["j"]).reshape(dims.n, dims.features)
                got = forward(j, weights.half_iter(int(rec["t"])))
                want = float(rec["v"])
                err = abs(got - want) / max(1e-12, abs(want)) if want else abs(got)
                worst = max(worst, err)
                bad += err > args.rtol
                n_rec += 1
        print(f"replayed {n_rec} fixtures: worst relative error {worst:.3g}, "
              f"{bad} beyond rtol {args.rtol:g}")
        return 0 if bad == 0 else 1
    if not args.out:
        raise ConfigError("out", "export needs --out (or use --replay)")
    pairs = _synthetic_fixture_inputs(dims, 2 * weights.n_t, args.count,
                                      args.seed)
    with open(args.out, "w") as fh:
        for t, j in pairs:
            v = forward(j, weights.half_iter(t))
            fh.write(json.dumps({"t": t, "j": [float(x) for x in j.reshape(-1)],
                                 "v": float(v)}) + "\n")
    print(f"wrote {len(pairs)} fixtures to {args.out}")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "optimize-thresholds": cmd_optimize_thresholds,
    "gen-training-data": cmd_gen_training_data,
    "eval-model": cmd_eval_model,
    "export-fixtures": cmd_export_fixtures,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
