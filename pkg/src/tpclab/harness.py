"""Monte-Carlo BER harness: frame pipeline, block scheduling, training data.

Frames are the unit of both determinism and parallelism.  Every frame is
reproduced entirely from (master_seed, frame_index): information bits
first, then the per-frame SNR draw when training mode asks for one, then
the noise matrix in row-major order.  The same noise realization is
reused for every SNR point of a run, so BER curves are paired across SNR
and across policy configurations sharing a seed.

Blocks of frames are decoded independently (possibly by worker
processes) and merged in block order; early stopping is decided on the
merged, ordered totals, so the emitted numbers cannot depend on the
worker count.
"""

import dataclasses
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .bch import make_bch_spec
from .channel import (ChannelParams, ProductCodeSpec, bpsk, frame_rng,
                      standard_normal, tpc_encode, tpc_extract_info)
from .kernels import (DecodeOptions, half_iteration_batch,
                      map_half_iteration_batch)
from .pyndiah import default_schedule
from .rollback import make_policy

WILSON_Z = float(ndtri(0.975))

CODE_PRESETS = {
    "ebch_256_239": (8, 2),       # extended BCH(256,239), t=2
    "ehamming_16_11": (4, 1),     # extended Hamming(16,11)
    "ehamming_8_4": (3, 1),       # extended Hamming(8,4) toy
}


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class PolicyConfig:
    kind: str = "always_keep"
    mu1: tuple = None
    mu2: tuple = None
    weights_path: str = None


@dataclass
class SimConfig:
    preset: str = "ebch_256_239"
    es_n0_db: tuple = (3.0,)
    n_t: int = 4
    p: int = 6
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    component_decoder: str = "chase_pyndiah"
    frames: int = 1000
    target_errors: int = 200
    master_seed: int = 0
    workers: int = 1
    block_frames: int = 0          # 0 picks a preset-appropriate default
    patterns_kind: str = "landslide"
    beta_sign: str = "decided"
    extrinsic_norm: str = "updated"
    uncoded_reference: bool = False
    training_snr: tuple = None     # (lo, hi) dB, drawn per frame when set

    def __post_init__(self):
        if isinstance(self.policy, dict):
            self.policy = PolicyConfig(**self.policy)
        if isinstance(self.es_n0_db, (int, float)):
            self.es_n0_db = (float(self.es_n0_db),)
        self.es_n0_db = tuple(float(s) for s in self.es_n0_db)
        for name in ("mu1", "mu2"):
            val = getattr(self.policy, name)
            if val is not None:
                setattr(self.policy, name, tuple(float(v) for v in val))
        if self.training_snr is not None:
            self.training_snr = tuple(float(s) for s in self.training_snr)


def validate_config(cfg):
    if cfg.preset not in CODE_PRESETS:
        raise ConfigError("preset", f"unknown preset {cfg.preset!r}; "
                          f"choose from {sorted(CODE_PRESETS)}")
    if cfg.n_t < 1:
        raise ConfigError("n_t", "need at least one full iteration")
    if cfg.p < 1:
        raise ConfigError("p", "need at least one least-reliable position")
    if 2 ** cfg.p > 128:
        raise ConfigError("p", "test-pattern count 2^p capped at 128")
    if cfg.frames < 1:
        raise ConfigError("frames", "frame budget must be positive")
    if not cfg.es_n0_db:
        raise ConfigError("es_n0_db", "need at least one SNR point")
    if cfg.workers < 1:
        raise ConfigError("workers", "worker count must be positive")
    if cfg.component_decoder not in ("chase_pyndiah", "exact_map"):
        raise ConfigError("component_decoder",
                          f"unknown decoder {cfg.component_decoder!r}")
    if cfg.policy.kind not in ("always_keep", "oracle", "top1", "top2",
                               "map_assisted", "neural"):
        raise ConfigError("policy.kind", f"unknown policy {cfg.policy.kind!r}")
    if cfg.component_decoder == "exact_map":
        spec = product_spec(cfg.preset)
        if spec.row_code.k > 16:
            raise ConfigError("component_decoder",
                              "exact_map enumerates the codebook; use a toy preset")
    return cfg


def product_spec(preset):
    m, t = CODE_PRESETS[preset]
    inner = make_bch_spec(m, t, extended=True)
    return ProductCodeSpec(inner, inner)


def decode_options(cfg):
    return DecodeOptions(beta_sign=cfg.beta_sign,
                         extrinsic_norm=cfg.extrinsic_norm)


def build_policy(cfg, spec):
    pol = cfg.policy
    n_half = 2 * cfg.n_t
    weights = None
    if pol.kind == "neural":
        if pol.weights_path is None:
            raise ConfigError("policy.weights_path",
                              "neural policy needs a weight file")
        from .model import load_weights
        weights = load_weights(pol.weights_path)
    mu1 = np.asarray(pol.mu1, dtype=np.float64) if pol.mu1 is not None else None
    mu2 = np.asarray(pol.mu2, dtype=np.float64) if pol.mu2 is not None else None
    return make_policy(pol.kind, mu1=mu1, mu2=mu2, spec=spec.row_code,
                       weights=weights, n_half_iters=n_half)


def default_block_frames(cfg):
    if cfg.block_frames:
        return cfg.block_frames
    return 32 if cfg.preset == "ebch_256_239" else 512


def draw_frames(cfg, spec, frame_indices):
    """Channel realizations for a list of frame indices.

    Returns (U, X, Z, snr_db) with the documented per-frame draw order:
    information bits, the optional training-mode SNR, then noise.
    """
    b = len(frame_indices)
    u = np.empty((b, spec.k_c, spec.k_r), dtype=np.uint8)
    z = np.empty((b, spec.n_c, spec.n_r), dtype=np.float64)
    snr = np.empty(b, dtype=np.float64)
    for i, fidx in enumerate(frame_indices):
        rng = frame_rng(cfg.master_seed, fidx)
        u[i] = rng.integers(0, 2, size=(spec.k_c, spec.k_r), dtype=np.uint8)
        if cfg.training_snr is not None:
            lo, hi = cfg.training_snr
            snr[i] = lo + (hi - lo) * rng.random()
        else:
            snr[i] = np.nan
        z[i] = standard_normal(rng, (spec.n_c, spec.n_r))
    x = tpc_encode(u, spec)
    return u, x, z, snr


def channel_llr(x, z, sigma):
    """Gamma = 2 y / sigma^2 for codeword bits x and unit noise z."""
    y = bpsk(x) + np.asarray(sigma).reshape(-1, 1, 1) * z
    return 2.0 * y / np.asarray(sigma).reshape(-1, 1, 1) ** 2


def normalize_gamma(gamma):
    """Per-frame unit mean magnitude; an all-zero frame is left alone."""
    mean = np.abs(gamma).mean(axis=(1, 2), keepdims=True)
    return gamma / np.where(mean > 0, mean, 1.0)


def decode_tpc(gamma, cfg, spec=None, policy=None, true_blocks=None,
               collect_t=None):
    """Iterative product decode of a (B, n_c, n_r) channel LLR batch.

    Returns (l_final, diagnostics, records).  Diagnostics is a list with
    one dict per half-iteration: keep / rollback / empty-set counts and a
    histogram of candidate-set sizes; the counts always add up to the
    number of component vectors on that axis.
    """
    if spec is None:
        spec = product_spec(cfg.preset)
    sched = default_schedule(2 * cfg.n_t)
    if policy is None and cfg.component_decoder != "exact_map":
        policy = build_policy(cfg, spec)
    options = decode_options(cfg)
    count = 2 ** cfg.p
    gn = normalize_gamma(np.asarray(gamma, dtype=np.float64))
    l = gn.copy()
    diagnostics = []
    records = []
    needs_truth = getattr(policy, "needs_truth", False) or collect_t is not None
    if needs_truth and true_blocks is None:
        raise ValueError("decode needs transmitted blocks but none were given")
    for t in range(1, 2 * cfg.n_t + 1):
        axis = 0 if t % 2 == 1 else 1
        if cfg.component_decoder == "exact_map":
            l, info = map_half_iteration_batch(l, gn, t, axis, sched, spec)
        else:
            l, info = half_iteration_batch(
                l, gn, t, axis, sched, policy, spec, count=count,
                patterns_kind=cfg.patterns_kind, true_blocks=true_blocks,
                options=options, collect_records=(collect_t == t))
        if info["g"] is None:
            n_vec = l.shape[0] * l.shape[2 - axis]
            diagnostics.append({"t": t, "vectors": n_vec, "keep": n_vec,
                                "rollback": 0, "empty": 0, "g_hist": None})
        else:
            g = info["g"]
            keep = info["keep"]
            hist = np.bincount(g.reshape(-1), minlength=count + 1)
            diagnostics.append({
                "t": t, "vectors": int(g.size), "keep": int(keep.sum()),
                "rollback": int((~keep & (g >= 1)).sum()),
                "empty": int((g == 0).sum()), "g_hist": hist.tolist(),
            })
        records.extend(info.get("records") or [])
        if collect_t == t:
            break
    return l, diagnostics, records


@dataclass
class BerResult:
    snr_db: float
    frames: int
    bits: int
    bit_errors: int
    ber: float
    ci_low: float
    ci_high: float
    seconds: float = 0.0
    diagnostics: list = None


def wilson_interval(errors, trials, z=WILSON_Z):
    if trials == 0:
        return 0.0, 1.0
    ph = errors / trials
    den = 1.0 + z * z / trials
    center = (ph + z * z / (2 * trials)) / den
    half = z * np.sqrt(ph * (1 - ph) / trials + z * z / (4 * trials * trials)) / den
    return max(0.0, float(center - half)), min(1.0, float(center + half))


def _merge_diag(total, part):
    if part is None:
        return total
    if total is None:
        return [dict(d) for d in part]
    for acc, d in zip(total, part):
        for key in ("vectors", "keep", "rollback", "empty"):
            acc[key] += d[key]
        if d.get("g_hist") is not None:
            acc["g_hist"] = [a + b for a, b in zip(acc["g_hist"], d["g_hist"])]
    return total


def _ber_block(cfg, frame_indices):
    """Decode one block at every SNR point; returns per-SNR tallies."""
    spec = product_spec(cfg.preset)
    u, x, z, _ = draw_frames(cfg, spec, frame_indices)
    out = []
    if cfg.uncoded_reference:
        for snr_db in cfg.es_n0_db:
            sigma = ChannelParams(snr_db).sigma
            y = bpsk(x) + sigma * z
            errors = int(((y < 0).astype(np.uint8) != x).sum())
            out.append((len(frame_indices), x[0].size * len(frame_indices),
                        errors, None))
        return out
    policy = (None if cfg.component_decoder == "exact_map"
              else build_policy(cfg, spec))
    needs_truth = getattr(policy, "needs_truth", False)
    for snr_db in cfg.es_n0_db:
        sigma = ChannelParams(snr_db).sigma
        gamma = channel_llr(x, z, np.full(len(frame_indices), sigma))
        l, diag, _ = decode_tpc(gamma, cfg, spec=spec, policy=policy,
                                true_blocks=x if needs_truth else None)
        u_hat = tpc_extract_info(l, spec)
        errors = int((u_hat != u).sum())
        out.append((len(frame_indices), u.size, errors, diag))
    return out


def run_ber(cfg, csv_path=None, manifest_path=None, progress=None):
    """Simulate until the frame budget or the bit-error target is met.

    Early stopping happens only at block boundaries, on totals merged in
    block order, so the output is identical for any worker count.
    """
    validate_config(cfg)
    t0 = time.perf_counter()
    block = default_block_frames(cfg)
    starts = list(range(0, cfg.frames, block))
    blocks = [list(range(s, min(s + block, cfg.frames))) for s in starts]
    n_snr = len(cfg.es_n0_db)
    tallies = [[0, 0, 0, None] for _ in range(n_snr)]   # frames, bits, errors, diag
    stopped = [False] * n_snr

    def consume(result):
        for si, (frames, bits, errors, diag) in enumerate(result):
            if stopped[si]:
                continue
            tallies[si][0] += frames
            tallies[si][1] += bits
            tallies[si][2] += errors
            tallies[si][3] = _merge_diag(tallies[si][3], diag)
            if cfg.target_errors > 0 and tallies[si][2] >= cfg.target_errors:
                stopped[si] = True

    if cfg.workers == 1:
        for bi, frames in enumerate(blocks):
            if all(stopped):
                break
            consume(_ber_block(cfg, frames))
            if progress:
                progress(bi + 1, len(blocks), [t[2] for t in tallies])
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            pending = {}
            next_submit = 0
            next_consume = 0
            window = 2 * cfg.workers
            while next_consume < len(blocks) and not all(stopped):
                while (next_submit < len(blocks)
                       and next_submit - next_consume < window):
                    pending[next_submit] = pool.submit(
                        _ber_block, cfg, blocks[next_submit])
                    next_submit += 1
                consume(pending.pop(next_consume).result())
                next_consume += 1
                if progress:
                    progress(next_consume, len(blocks),
                             [t[2] for t in tallies])
            for fut in pending.values():
                fut.cancel()

    elapsed = time.perf_counter() - t0
    results = []
    for si, snr_db in enumerate(cfg.es_n0_db):
        frames, bits, errors, diag = tallies[si]
        lo, hi = wilson_interval(errors, bits)
        results.append(BerResult(
            snr_db=snr_db, frames=frames, bits=bits, bit_errors=errors,
            ber=errors / bits if bits else 0.0, ci_low=lo, ci_high=hi,
            seconds=elapsed / n_snr, diagnostics=diag))
    if csv_path:
        write_ber_csv(csv_path, results)
        write_run_manifest(
            manifest_path or str(csv_path) + ".manifest.json",
            cfg, {"csv": str(csv_path), "elapsed_seconds": elapsed})
    return results


def write_ber_csv(path, results):
    lines = ["snr_db,frames,bits,bit_errors,ber,ci_low,ci_high"]
    for r in results:
        lines.append(f"{float(r.snr_db)!r},{r.frames},{r.bits},"
                     f"{r.bit_errors},{float(r.ber)!r},"
                     f"{float(r.ci_low)!r},{float(r.ci_high)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_run_manifest(path, cfg, extra=None):
    payload = {"master_seed": cfg.master_seed,
               "config": dataclasses.asdict(cfg)}
    payload.update(extra or {})
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def crn_ber_objective(cfg, kind):
    """Deterministic BER objective over a fixed seed block.

    The channel realizations are drawn once and shared by every
    evaluation, so identical threshold vectors always score identically.
    """
    validate_config(cfg)
    if len(cfg.es_n0_db) != 1:
        raise ConfigError("es_n0_db", "threshold fitting expects one SNR point")
    spec = product_spec(cfg.preset)
    block = default_block_frames(cfg)
    sigma = ChannelParams(cfg.es_n0_db[0]).sigma
    chunks = []
    for s in range(0, cfg.frames, block):
        idx = list(range(s, min(s + block, cfg.frames)))
        u, x, z, _ = draw_frames(cfg, spec, idx)
        chunks.append((u, x, channel_llr(x, z, np.full(len(idx), sigma))))
    n_half = 2 * cfg.n_t

    def objective(mu):
        mu = np.asarray(mu, dtype=np.float64)
        if mu.shape != (n_half,):
            raise ValueError(f"threshold vector must have length {n_half}")
        pol_cfg = PolicyConfig(kind=kind,
                               mu1=tuple(mu) if kind == "top1" else None,
                               mu2=tuple(mu) if kind == "top2" else None)
        run_cfg = dataclasses.replace(cfg, policy=pol_cfg)
        policy = build_policy(run_cfg, spec)
        errors = 0
        bits = 0
        for u, x, gamma in chunks:
            l, _, _ = decode_tpc(gamma, run_cfg, spec=spec, policy=policy)
            errors += int((tpc_extract_info(l, spec) != u).sum())
            bits += u.size
        return errors / bits

    return objective


def gen_training_data(cfg, t_teacher, out_path, weights=None,
                      manifest_path=None, progress=None):
    """Stream oracle-labeled component records at half-iteration t_teacher.

    Earlier half-iterations run the already-trained scorer models when a
    weight set is supplied; half-iteration 1 needs none.  Every frame
    stops right after the teacher half-iteration.
    """
    validate_config(cfg)
    if t_teacher < 1 or t_teacher > 2 * cfg.n_t:
        raise ConfigError("t", f"teacher half-iteration {t_teacher} outside "
                          f"1..{2 * cfg.n_t}")
    if t_teacher > 1:
        if weights is None:
            raise ConfigError("policy.weights_path",
                              f"teacher at t={t_teacher} needs trained models "
                              f"for half-iterations 1..{t_teacher - 1}")
        if weights.trained_half_iters < t_teacher - 1:
            raise ConfigError("policy.weights_path",
                              f"weight file covers {weights.trained_half_iters} "
                              f"trained half-iterations, need {t_teacher - 1}")
    spec = product_spec(cfg.preset)
    sched = default_schedule(2 * cfg.n_t)
    options = decode_options(cfg)
    count = 2 ** cfg.p
    oracle = make_policy("oracle")
    neural = make_policy("neural", weights=weights) if t_teacher > 1 else None
    block = default_block_frames(cfg)
    n_records = 0
    label_counts = [0, 0]
    with open(out_path, "w") as fh:
        for s in range(0, cfg.frames, block):
            idx = list(range(s, min(s + block, cfg.frames)))
            u, x, z, snr = draw_frames(cfg, spec, idx)
            if cfg.training_snr is not None:
                sigma = np.array([ChannelParams(v).sigma for v in snr])
            else:
                sigma = np.full(len(idx), ChannelParams(cfg.es_n0_db[0]).sigma)
            gn = normalize_gamma(channel_llr(x, z, sigma))
            l = gn.copy()
            for t in range(1, t_teacher + 1):
                axis = 0 if t % 2 == 1 else 1
                pol = oracle if t == t_teacher else neural
                l, info = half_iteration_batch(
                    l, gn, t, axis, sched, pol, spec, count=count,
                    patterns_kind=cfg.patterns_kind, true_blocks=x,
                    options=options, collect_records=(t == t_teacher))
            for rec in info["records"]:
                label = int(rec["v"])
                label_counts[label] += 1
                n_records += 1
                fh.write(json.dumps({
                    "t": int(rec["t"]),
                    "l": [float(v) for v in rec["l"]],
                    "candidates": ["".join("1" if b else "0" for b in row)
                                   for row in rec["candidates"]],
                    "correlations": [float(c) for c in rec["correlations"]],
                    "v": label,
                    "frame_index": s + int(rec["frame"]),
                    "vector_index": int(rec["vector"]),
                }) + "\n")
            if progress:
                progress(min(s + block, cfg.frames), cfg.frames, n_records)
    write_run_manifest(
        manifest_path or str(out_path) + ".manifest.json", cfg,
        {"dataset": str(out_path), "teacher_half_iteration": t_teacher,
         "records": n_records,
         "label_counts": {"0": label_counts[0], "1": label_counts[1]}})
    return n_records, label_counts


def read_training_records(path):
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def eval_model_accuracy(weights, dataset_path):
    """Scorer decision accuracy against a dataset's stored oracle labels."""
    from .model import build_inputs_batch, forward_batch
    by_t = {}
    for rec in read_training_records(dataset_path):
        by_t.setdefault(int(rec["t"]), []).append(rec)
    slot = weights.slot_count
    total = 0
    correct = 0
    per_t = {}
    for t, recs in sorted(by_t.items()):
        n = len(recs[0]["l"])
        llr_arr = np.array([r["l"] for r in recs])
        g = np.array([len(r["candidates"]) for r in recs])
        bits = np.zeros((len(recs), int(g.max()), n), dtype=np.uint8)
        for i, r in enumerate(recs):
            for j, word in enumerate(r["candidates"]):
                bits[i, j] = np.frombuffer(word.encode(), dtype=np.uint8) - ord("0")
        labels = np.array([int(r["v"]) for r in recs], dtype=bool)
        inputs = build_inputs_batch(llr_arr, bits, g, slot)
        keep = forward_batch(inputs, weights.half_iter(t)) > 0.0
        hits = int((keep == labels).sum())
        per_t[t] = (hits, len(recs))
        total += len(recs)
        correct += hits
    return correct / total if total else 0.0, per_t
