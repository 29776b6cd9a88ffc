"""Acceptance gate: every release-blocking check at its stated scale.

Each test exercises one criterion end to end and records a one-line
pass/fail verdict for the terminal summary.  The rollback-ordering runs
are paired-seed Monte Carlo and fully deterministic, so the statistical
verdicts below are reproducible bit for bit.
"""

import itertools
import time

import numpy as np
import pytest
from acceptance_log import record_criterion

from tpclab.bch import (bm_decode, ebch_256_239, ebch_syndrome, ehamming_8_4,
                        encode, map_decode_exhaustive)
from tpclab.channel import ChannelParams, bpsk, tpc_extract_info
from tpclab.chase import chase_decode, classical_patterns, landslide_patterns
from tpclab.harness import (PolicyConfig, SimConfig, channel_llr, decode_tpc,
                            draw_frames, product_spec, run_ber)
from tpclab.model import ModelDims, build_inputs_batch, forward_batch, random_weights
from tpclab.thresholds import nelder_mead, optimize_thresholds


def test_codec_roundtrip_ebch():
    spec = ebch_256_239()
    rng = np.random.default_rng(1)
    n_words = 10_000
    info = rng.integers(0, 2, size=(n_words, spec.k), dtype=np.uint8)
    code = encode(info, spec)
    t0 = time.perf_counter()
    failures = 0
    for i in range(n_words):
        word = code[i].copy()
        n_err = i % 3
        if n_err:
            word[rng.choice(spec.n, size=n_err, replace=False)] ^= 1
        decoded = bm_decode(word, spec)
        if decoded is None or not np.array_equal(decoded, code[i]):
            failures += 1
    elapsed = time.perf_counter() - t0
    record_criterion(
        "codec-roundtrip-ebch", failures == 0 and elapsed < 60.0,
        f"{n_words} words with 0..2 bit errors, {failures} failures, "
        f"{elapsed:.1f}s")


def test_chase_candidate_validity():
    spec = ebch_256_239()
    rng = np.random.default_rng(2)
    sigma = ChannelParams(3.0).sigma
    patterns = landslide_patterns(spec.n, 64)
    n_vec = 1000
    bad = 0
    empties = 0
    total = 0
    for _ in range(n_vec):
        word = encode(rng.integers(0, 2, size=spec.k, dtype=np.uint8), spec)
        llr_vec = 2.0 * (bpsk(word) + sigma * rng.standard_normal(spec.n)) / sigma**2
        cs = chase_decode(llr_vec, spec, patterns)
        if cs.g > 64:
            bad += 1
            continue
        if cs.g == 0:
            empties += 1
            continue
        syn, parity_ok = ebch_syndrome(cs.codewords, spec)
        if np.any(syn != 0) or not np.all(parity_ok):
            bad += 1
        total += cs.g
    record_criterion(
        "chase-candidate-validity", bad == 0,
        f"{n_vec} vectors at 3 dB, {total} candidates all pass syndrome and "
        f"parity, g <= 64, {empties} empty sets")


def _brute_force_order(n_ranks, max_weight):
    pats = []
    for size in range(0, n_ranks + 1):
        if size * (size + 1) // 2 > max_weight:
            break
        for combo in itertools.combinations(range(1, n_ranks + 1), size):
            if sum(combo) <= max_weight:
                pats.append(tuple(sorted(combo, reverse=True)))
    pats.sort(key=lambda t: (sum(t), len(t), t))
    return pats


def test_landslide_order_matches_brute_force():
    # weight <= 14 yields 110 patterns over unrestricted ranks, enough to
    # cover every prefix up to 2^6; ranks above 14 cannot appear there
    brute = _brute_force_order(40, 14)
    ok = True
    for p in range(2, 7):
        count = 2 ** p
        pats = [pat.flip_ranks for pat in landslide_patterns(256, count)]
        if pats != brute[:count]:
            ok = False
    record_criterion(
        "landslide-order-bruteforce", ok,
        "p in 2..6 prefixes equal (weight, flips, lex) enumeration exactly")


def test_toy_ml_equivalence():
    spec = ehamming_8_4()
    rng = np.random.default_rng(3)
    patterns = classical_patterns(8)
    n_vec = 10_000
    mismatches = 0
    for _ in range(n_vec):
        llr_vec = 2.0 * rng.standard_normal(8)
        cs = chase_decode(llr_vec, spec, patterns)
        _, hard = map_decode_exhaustive(llr_vec, spec)
        if cs.g != 16 or not np.array_equal(cs.sorted_codewords()[0], hard):
            mismatches += 1
    record_criterion(
        "toy-ml-equivalence", mismatches == 0,
        f"exhaustive-pattern decisions equal exact max-correlation word on "
        f"{n_vec} vectors, {mismatches} mismatches")


def _direct_posteriors(llr_vec, codebook):
    """Bitwise posterior LLRs by direct probability summation."""
    p1 = 1.0 / (1.0 + np.exp(llr_vec))
    probs = np.where(codebook == 1, p1, 1.0 - p1).prod(axis=1)
    post = np.empty(llr_vec.size)
    for j in range(llr_vec.size):
        post[j] = (np.log(probs[codebook[:, j] == 0].sum())
                   - np.log(probs[codebook[:, j] == 1].sum()))
    return post


def test_map_posterior_oracle():
    spec = ehamming_8_4()
    cb = spec.codebook()
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(1000):
        llr_vec = 2.0 * rng.standard_normal(8)
        post, _ = map_decode_exhaustive(llr_vec, spec)
        worst = max(worst, float(np.abs(post - _direct_posteriors(llr_vec, cb)).max()))
    record_criterion(
        "map-posterior-oracle", worst < 1e-9,
        f"1000 vectors, worst deviation from direct summation {worst:.2e}")


def test_nelder_mead_benchmarks():
    rosen = nelder_mead(
        lambda x: float((1 - x[0]) ** 2 + 100.0 * (x[1] - x[0] ** 2) ** 2),
        np.array([-1.2, 1.0]), max_evals=2000)
    sph = nelder_mead(lambda x: float(np.dot(x, x)), np.full(8, 2.0),
                      max_evals=4000, tol_f=0.0)
    norm = float(np.linalg.norm(sph.x))
    record_criterion(
        "nelder-mead-benchmarks",
        rosen.fx < 1e-6 and rosen.evals <= 2000 and norm < 1e-3,
        f"rosenbrock f={rosen.fx:.2e} in {rosen.evals} evals; "
        f"sphere-8d |x|={norm:.2e}")


def test_worker_determinism_csv(tmp_path):
    csvs = []
    frames = None
    for workers in (1, 2, 3):
        cfg = SimConfig(preset="ehamming_8_4", es_n0_db=(-2.0,), n_t=2, p=3,
                        frames=128, target_errors=15, master_seed=9,
                        workers=workers, block_frames=16)
        path = tmp_path / f"w{workers}.csv"
        r, = run_ber(cfg, csv_path=path)
        frames = r.frames
        csvs.append(path.read_bytes())
    record_criterion(
        "worker-determinism-csv", csvs[0] == csvs[1] == csvs[2],
        f"workers 1/2/3 emit byte-identical CSVs ({frames} frames after "
        f"early stop)")


def test_model_forward_sanity():
    rng = np.random.default_rng(5)
    dims = ModelDims(p=3, n=8)
    weights = random_weights(dims, n_t=4, seed=1)
    slot = dims.slot_count
    n_inputs = 10_000
    llr = rng.standard_normal((n_inputs, dims.n))
    bits = rng.integers(0, 2, size=(n_inputs, slot, dims.n), dtype=np.uint8)
    g = rng.integers(1, slot + 1, size=n_inputs)
    inputs = build_inputs_batch(llr, bits, g, slot)
    finite = True
    exact = True
    for t in range(1, 9):
        sel = np.arange(t - 1, n_inputs, 8)
        group = weights.half_iter(t)
        scores = forward_batch(inputs[sel], group)
        finite &= bool(np.all(np.isfinite(scores)))
        pad = inputs[sel][:500].copy()
        for i, gi in enumerate(g[sel][:500]):
            if gi + 1 >= slot:
                continue
            perm = 1 + gi + rng.permutation(slot - gi)
            pad[i] = pad[i][:, np.r_[np.arange(1 + gi), perm]]
        exact &= bool(np.array_equal(forward_batch(pad, group), scores[:500]))
    big_dims = ModelDims(p=6, n=256)
    big_w = random_weights(big_dims, n_t=4, seed=2)
    big_in = build_inputs_batch(
        rng.standard_normal((32, 256)),
        rng.integers(0, 2, size=(32, 64, 256), dtype=np.uint8),
        np.r_[1, 64, rng.integers(2, 64, size=30)], 64)
    big_scores = forward_batch(big_in, big_w.half_iter(3))
    finite &= bool(np.all(np.isfinite(big_scores)))
    record_criterion(
        "model-forward-sanity", finite and exact,
        f"{n_inputs} scorer inputs finite across all 8 half-iteration "
        f"groups, padding permutations exact, full-size batch finite")


def _paired_frame_errors(snr_db, n_frames, p, kind, decoder, seed, n_t=4,
                         block=2048):
    cfg = SimConfig(preset="ehamming_8_4", es_n0_db=(snr_db,), n_t=n_t, p=p,
                    policy=PolicyConfig(kind=kind), component_decoder=decoder,
                    frames=n_frames, target_errors=0, master_seed=seed)
    spec = product_spec(cfg.preset)
    sigma = ChannelParams(snr_db).sigma
    errs = np.empty(n_frames, dtype=np.int64)
    for s in range(0, n_frames, block):
        idx = list(range(s, min(s + block, n_frames)))
        u, x, z, _ = draw_frames(cfg, spec, idx)
        gamma = channel_llr(x, z, np.full(len(idx), sigma))
        need = kind == "oracle"
        l, _, _ = decode_tpc(gamma, cfg, spec=spec,
                             true_blocks=x if need else None)
        errs[idx] = (tpc_extract_info(l, spec) != u).sum(axis=(1, 2))
    return errs


def _paired_z(a, b):
    """z statistic of mean(a - b) for per-frame error counts on shared noise."""
    d = a.astype(np.float64) - b.astype(np.float64)
    s = d.std(ddof=1)
    return float(d.mean() / (s / np.sqrt(d.size))) if s > 0 else 0.0


def _verdict(z):
    return "significant" if abs(z) >= 1.96 else "indistinguishable"


@pytest.mark.slow
def test_toy_rollback_ordering():
    n_frames = 100_000
    seed = 20260822
    snr = -1.25
    e_keep = _paired_frame_errors(snr, n_frames, 3, "always_keep",
                                  "chase_pyndiah", seed)
    e_oracle = _paired_frame_errors(snr, n_frames, 3, "oracle",
                                    "chase_pyndiah", seed)
    e_map = _paired_frame_errors(snr, n_frames, 3, "always_keep",
                                 "exact_map", seed)
    bits = n_frames * 16
    z_keep_oracle = _paired_z(e_keep, e_oracle)
    z_oracle_map = _paired_z(e_oracle, e_map)
    ordered = (e_keep.sum() >= e_oracle.sum() >= e_map.sum())
    never_inverted = z_keep_oracle > -1.96 and z_oracle_map > -1.96
    record_criterion(
        "toy-rollback-ordering", ordered and never_inverted,
        f"{n_frames} paired frames at {snr} dB: "
        f"always-keep {e_keep.sum() / bits:.3e} >= "
        f"oracle {e_oracle.sum() / bits:.3e} >= "
        f"map {e_map.sum() / bits:.3e}; "
        f"z={z_keep_oracle:+.2f} ({_verdict(z_keep_oracle)}), "
        f"z={z_oracle_map:+.2f} ({_verdict(z_oracle_map)})")


@pytest.mark.slow
def test_bigcode_rollback_ordering_3db():
    fit_cfg = SimConfig(preset="ebch_256_239", es_n0_db=(3.0,), n_t=4, p=6,
                        frames=64, target_errors=0, master_seed=77,
                        block_frames=32)
    mu1, fit_ber1, _ = optimize_thresholds("top1", fit_cfg, 25)
    mu2, fit_ber2, _ = optimize_thresholds("top2", fit_cfg, 25)

    def evaluate(policy):
        cfg = SimConfig(preset="ebch_256_239", es_n0_db=(3.0,), n_t=4, p=6,
                        policy=policy, frames=5000, target_errors=0,
                        master_seed=101)
        r, = run_ber(cfg)
        return r.ber

    ber_keep = evaluate(PolicyConfig(kind="always_keep"))
    ber_oracle = evaluate(PolicyConfig(kind="oracle"))
    ber_top1 = evaluate(PolicyConfig(kind="top1", mu1=tuple(mu1)))
    ber_top2 = evaluate(PolicyConfig(kind="top2", mu2=tuple(mu2)))
    ok = (ber_oracle < ber_top2 <= ber_keep) and (ber_top1 <= ber_keep)
    record_criterion(
        "bigcode-rollback-ordering-3db", ok,
        f"5000 paired frames at 3.0 dB: oracle {ber_oracle:.3e} < "
        f"top2 {ber_top2:.3e} <= always-keep {ber_keep:.3e}, "
        f"top1 {ber_top1:.3e} <= always-keep (fit on 64 frames: "
        f"top1 {fit_ber1:.3e}, top2 {fit_ber2:.3e})")
