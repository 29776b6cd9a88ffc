"""Batched kernel vs per-vector reference path equivalence."""
import numpy as np
import pytest

from tpclab import kernels
from tpclab.bch import ebch_256_239, ehamming_8_4, map_decode_exhaustive
from tpclab.channel import (
    ChannelParams, ProductCodeSpec, bpsk, llr, tpc_encode,
)
from tpclab.chase import chase_decode, pattern_set
from tpclab.pyndiah import default_schedule, normalize_llr, pyndiah_soft_output
from tpclab.rollback import make_policy, oracle_decide

TOY = ProductCodeSpec(ehamming_8_4(), ehamming_8_4())
BIG = ProductCodeSpec(ebch_256_239(), ebch_256_239())


def reference_half_iter(l_prev, gamma_norm, t, axis, schedule, product_spec,
                        count, policy_kind=None, true_block=None):
    from tpclab.pyndiah import normalize_extrinsic

    spec = product_spec.column_code if axis == 0 else product_spec.row_code
    pats, _ = pattern_set(spec.n, count, "landslide")
    w = np.zeros_like(l_prev)
    for j in range(l_prev.shape[1 - axis]):
        vec = l_prev[:, j] if axis == 0 else l_prev[j, :]
        cs = chase_decode(vec, spec, pats)
        if cs.g < 1:
            continue
        keep = True
        if policy_kind == "oracle":
            tv = true_block[:, j] if axis == 0 else true_block[j, :]
            keep = oracle_decide(cs, tv)
        if not keep:
            continue
        wv, _ = pyndiah_soft_output(vec, cs, schedule.beta[t - 1])
        if axis == 0:
            w[:, j] = wv
        else:
            w[j, :] = wv
    wn = normalize_extrinsic(w, axis)
    return schedule.alpha[t - 1] * wn + gamma_norm


def _noisy_blocks(product_spec, n_frames, snr_db, seed):
    rng = np.random.default_rng(seed)
    kc, kr = product_spec.k_c, product_spec.k_r
    info = rng.integers(0, 2, (n_frames, kc, kr)).astype(np.uint8)
    blocks = tpc_encode(info, product_spec)
    sigma = ChannelParams(snr_db).sigma
    y = bpsk(blocks) + sigma * rng.standard_normal(blocks.shape)
    gam = llr(y, sigma)
    return blocks, np.stack([normalize_llr(g) for g in gam])


@pytest.mark.parametrize("product_spec,count,snr_db,n_frames,seed,policy_kind,n_t", [
    (TOY, 16, 2.0, 6, 11, None, 3),
    (TOY, 16, 0.0, 6, 12, None, 3),
    (TOY, 16, 1.0, 6, 13, "oracle", 3),
    (TOY, 16, -2.0, 8, 14, None, 3),
    (BIG, 16, 3.0, 1, 15, None, 2),
    (BIG, 64, 2.5, 1, 18, None, 2),
    (BIG, 64, 2.0, 1, 17, "oracle", 1),
], ids=["toy2db", "toy0db", "toy-oracle", "toy-neg2db", "big16", "big64", "big-oracle"])
def test_half_iteration_batch_matches_reference(product_spec, count, snr_db,
                                                n_frames, seed, policy_kind, n_t):
    sched = default_schedule(8)
    blocks, gamma_norm = _noisy_blocks(product_spec, n_frames, snr_db, seed)
    policy = make_policy(policy_kind) if policy_kind else None
    l_cur = gamma_norm.copy()
    for t in range(1, n_t + 1):
        axis = 0 if t % 2 == 1 else 1
        l_next, _ = kernels.half_iteration_batch(
            l_cur, gamma_norm, t, axis, sched, policy, product_spec,
            count=count,
            true_blocks=blocks if policy_kind == "oracle" else None)
        for b in range(n_frames):
            ref = reference_half_iter(
                l_cur[b], gamma_norm[b], t, axis, sched, product_spec, count,
                policy_kind, blocks[b] if policy_kind else None)
            np.testing.assert_allclose(l_next[b], ref, atol=1e-9)
        l_cur = l_next


def test_dense_sorted_candidates_match_reference(rng):
    pats, _ = pattern_set(8, 16, "landslide")
    l_flat = rng.normal(0, 1, (40, 8))
    state = kernels.chase_decode_batch(l_flat, TOY.column_code, 16)
    dense = kernels.dense_sorted_candidates(state)
    for m in range(40):
        cs = chase_decode(l_flat[m], TOY.column_code, pats)
        g = int(state["g"][m])
        assert g == cs.g
        np.testing.assert_array_equal(dense[m, :g], cs.sorted_codewords())


def test_decided_bits_are_max_correlation(rng):
    l_flat = rng.normal(0, 1, (30, 8))
    state = kernels.chase_decode_batch(l_flat, TOY.column_code, 16)
    decided = kernels.decided_bits(state)
    pats, _ = pattern_set(8, 16, "landslide")
    for m in range(30):
        cs = chase_decode(l_flat[m], TOY.column_code, pats)
        np.testing.assert_array_equal(decided[m], cs.sorted_codewords()[0])


def test_truth_hash_membership_matches_bitwise(rng):
    code = TOY.column_code
    cb = code.codebook()
    l_flat = rng.normal(0, 0.8, (80, 8))
    state = kernels.chase_decode_batch(l_flat, code, 16)
    truth = cb[rng.integers(0, len(cb), 80)]
    hits = kernels.oracle_hits(state, kernels.truth_hashes(state, truth))
    dense = kernels.dense_sorted_candidates(state)
    for m in range(80):
        g = int(state["g"][m])
        want = any(np.array_equal(truth[m], dense[m, s]) for s in range(g))
        assert bool(hits[m]) == want


def test_map_posteriors_batch_matches_exhaustive(rng):
    code = TOY.column_code
    l_flat = rng.normal(0, 1.3, (50, 8))
    post, hard_idx = kernels.map_posteriors_batch(l_flat, code)
    cb = code.codebook()
    for m in range(50):
        _, hard_ref = map_decode_exhaustive(l_flat[m], code)
        np.testing.assert_array_equal(cb[hard_idx[m]], hard_ref)
        ref, _ = map_decode_exhaustive(l_flat[m], code)
        np.testing.assert_allclose(post[m], ref, atol=1e-9)


def test_map_half_iteration_runs_and_improves(rng):
    blocks, gamma_norm = _noisy_blocks(TOY, 30, 1.0, 21)
    sched = default_schedule(2)
    l1, _ = kernels.map_half_iteration_batch(gamma_norm, gamma_norm, 1, 0, sched, TOY)
    l2, _ = kernels.map_half_iteration_batch(l1, gamma_norm, 2, 1, sched, TOY)
    before = np.mean((gamma_norm < 0).astype(np.uint8) != blocks)
    after = np.mean((l2 < 0).astype(np.uint8) != blocks)
    assert after < before
