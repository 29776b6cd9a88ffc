"""Soft-output formula, normalizations, and the half-iteration update."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tpclab.bch import ehamming_8_4
from tpclab.channel import ProductCodeSpec, bpsk, tpc_encode
from tpclab.chase import CandidateSet, correlations
from tpclab.pyndiah import (
    DEFAULT_ALPHA, DEFAULT_BETA, HalfIterSchedule, default_schedule,
    half_iteration_update, normalize_extrinsic, normalize_llr,
    pyndiah_soft_output,
)
from tpclab.rollback import Top1Policy


def _cand(words, l):
    cs = CandidateSet(codewords=np.asarray(words, dtype=np.uint8))
    return correlations(np.asarray(l, dtype=np.float64), cs)


def test_schedule_values():
    assert DEFAULT_ALPHA == (0.2, 0.3, 0.5, 0.7, 0.9, 1.0, 1.0, 1.0)
    assert DEFAULT_BETA == (0.2, 0.4, 0.6, 0.8, 1.0, 1.0, 1.0, 1.0)


def test_default_schedule_truncates_and_pads():
    s4 = default_schedule(4)
    assert s4.alpha == (0.2, 0.3, 0.5, 0.7) and s4.n_half_iters == 4
    s10 = default_schedule(10)
    assert s10.alpha == DEFAULT_ALPHA + (1.0, 1.0)
    assert s10.beta == DEFAULT_BETA + (1.0, 1.0)
    with pytest.raises(ValueError):
        default_schedule(0)


def test_schedule_validation():
    with pytest.raises(ValueError):
        HalfIterSchedule(alpha=(0.2,), beta=(0.2, 0.4))
    with pytest.raises(ValueError):
        HalfIterSchedule(alpha=(), beta=())


def test_soft_output_hand_check():
    """Two candidates over l = [1,1,1]: covered w = 1, uncovered w = beta."""
    l = [1.0, 1.0, 1.0]
    cs = _cand([[0, 0, 0], [1, 1, 0]], l)
    assert cs.correlations[0] == pytest.approx(3.0)
    assert cs.correlations[1] == pytest.approx(-1.0)
    w, decided = pyndiah_soft_output(l, cs, beta_t=0.4)
    assert np.array_equal(decided, [0, 0, 0])
    assert w[0] == pytest.approx(1.0)   # ((3 - (-1))/2)*1 - 1
    assert w[1] == pytest.approx(1.0)
    assert w[2] == pytest.approx(0.4)   # beta branch


def test_soft_output_single_candidate_all_beta():
    l = np.array([0.3, -0.9, 0.5, -0.1])
    cs = _cand([[0, 1, 0, 1]], l)
    w, decided = pyndiah_soft_output(l, cs, beta_t=0.6)
    assert np.allclose(w, 0.6 * bpsk(decided))


def test_soft_output_beta_zero_uncovered_silent():
    l = [1.0, 1.0, 1.0]
    cs = _cand([[0, 0, 0], [1, 1, 0]], l)
    w, _ = pyndiah_soft_output(l, cs, beta_t=0.0)
    assert w[2] == 0.0


def test_soft_output_empty_set_rejected():
    with pytest.raises(ValueError):
        pyndiah_soft_output([1.0], CandidateSet(codewords=np.zeros((0, 1), np.uint8)), 0.2)


def test_soft_output_beta_sign_source():
    # decided word disagrees with the raw hard decision at position 2
    l = np.array([2.0, 2.0, 0.1, 2.0])
    cs = _cand([[0, 0, 1, 0]], l)
    w_dec, _ = pyndiah_soft_output(l, cs, 0.5, beta_sign_source="decided")
    w_hard, _ = pyndiah_soft_output(l, cs, 0.5, beta_sign_source="hard")
    assert w_dec[2] == pytest.approx(-0.5)
    assert w_hard[2] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        pyndiah_soft_output(l, cs, 0.5, beta_sign_source="mystery")


def test_best_competitor_is_highest_correlation(rng):
    """r_j must use the best differing candidate, not an arbitrary one."""
    toy = ehamming_8_4()
    cb = toy.codebook()
    for _ in range(60):
        l = rng.normal(0, 1.2, 8)
        cs = _cand(cb, l)
        w, decided = pyndiah_soft_output(l, cs, 0.3)
        tau_d = bpsk(decided)
        a = cs.correlations
        words = cs.sorted_codewords()
        for j in range(8):
            diff = np.nonzero(words[:, j] != decided[j])[0]
            assert len(diff)            # full codebook covers every position
            want = (a[0] - a[diff[0]]) / 2.0 * tau_d[j] - l[j]
            assert w[j] == pytest.approx(want)


def test_covered_reliability_sign_matches_decided(rng):
    toy = ehamming_8_4()
    cb = toy.codebook()
    for _ in range(200):
        l = rng.normal(0, 1, 8)
        cs = _cand(cb, l)
        w, decided = pyndiah_soft_output(l, cs, 0.2)
        r = w + l
        tau_d = bpsk(decided)
        assert np.all((np.sign(r) == tau_d) | (r == 0.0))


def test_soft_output_candidate_order_invariance(rng):
    toy = ehamming_8_4()
    cb = toy.codebook()
    l = rng.normal(0, 1, 8)
    w_ref, _ = pyndiah_soft_output(l, _cand(cb, l), 0.4)
    for _ in range(5):
        perm = rng.permutation(len(cb))
        w_perm, _ = pyndiah_soft_output(l, _cand(cb[perm], l), 0.4)
        assert np.allclose(w_ref, w_perm)


def test_normalize_llr():
    g = np.array([[4.0, -4.0], [8.0, 0.0]])
    out = normalize_llr(g)
    assert np.abs(out).mean() == pytest.approx(1.0)
    assert np.array_equal(np.sign(out), np.sign(g))
    assert np.allclose(normalize_llr(out), out)        # idempotent
    z = np.zeros((3, 3))
    assert np.array_equal(normalize_llr(z), z)


def test_normalize_llr_mean_four():
    g = np.full((2, 2), 4.0)
    assert np.allclose(normalize_llr(g), 1.0)


def test_normalize_extrinsic_updated_rows_only():
    w = np.zeros((4, 3))
    w[1] = [0.5, -0.5, 0.5]
    w[3] = [0.5, 0.5, -0.5]
    out = normalize_extrinsic(w, axis=1)
    assert np.allclose(out[1], [1.0, -1.0, 1.0])
    assert np.all(out[[0, 2]] == 0.0)
    assert np.abs(out[[1, 3]]).mean() == pytest.approx(1.0)


def test_normalize_extrinsic_axis0_and_degenerate():
    w = np.zeros((3, 4))
    w[:, 2] = [2.0, 2.0, 2.0]
    out = normalize_extrinsic(w, axis=0)
    assert np.allclose(out[:, 2], 1.0)
    z = np.zeros((3, 4))
    assert np.array_equal(normalize_extrinsic(z, axis=0), z)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_normalize_extrinsic_postcondition(seed):
    rng = np.random.default_rng(seed)
    w = rng.normal(0, 3, (6, 5))
    w[rng.random(6) < 0.5] = 0.0
    out = normalize_extrinsic(w, axis=1)
    updated = np.any(out != 0.0, axis=1)
    if updated.any():
        assert np.abs(out[updated]).mean() == pytest.approx(1.0)


def _toy_setup(rng, n_frames=1, snr_db=2.0):
    toy = ProductCodeSpec(ehamming_8_4(), ehamming_8_4())
    info = rng.integers(0, 2, (4, 4)).astype(np.uint8)
    x = tpc_encode(info, toy)
    sigma = np.sqrt(1.0 / (2.0 * 10 ** (snr_db / 10)))
    y = bpsk(x) + sigma * rng.normal(0, 1, x.shape)
    gamma = 2.0 * y / sigma**2
    return toy, x, normalize_llr(gamma)


def test_half_iteration_always_rollback_returns_gamma(rng):
    toy, _, gn = _toy_setup(rng)
    sched = default_schedule(8)
    policy = Top1Policy(mu1=[1e18] * 8)
    out = half_iteration_update(gn, gn, 1, 0, sched, policy, toy, count=16)
    assert np.array_equal(out, gn)


def test_half_iteration_alpha_zero_returns_gamma(rng):
    toy, _, gn = _toy_setup(rng)
    sched = HalfIterSchedule(alpha=(0.0,), beta=(0.4,))
    out = half_iteration_update(gn, gn, 1, 0, sched, None, toy, count=16)
    assert np.allclose(out, gn)


def test_half_iteration_noiseless_stays_decoded(rng):
    toy = ProductCodeSpec(ehamming_8_4(), ehamming_8_4())
    info = rng.integers(0, 2, (4, 4)).astype(np.uint8)
    x = tpc_encode(info, toy)
    gn = normalize_llr(bpsk(x) * 10.0)
    sched = default_schedule(8)
    l = gn.copy()
    for t in range(1, 9):
        l = half_iteration_update(l, gn, t, 0 if t % 2 else 1, sched, None,
                                  toy, count=16)
        assert np.array_equal((l < 0).astype(np.uint8), x)
