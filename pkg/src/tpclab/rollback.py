"""Rollback policies: keep or discard a component decode before it
contributes extrinsic information.

An empty candidate set always rolls back, without consulting the policy.
Per-vector decide functions are the reference semantics; each policy class
also exposes a vectorized decide_batch used by the batched kernel, which
identifies candidate words by 64-bit Zobrist hashes of their inner bits.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .bch import map_decode_exhaustive

MAP_ASSIST_MAX_K = 16


def oracle_decide(candidate_set, true_component):
    """Keep iff the transmitted component codeword is among the candidates."""
    true_component = np.asarray(true_component, dtype=np.uint8)
    return any(np.array_equal(w, true_component) for w in candidate_set.codewords)


def top1_decide(candidate_set, mu1_t):
    """Keep iff the best correlation reaches the threshold."""
    if candidate_set.g < 1:
        return False
    return bool(candidate_set.correlations[0] >= mu1_t)


def top2_decide(candidate_set, mu2_t):
    """Keep iff the top-two correlation gap exceeds the threshold; g=1 keeps."""
    if candidate_set.g < 1:
        return False
    if candidate_set.g == 1:
        return True
    gap = candidate_set.correlations[0] - candidate_set.correlations[1]
    return bool(gap > mu2_t)


def map_assisted_decide(candidate_set, llr_vector, spec):
    """Keep iff the exhaustive-MAP hard word is among the candidates."""
    if spec.k > MAP_ASSIST_MAX_K:
        raise ValueError(f"map-assisted rollback refused for k={spec.k} > {MAP_ASSIST_MAX_K}")
    _, hard = map_decode_exhaustive(llr_vector, spec)
    return any(np.array_equal(w, hard) for w in candidate_set.codewords)


def neural_decide(v_tilde):
    """Keep iff sigmoid(v_tilde) > 0.5 strictly, i.e. v_tilde > 0."""
    return bool(v_tilde > 0.0)


@dataclass
class PolicyContext:
    """Batched view of one half-iteration's component decodes.

    Hashes identify codewords: abs_hash(word) = XOR of z_table over set
    inner bits.  cand_hash holds absolute hashes of the deduplicated valid
    candidates in sorted slots (garbage elsewhere, see slot_ok).
    """

    t: int                       # 1-based half-iteration index
    g: np.ndarray                # (M,) candidate counts
    corr1: np.ndarray            # (M,) best correlation (garbage where g == 0)
    corr2: np.ndarray            # (M,) second best (garbage where g < 2)
    llr: np.ndarray              # (M, n) component vector inputs
    cand_hash: np.ndarray        # (M, P) absolute hashes, sorted slots
    slot_ok: np.ndarray          # (M, P) True on the g leading sorted slots
    z_table: np.ndarray          # (n_inner,) uint64 Zobrist keys
    spec: object                 # component BchSpec
    truth_hash: np.ndarray = None        # (M,) or None
    dense_candidates: object = None      # callable -> (M, P, n) sorted candidate bits
    extra: dict = dc_field(default_factory=dict)

    def hash_words(self, words):
        """Absolute inner-bit hashes of (M, n) words."""
        inner = np.asarray(words, dtype=np.uint8)[..., : self.spec.n_inner]
        keyed = np.where(inner.astype(bool), self.z_table, np.uint64(0))
        return np.bitwise_xor.reduce(keyed, axis=-1)


class AlwaysKeepPolicy:
    name = "always_keep"
    needs_truth = False

    def decide_batch(self, ctx):
        return np.ones(len(ctx.g), dtype=bool)


class OraclePolicy:
    """Keep iff the true component codeword appears in the candidate set."""

    name = "oracle"
    needs_truth = True

    def decide_batch(self, ctx):
        if ctx.truth_hash is None:
            raise ValueError("oracle policy needs the transmitted block")
        hit = ctx.slot_ok & (ctx.cand_hash == ctx.truth_hash[:, None])
        return hit.any(axis=1)


class Top1Policy:
    """Threshold on the best correlation, one threshold per half-iteration."""

    name = "top1"
    needs_truth = False

    def __init__(self, mu1):
        self.mu1 = np.asarray(mu1, dtype=np.float64)

    def decide_batch(self, ctx):
        return ctx.corr1 >= self.mu1[ctx.t - 1]


class Top2Policy:
    """Threshold on the top-two correlation gap; g = 1 always keeps."""

    name = "top2"
    needs_truth = False

    def __init__(self, mu2):
        self.mu2 = np.asarray(mu2, dtype=np.float64)

    def decide_batch(self, ctx):
        gap_keep = (ctx.corr1 - ctx.corr2) > self.mu2[ctx.t - 1]
        return np.where(ctx.g == 1, True, gap_keep)


class MapAssistedPolicy:
    """Keep iff the exhaustive-MAP hard word is among the candidates."""

    name = "map_assisted"
    needs_truth = False

    def __init__(self, spec):
        if spec.k > MAP_ASSIST_MAX_K:
            raise ValueError(
                f"map-assisted rollback refused for k={spec.k} > {MAP_ASSIST_MAX_K}")
        self.spec = spec

    def decide_batch(self, ctx):
        cb = self.spec.codebook()
        tau = 1.0 - 2.0 * cb.astype(np.float64)
        corr = ctx.llr @ tau.T                      # (M, 2^k)
        hard = cb[np.argmax(corr, axis=1)]
        target = ctx.hash_words(hard)
        hit = ctx.slot_ok & (ctx.cand_hash == target[:, None])
        return hit.any(axis=1)


class NeuralPolicy:
    """Keep iff the learned scorer's sigmoid output exceeds 0.5 strictly."""

    name = "neural"
    needs_truth = False

    def __init__(self, weights):
        self.weights = weights

    def decide_batch(self, ctx):
        from .model import build_inputs_batch, forward_batch

        bits = ctx.dense_candidates()
        inputs = build_inputs_batch(ctx.llr, bits, ctx.g, self.weights.slot_count)
        v = forward_batch(inputs, self.weights.half_iter(ctx.t))
        return v > 0.0


def make_policy(kind, *, mu1=None, mu2=None, spec=None, weights=None, n_half_iters=8):
    if kind == "always_keep":
        return AlwaysKeepPolicy()
    if kind == "oracle":
        return OraclePolicy()
    if kind == "top1":
        if mu1 is None:
            mu1 = np.zeros(n_half_iters)
        if len(mu1) != n_half_iters:
            raise ValueError("mu1 length must equal the number of half-iterations")
        return Top1Policy(mu1)
    if kind == "top2":
        if mu2 is None:
            mu2 = np.zeros(n_half_iters)
        if len(mu2) != n_half_iters:
            raise ValueError("mu2 length must equal the number of half-iterations")
        return Top2Policy(mu2)
    if kind == "map_assisted":
        return MapAssistedPolicy(spec)
    if kind == "neural":
        if weights is None:
            raise ValueError("neural policy needs a weight set")
        return NeuralPolicy(weights)
    raise ValueError(f"unknown rollback policy {kind!r}")
