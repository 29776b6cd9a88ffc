"""Pyndiah soft output and the half-iteration update rule.

Half-iterations alternate axes (columns on odd t, rows on even t).  The
extrinsic matrix W is built per component vector from the decided codeword
D and its best competitors, normalized to unit mean magnitude over the
vectors that received an update, and combined as

    L_t = alpha_t * W' + Gamma'

where Gamma' is the channel LLR matrix normalized once at decoder start.
"""

from dataclasses import dataclass

import numpy as np

from .channel import bpsk

# weighting schedules for eight half-iterations (N_T = 4)
DEFAULT_ALPHA = (0.2, 0.3, 0.5, 0.7, 0.9, 1.0, 1.0, 1.0)
DEFAULT_BETA = (0.2, 0.4, 0.6, 0.8, 1.0, 1.0, 1.0, 1.0)


@dataclass(frozen=True)
class HalfIterSchedule:
    """Per-half-iteration extrinsic weights alpha and fallback reliabilities beta."""

    alpha: tuple
    beta: tuple

    def __post_init__(self):
        if len(self.alpha) != len(self.beta):
            raise ValueError("alpha and beta schedules must have equal length")
        if len(self.alpha) == 0:
            raise ValueError("schedules must not be empty")

    @property
    def n_half_iters(self):
        return len(self.alpha)


def default_schedule(n_half_iters):
    """The standard schedule, truncated or extended (with trailing 1.0) as needed."""
    if n_half_iters < 1:
        raise ValueError("need at least one half-iteration")
    pad = max(0, n_half_iters - len(DEFAULT_ALPHA))
    return HalfIterSchedule(
        alpha=(DEFAULT_ALPHA + (1.0,) * pad)[:n_half_iters],
        beta=(DEFAULT_BETA + (1.0,) * pad)[:n_half_iters],
    )


def normalize_llr(gamma):
    """Scale a channel LLR matrix to unit mean magnitude (all-zero left alone)."""
    gamma = np.asarray(gamma, dtype=np.float64)
    mean = np.abs(gamma).mean()
    if mean == 0.0:
        return gamma.copy()
    return gamma / mean


def normalize_extrinsic(w_matrix, axis):
    """Scale W to unit mean magnitude over vectors that received an update.

    Vectors lie along `axis`; a vector counts as updated when any of its
    entries is nonzero (rollback and empty candidate sets leave exact
    zeros).  All-zero W is returned unchanged.
    """
    w_matrix = np.asarray(w_matrix, dtype=np.float64)
    updated = np.any(w_matrix != 0.0, axis=axis)
    if not updated.any():
        return w_matrix.copy()
    if axis == 0:
        mean = np.abs(w_matrix[:, updated]).mean()
    else:
        mean = np.abs(w_matrix[updated, :]).mean()
    if mean == 0.0:
        return w_matrix.copy()
    return w_matrix / mean


def pyndiah_soft_output(llr_vector, candidate_set, beta_t, beta_sign_source="decided"):
    """Extrinsic vector w from a decoded candidate set.

    For each position, the best competitor is the highest-correlation
    candidate that differs from the decided codeword D there; covered
    positions get w_j = (a_D - a_C)/2 * tau(D_j) - l_j, uncovered ones the
    fallback w_j = beta_t * tau(D_j).  beta_sign_source switches the
    fallback sign between the decided codeword ("decided") and the raw
    hard decision ("hard").
    """
    if candidate_set.g < 1:
        raise ValueError("soft output needs a non-empty candidate set")
    if candidate_set.correlations is None:
        raise ValueError("candidate set is missing correlations")
    llr_vector = np.asarray(llr_vector, dtype=np.float64)
    sorted_words = candidate_set.sorted_codewords()
    decided = sorted_words[0]
    a_decided = candidate_set.correlations[0]
    tau_decided = bpsk(decided)
    if beta_sign_source == "decided":
        fallback_sign = tau_decided
    elif beta_sign_source == "hard":
        fallback_sign = bpsk((llr_vector < 0).astype(np.uint8))
    else:
        raise ValueError(f"unknown beta_sign_source {beta_sign_source!r}")
    w = beta_t * fallback_sign
    diff = sorted_words[1:] != decided[None, :]
    for j in np.nonzero(diff.any(axis=0))[0]:
        comp = int(np.argmax(diff[:, j]))  # first (highest-correlation) differing candidate
        a_comp = candidate_set.correlations[comp + 1]
        w[j] = (a_decided - a_comp) / 2.0 * tau_decided[j] - llr_vector[j]
    return w, decided


def half_iteration_update(l_prev, gamma_norm, t, axis, schedule, policy,
                          product_spec, count=None, patterns_kind="landslide",
                          true_block=None, options=None):
    """One half-iteration of Chase-Pyndiah decoding over a single matrix.

    t is 1-based; axis 0 processes columns, axis 1 rows.  policy may be
    None (no rollback layer) or a rollback policy object.  Delegates to the
    batched kernel with a batch of one.
    """
    from . import kernels

    out, _ = kernels.half_iteration_batch(
        np.asarray(l_prev, dtype=np.float64)[None],
        np.asarray(gamma_norm, dtype=np.float64)[None],
        t, axis, schedule, policy, product_spec,
        count=count, patterns_kind=patterns_kind,
        true_blocks=None if true_block is None else np.asarray(true_block, np.uint8)[None],
        options=options,
    )
    return out[0]
