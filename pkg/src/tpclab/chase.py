"""Chase candidate generation with landslide-ordered error patterns.

Error patterns are sets of reliability ranks (rank 1 = least reliable
position).  Pattern order follows non-decreasing logistic weight (the sum
of flipped ranks); within a weight, fewer flips come first, and within a
(weight, flips) group the lexicographically smallest descending-rank tuple
comes first.  The classical fixed-p pattern set (all subsets of the p
least reliable ranks) is kept for A/B comparison.
"""

from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np

from .bch import bm_decode
from .channel import bpsk


@dataclass(frozen=True)
class ErrorPattern:
    """A set of reliability ranks to flip; ranks are 1-based."""

    flip_ranks: tuple

    @property
    def logistic_weight(self):
        return sum(self.flip_ranks)

    @property
    def flips(self):
        return len(self.flip_ranks)


def _distinct_partitions(total, parts, max_part):
    """Partitions of `total` into `parts` distinct values <= max_part.

    Yields descending tuples in ascending lexicographic order.
    """
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        if 1 <= total <= max_part:
            yield (total,)
        return
    tail_min = parts * (parts - 1) // 2            # minimal sum of the remaining parts
    lo = -(-(total + tail_min) // parts)           # ceil: largest part must reach the mean
    hi = min(max_part, total - tail_min)
    for first in range(lo, hi + 1):
        for rest in _distinct_partitions(total - first, parts - 1, first - 1):
            yield (first,) + rest


def landslide_patterns(n, count):
    """First `count` error patterns over ranks 1..n in landslide order."""
    if count < 0:
        raise ValueError("count must be non-negative")
    if n >= 63:
        limit = count  # 2^n would overflow; any practical count fits
    else:
        limit = 1 << n
        if count > limit:
            raise ValueError(f"count {count} exceeds 2^n = {limit}")
    out = [ErrorPattern(())]
    weight = 1
    max_weight = n * (n + 1) // 2
    while len(out) < count and weight <= max_weight:
        flips = 1
        while flips * (flips + 1) // 2 <= weight and len(out) < count:
            for tup in _distinct_partitions(weight, flips, n):
                out.append(ErrorPattern(tup))
                if len(out) >= count:
                    break
            flips += 1
        weight += 1
    return out[:count]


def classical_patterns(p):
    """All 2^p subsets of ranks 1..p, ordered by the same landslide key."""
    pats = []
    for mask in range(1 << p):
        ranks = tuple(sorted((r + 1 for r in range(p) if mask >> r & 1), reverse=True))
        pats.append(ErrorPattern(ranks))
    pats.sort(key=lambda e: (e.logistic_weight, e.flips, e.flip_ranks))
    return pats


def hard_decision(llr_vector):
    """Bit 1 where the LLR is strictly negative; zero LLR maps to bit 0."""
    return (np.asarray(llr_vector) < 0).astype(np.uint8)


def reliability_order(llr_vector):
    """Positions sorted by |llr| ascending; ties broken by lower index."""
    return np.argsort(np.abs(np.asarray(llr_vector)), kind="stable")


def build_test_vectors(llr_vector, patterns):
    """Hard decision XOR each pattern applied at the ranked positions.

    Returns (test_vectors, hard, order) where order is the reliability
    ranking used to map ranks to positions.
    """
    llr_vector = np.asarray(llr_vector, dtype=np.float64)
    d = hard_decision(llr_vector)
    order = reliability_order(llr_vector)
    vecs = np.tile(d, (len(patterns), 1))
    for i, pat in enumerate(patterns):
        for rank in pat.flip_ranks:
            vecs[i, order[rank - 1]] ^= 1
    return vecs, d, order


@dataclass
class CandidateSet:
    """Deduplicated decoded candidates of one component vector.

    codewords holds the candidates in discovery order; correlations is
    sorted descending and order[i] gives the discovery index of the i-th
    best candidate.  g == len(codewords) may be zero.
    """

    codewords: np.ndarray                 # (g, n) uint8, discovery order
    correlations: np.ndarray = dc_field(default=None)  # (g,) sorted descending
    order: np.ndarray = dc_field(default=None)         # (g,) discovery indices

    @property
    def g(self):
        return len(self.codewords)

    def sorted_codewords(self):
        return self.codewords[self.order]


def chase_candidates(test_vectors, spec, decoder=None):
    """Decode every test vector, drop failures, deduplicate bit-exact."""
    if decoder is None:
        decoder = lambda w: bm_decode(w, spec)
    seen = set()
    cands = []
    for vec in np.asarray(test_vectors, dtype=np.uint8):
        out = decoder(vec)
        if out is None:
            continue
        key = out.tobytes()
        if key in seen:
            continue
        seen.add(key)
        cands.append(out)
    n = test_vectors.shape[-1]
    words = np.array(cands, dtype=np.uint8) if cands else np.zeros((0, n), np.uint8)
    return CandidateSet(codewords=words)


def correlations(llr_vector, candidate_set):
    """Fill in sorted correlations a_i = <llr, tau(M_i)> of a candidate set.

    Sorting is descending with ties broken by discovery order.
    """
    if candidate_set.g < 1:
        raise ValueError("correlations need at least one candidate")
    llr_vector = np.asarray(llr_vector, dtype=np.float64)
    corr = bpsk(candidate_set.codewords) @ llr_vector
    order = np.argsort(-corr, kind="stable")
    candidate_set.correlations = corr[order]
    candidate_set.order = order
    return candidate_set


def chase_decode(llr_vector, spec, patterns):
    """Full reference path: test vectors -> candidates -> sorted correlations."""
    vecs, _, _ = build_test_vectors(llr_vector, patterns)
    cs = chase_candidates(vecs, spec)
    if cs.g:
        correlations(llr_vector, cs)
    return cs


@lru_cache(maxsize=None)
def pattern_set(n, count, kind="landslide"):
    """Cached pattern list plus dense rank masks used by the batch kernel.

    Returns (patterns, rank_mask) where rank_mask is a (count, R) boolean
    array over the R highest ranks any pattern touches.
    """
    if kind == "landslide":
        pats = landslide_patterns(n, count)
    elif kind == "classical":
        p = int(np.log2(count))
        if 1 << p != count:
            raise ValueError("classical pattern count must be a power of two")
        pats = classical_patterns(p)
    else:
        raise ValueError(f"unknown pattern kind {kind!r}")
    max_rank = max((max(p.flip_ranks) for p in pats if p.flip_ranks), default=0)
    mask = np.zeros((len(pats), max_rank), dtype=bool)
    for i, pat in enumerate(pats):
        for r in pat.flip_ranks:
            mask[i, r - 1] = True
    mask.setflags(write=False)
    return tuple(pats), mask
