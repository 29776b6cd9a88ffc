"""Batched Chase-Pyndiah kernels.

The per-vector reference path in chase.py/pyndiah.py is readable but far
too slow for Monte-Carlo runs, so this module re-implements one half-
iteration as vectorized numpy over a batch of frames.  Equivalence with
the reference composition is asserted by the test suite.

Core ideas: a test vector differs from the hard decision d by a few known
flips, so its syndromes are the syndromes of d XOR per-position table
entries; error location for t <= 2 has a closed form (single root from S1,
or the quadratic y^2 + y = c via a half-trace table); every candidate is
identified by its flip set relative to d, which makes correlations,
deduplication (64-bit Zobrist hashes) and competitor search cheap.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .chase import pattern_set


@dataclass(frozen=True)
class DecodeOptions:
    """Switchable details of the soft-output rule."""

    beta_sign: str = "decided"       # "decided" | "hard"
    extrinsic_norm: str = "updated"  # "updated" | "all"


DEFAULT_OPTIONS = DecodeOptions()


@lru_cache(maxsize=None)
def _zobrist(n_inner):
    rng = np.random.Generator(np.random.PCG64(0x7A0B2157))
    z = np.frombuffer(rng.bytes(8 * n_inner), dtype=np.uint64).copy()
    z[z == 0] = 1
    z.setflags(write=False)
    return z


@lru_cache(maxsize=None)
def _solve_tables(fld):
    """Per-field lookup tables for the closed-form t<=2 syndrome solves."""
    q = fld.order
    cube = np.zeros(q, dtype=np.int64)
    square = np.zeros(q, dtype=np.int64)
    trace0 = np.zeros(q, dtype=bool)
    qroot = np.zeros(q, dtype=np.int64)
    have_root = np.zeros(q, dtype=bool)
    for a in range(q):
        sq = fld.mul(a, a)
        square[a] = sq
        cube[a] = fld.mul(a, sq)
        tr = 0
        x = a
        for _ in range(fld.m):
            tr ^= x
            x = fld.mul(x, x)
        trace0[a] = tr == 0
    for y in range(q):
        c = fld.mul(y, y) ^ y
        if not have_root[c]:
            have_root[c] = True
            qroot[c] = y
    n_inner = q - 1
    pos_of = np.full(q, n_inner, dtype=np.int64)  # sentinel n_inner for element 0
    for a in range(1, q):
        pos_of[a] = n_inner - 1 - int(fld.log[a])
    for arr in (cube, square, trace0, qroot, have_root, pos_of):
        arr.setflags(write=False)
    return dict(cube=cube, square=square, trace0=trace0, qroot=qroot,
                have_root=have_root, pos_of=pos_of)


def _gf_mul_vec(fld, a, b):
    idx = np.maximum(fld.log[a] + fld.log[b], 0)
    out = fld.exp[idx]
    return np.where((a == 0) | (b == 0), 0, out)


def _gf_div_vec(fld, a, b):
    """a / b with b assumed nonzero wherever the result is used."""
    q1 = fld.order - 1
    idx = np.maximum(fld.log[a] - fld.log[b] + q1, 0)
    out = fld.exp[np.minimum(idx, 2 * q1 - 1)]
    return np.where(a == 0, 0, out)


@lru_cache(maxsize=None)
def _pattern_slots(n, count, kind):
    """Per-pattern arrays of rank-slot indices (0-based into the ranked list)."""
    pats, rank_mask = pattern_set(n, count, kind)
    slots = [np.nonzero(rank_mask[i])[0] for i in range(len(pats))]
    return pats, rank_mask, tuple(slots)


def _byte_lut(table, n_inner):
    """(n_bytes, 256) lookup: XOR of table entries selected by each byte value.

    Bytes follow np.packbits bit order: the MSB of byte j is position 8j.
    """
    n_bytes = (n_inner + 7) // 8
    vals = np.arange(256)
    bit_of = ((vals[:, None] >> (7 - np.arange(8))) & 1).astype(bool)  # (256, 8)
    lut = np.zeros((n_bytes, 256), dtype=table.dtype)
    for j in range(n_bytes):
        for k in range(8):
            pos = 8 * j + k
            if pos >= n_inner:
                break
            lut[j, bit_of[:, k]] ^= table[pos]
    lut.setflags(write=False)
    return lut


@lru_cache(maxsize=None)
def _packed_luts(spec):
    n_inner = spec.n_inner
    luts = [_byte_lut(tab, n_inner) for tab in spec.syndrome_tables[:spec.t]]
    luts.append(_byte_lut(_zobrist(n_inner), n_inner))
    flat_idx = (np.arange(luts[0].shape[0]) * 256)
    flat_idx.setflags(write=False)
    return tuple(lut.reshape(-1) for lut in luts), flat_idx


def _packed_reduce(bits_inner, lut_flat, flat_idx):
    """XOR-reduce a byte LUT over packed rows of inner bits."""
    packed = np.packbits(bits_inner, axis=1)
    return np.bitwise_xor.reduce(lut_flat[flat_idx[None, :] + packed], axis=1)


def _solve_t1(spec, s1):
    tabs = _solve_tables(spec.field)
    nfl = (s1 != 0).astype(np.int8)
    ok = np.ones(s1.shape, dtype=bool)
    bmpos = np.full(s1.shape + (2,), spec.n_inner, dtype=np.int64)
    bmpos[..., 0] = tabs["pos_of"][s1]
    return ok, nfl, bmpos


def _solve_t2(spec, s1, s3):
    fld = spec.field
    tabs = _solve_tables(fld)
    sent = spec.n_inner
    zero1 = s1 == 0
    cube1 = tabs["cube"][s1]
    case_a = zero1 & (s3 == 0)
    case_b = ~zero1 & (s3 == cube1)
    case_c = ~zero1 & (s3 != cube1)
    # quadratic x^2 + S1 x + Q = 0 with Q = (S3 + S1^3)/S1; substituting
    # x = S1 y gives y^2 + y = c with c = Q/S1^2 = (S3 + S1^3)/S1^3,
    # solvable iff trace(c) = 0
    c_elt = _gf_div_vec(fld, s3 ^ cube1, np.where(zero1, 1, cube1))
    solvable = case_c & tabs["trace0"][c_elt]
    y0 = tabs["qroot"][c_elt]
    x1 = _gf_mul_vec(fld, s1, y0)
    x2 = x1 ^ s1
    ok = case_a | case_b | solvable
    nfl = np.where(case_a, 0, np.where(case_b, 1, 2)).astype(np.int8)
    bmpos = np.full(s1.shape + (2,), sent, dtype=np.int64)
    bmpos[..., 0] = np.where(case_b, tabs["pos_of"][s1],
                             np.where(solvable, tabs["pos_of"][x1], sent))
    bmpos[..., 1] = np.where(solvable, tabs["pos_of"][x2], sent)
    return ok, nfl, bmpos


def chase_decode_batch(l_flat, spec, count, patterns_kind="landslide"):
    """Chase candidate search over a flat batch of component vectors.

    l_flat has shape (M, n).  Returns a dict of per-candidate arrays in
    pattern-discovery order plus the correlation-sorted slot permutation;
    everything downstream (policies, soft output, training records) reads
    from it.  Candidates are flip sets relative to the hard decision d.
    """
    if spec.t not in (1, 2):
        raise ValueError("batch kernel supports t in {1, 2}")
    l_flat = np.ascontiguousarray(l_flat, dtype=np.float64)
    m_rows, n = l_flat.shape
    if n != spec.n:
        raise ValueError(f"vector length {n} != code length {spec.n}")
    if n > 512:
        raise ValueError("batch kernel packs positions into 9 bits (n <= 512)")
    if count is not None and count > 128:
        raise ValueError("batch kernel packs slots into 7 bits (count <= 128)")
    n_inner = spec.n_inner
    pats, rank_mask, slots = _pattern_slots(n, count, patterns_kind)
    n_pat = len(pats)
    n_rank = rank_mask.shape[1]
    z_tab = _zobrist(n_inner)

    absl = np.abs(l_flat)
    d_bits = (l_flat < 0).astype(np.uint8)
    sum_abs = absl.sum(axis=1)
    # non-negative float64 ordering equals the ordering of the raw bit
    # patterns read as int64; select the R least reliable by partition and
    # order just those, falling back to a full stable sort on boundary ties
    bits = absl.view(np.int64)
    if n_rank >= n:
        sel = np.broadcast_to(np.arange(n), (m_rows, n))
    else:
        kth = np.partition(bits, n_rank - 1, axis=1)[:, n_rank - 1]
        at_most = bits <= kth[:, None]
        if np.all(at_most.sum(axis=1) == n_rank):
            sel = np.nonzero(at_most)[1].reshape(m_rows, n_rank)
        else:
            sel = np.argsort(bits, axis=1, kind="stable")[:, :n_rank]
    sel_bits = np.take_along_axis(bits, sel, axis=1)
    small = np.lexsort((sel, sel_bits), axis=-1)
    ranked_pos = np.take_along_axis(sel, small, axis=1)  # (M, R)
    ranked_abs = np.take_along_axis(absl, ranked_pos, axis=1)
    inner_slot = ranked_pos < n_inner                    # parity-position ranks do nothing
    # inverse map: rank of each position, n_rank where unranked
    rank_of = np.full((m_rows, n + 1), n_rank, dtype=np.int16)
    np.put_along_axis(
        rank_of[:, :n], ranked_pos,
        np.broadcast_to(np.arange(n_rank, dtype=np.int16), (m_rows, n_rank)),
        axis=1)

    d_inner = d_bits[:, :n_inner]
    luts, flat_idx = _packed_luts(spec)
    tab1 = spec.syndrome_tables[0]
    s1_d = _packed_reduce(d_inner, luts[0], flat_idx)
    if spec.t == 2:
        tab3 = spec.syndrome_tables[1]
        s3_d = _packed_reduce(d_inner, luts[1], flat_idx)
    h_d = _packed_reduce(d_inner, luts[-1], flat_idx)

    posc = np.minimum(ranked_pos, n_inner - 1)
    c1 = np.where(inner_slot, tab1[posc], 0)
    if spec.t == 2:
        c3 = np.where(inner_slot, tab3[posc], 0)
    cz = np.where(inner_slot, z_tab[posc], np.uint64(0))
    cabs = np.where(inner_slot, ranked_abs, 0.0)

    # per-pattern syndrome/hash/reliability deltas of the inner flips
    ps1 = np.zeros((m_rows, n_pat), dtype=np.int64)
    ps3 = np.zeros((m_rows, n_pat), dtype=np.int64) if spec.t == 2 else None
    pz = np.zeros((m_rows, n_pat), dtype=np.uint64)
    pdef = np.zeros((m_rows, n_pat))
    pflip = np.zeros((m_rows, n_pat), dtype=np.int8)
    for p_idx, sl in enumerate(slots):
        if len(sl) == 0:
            continue
        ps1[:, p_idx] = np.bitwise_xor.reduce(c1[:, sl], axis=1)
        if spec.t == 2:
            ps3[:, p_idx] = np.bitwise_xor.reduce(c3[:, sl], axis=1)
        pz[:, p_idx] = np.bitwise_xor.reduce(cz[:, sl], axis=1)
        pdef[:, p_idx] = cabs[:, sl].sum(axis=1)
        pflip[:, p_idx] = inner_slot[:, sl].sum(axis=1)

    s1 = s1_d[:, None] ^ ps1
    if spec.t == 2:
        ok, nfl, bmpos = _solve_t2(spec, s1, s3_d[:, None] ^ ps3)
    else:
        ok, nfl, bmpos = _solve_t1(spec, s1)

    # gather pads: index n_inner is a zero sentinel for located positions
    abs_pad = np.concatenate([absl[:, :n_inner], np.zeros((m_rows, 1))], axis=1)
    z_pad = np.concatenate([z_tab, np.zeros(1, dtype=np.uint64)])
    bm_each = np.take_along_axis(abs_pad, bmpos.reshape(m_rows, -1), axis=1)
    bm_each = bm_each.reshape(m_rows, n_pat, 2)
    bm_abs = bm_each.sum(axis=2)
    bm_z = z_pad[bmpos[..., 0]] ^ z_pad[bmpos[..., 1]]

    # overlap: a located error on a pattern-flipped position un-flips it;
    # detected by mapping located positions through the rank inverse
    bm_rank = np.take_along_axis(
        rank_of, bmpos.reshape(m_rows, -1), axis=1).reshape(m_rows, n_pat, 2)
    rm_pad = np.concatenate(
        [rank_mask, np.zeros((n_pat, 1), dtype=bool)], axis=1).reshape(-1)
    ov = rm_pad[np.arange(n_pat)[None, :, None] * (n_rank + 1) + bm_rank]
    ov &= bmpos != n_inner
    ov_abs = (ov * bm_each).sum(axis=2)

    deficit = pdef + bm_abs - 2.0 * ov_abs
    hash_rel = pz ^ bm_z
    flip_parity = ((pflip + nfl) & 1).astype(bool)

    if spec.extended:
        d_par = d_inner.sum(axis=1) & 1
        cand_par = d_par[:, None] ^ flip_parity
        par_diff = cand_par != d_bits[:, n_inner].astype(bool)[:, None]
        deficit = deficit + par_diff * absl[:, n_inner][:, None]
    else:
        par_diff = np.zeros((m_rows, n_pat), dtype=bool)

    corr = sum_abs[:, None] - 2.0 * deficit

    # deduplicate valid candidates by flip-set hash, first discovery wins
    pat_idx = np.broadcast_to(np.arange(n_pat), (m_rows, n_pat))
    by_hash = np.lexsort((pat_idx, hash_rel, ~ok), axis=-1)
    sv = np.take_along_axis(ok, by_hash, axis=1)
    sh = np.take_along_axis(hash_rel, by_hash, axis=1)
    first = sv.copy()
    first[:, 1:] &= sh[:, 1:] != sh[:, :-1]
    uniq = np.zeros_like(ok)
    np.put_along_axis(uniq, by_hash, first, axis=1)
    g = uniq.sum(axis=1)

    # correlation-descending order over unique candidates, discovery tie-break
    a_key = np.where(uniq, corr, -np.inf)
    by_corr = np.lexsort((pat_idx, -a_key), axis=-1)
    a_sorted = np.take_along_axis(corr, by_corr, axis=1)
    slot_ok = np.arange(n_pat)[None, :] < g[:, None]
    a_safe = np.where(slot_ok, a_sorted, 0.0)
    abs_hash = np.take_along_axis(h_d[:, None] ^ hash_rel, by_corr, axis=1)

    return dict(
        spec=spec, count=count, patterns_kind=patterns_kind,
        l=l_flat, absl=absl, d_bits=d_bits, sum_abs=sum_abs,
        ranked_pos=ranked_pos, inner_slot=inner_slot, rank_mask=rank_mask,
        ok=ok, nfl=nfl, bmpos=bmpos, par_diff=par_diff, corr=corr,
        hash_rel=hash_rel, h_d=h_d, uniq=uniq, g=g,
        by_corr=by_corr, a_sorted=a_sorted, a_safe=a_safe, slot_ok=slot_ok,
        abs_hash=abs_hash, z_tab=z_tab,
    )


def dense_sorted_candidates(state, n_slots=None):
    """Candidate bit matrices (M, n_slots, n) in correlation-sorted slots.

    Memory heavy; only used by the neural policy and record collection.
    Slots at or beyond g hold garbage and must be masked by the caller.
    n_slots defaults to the batch maximum g (never below 1).
    """
    spec = state["spec"]
    m_rows, n_pat = state["ok"].shape
    if n_slots is None:
        n_slots = min(n_pat, max(1, int(state["g"].max())))
    n, n_inner = spec.n, spec.n_inner
    by_corr = state["by_corr"][:, :n_slots]
    epf = state["rank_mask"][by_corr] & state["inner_slot"][:, None, :]
    flips = np.zeros((m_rows, n_slots, n + 1), dtype=np.uint8)
    idx = np.broadcast_to(state["ranked_pos"][:, None, :], epf.shape)
    np.put_along_axis(flips, idx, epf.astype(np.uint8), axis=2)
    bmpos_c = np.take_along_axis(
        state["bmpos"], by_corr[:, :, None], axis=1)
    scatter_pos = np.where(bmpos_c < n_inner, bmpos_c, n)
    for e in range(2):
        idx_e = scatter_pos[:, :, e:e + 1]
        cur = np.take_along_axis(flips, idx_e, axis=2)
        np.put_along_axis(flips, idx_e, cur ^ (idx_e < n).astype(np.uint8), axis=2)
    if spec.extended:
        flips[:, :, n_inner] = np.take_along_axis(
            state["par_diff"], by_corr, axis=1).astype(np.uint8)
    return state["d_bits"][:, None, :] ^ flips[:, :, :n]


def _decided_flip_data(state):
    """Flip description of the decided codeword D (sorted slot 0) per row."""
    m_rows = state["ok"].shape[0]
    rows = np.arange(m_rows)
    d_slot = state["by_corr"][:, 0]
    epf_d = state["rank_mask"][d_slot] & state["inner_slot"]
    bm_d = state["bmpos"][rows, d_slot]
    par_d = state["par_diff"][rows, d_slot]
    return epf_d, bm_d, par_d


def decided_bits(state):
    """Dense bits of the decided codeword D per row (garbage where g = 0)."""
    spec = state["spec"]
    m_rows = state["ok"].shape[0]
    n, n_inner = spec.n, spec.n_inner
    epf_d, bm_d, par_d = _decided_flip_data(state)
    flips = np.zeros((m_rows, n + 1), dtype=np.uint8)
    np.put_along_axis(flips, state["ranked_pos"], epf_d.astype(np.uint8), axis=1)
    scatter_pos = np.where(bm_d < n_inner, bm_d, n)
    rows = np.arange(m_rows)
    for e in range(2):
        pos = scatter_pos[:, e]
        flips[rows, pos] ^= (pos < n).astype(np.uint8)
    if spec.extended:
        flips[:, n_inner] = par_d.astype(np.uint8)
    return state["d_bits"] ^ flips[:, :n]


def soft_output_batch(state, keep, beta_t, options=DEFAULT_OPTIONS):
    """Extrinsic vectors w (M, n); exact zeros where keep is False.

    Implements the competitor rule: for each position the first correlation-
    sorted candidate differing from D supplies a_C; uncovered positions get
    the beta fallback.
    """
    spec = state["spec"]
    m_rows, n_pat = state["ok"].shape
    n, n_inner = spec.n, spec.n_inner
    n_rank = state["ranked_pos"].shape[1]
    l_flat = state["l"]

    tau_d = 1.0 - 2.0 * decided_bits(state).astype(np.float64)
    if options.beta_sign == "decided":
        fb_sign = tau_d
    elif options.beta_sign == "hard":
        fb_sign = 1.0 - 2.0 * state["d_bits"].astype(np.float64)
    else:
        raise ValueError(f"unknown beta_sign {options.beta_sign!r}")

    # slots past the batch maximum g are garbage in every row; drop them
    n_eff = min(n_pat, max(1, int(state["g"].max())))
    by_corr = state["by_corr"][:, :n_eff]
    slot_ok = state["slot_ok"][:, :n_eff]
    g = state["g"]

    # flip entries (m, slot, position) of every unique candidate relative
    # to d: pattern flips on inner ranked slots, located-error flips, and
    # the parity bit.  An entry pair at one (m, slot, position) is a
    # pattern flip undone by the error locator; both drop out.
    epf_c = state["rank_mask"][by_corr] & state["inner_slot"][:, None, :]
    epf_c &= slot_ok[:, :, None]
    fm_r, fs_r, fr_r = np.nonzero(epf_c)
    pos_r = state["ranked_pos"][fm_r, fr_r]
    bm_c = np.take_along_axis(state["bmpos"], by_corr[:, :, None], axis=1)
    bm_live = (bm_c != n_inner) & slot_ok[:, :, None]
    fm_b, fs_b, fe_b = np.nonzero(bm_live)
    pos_b = bm_c[fm_b, fs_b, fe_b]
    if spec.extended:
        par_c = np.take_along_axis(state["par_diff"], by_corr, axis=1)
        fm_p, fs_p = np.nonzero(par_c & slot_ok)
        pos_p = np.full(len(fm_p), n_inner)
    else:
        fm_p = fs_p = pos_p = np.zeros(0, dtype=np.int64)
    # composite sort key (row, position, slot) in one uint64; n <= 512 and
    # slot < 128 by the pattern-count bound, so the fields cannot collide
    key = np.concatenate([
        (fm_r.astype(np.uint64) << np.uint64(16)) |
        (pos_r.astype(np.uint64) << np.uint64(7)) | fs_r.astype(np.uint64),
        (fm_b.astype(np.uint64) << np.uint64(16)) |
        (pos_b.astype(np.uint64) << np.uint64(7)) | fs_b.astype(np.uint64),
        (fm_p.astype(np.uint64) << np.uint64(16)) |
        (pos_p.astype(np.uint64) << np.uint64(7)) | fs_p.astype(np.uint64),
    ])

    # For each (m, position): candidates flipping it, slots ascending.  If
    # slot 0 (the decided D) is absent, the first listed slot is the first
    # candidate differing from D there.  If present, D flips the position
    # and the competitor is the first slot missing from the run 0,1,2,...;
    # it exists only below g.
    comp_slot = np.full((m_rows, n), n_eff, dtype=np.int64)
    if len(key):
        key.sort()
        same = np.zeros(len(key), dtype=bool)
        same[1:] = key[1:] == key[:-1]
        cancelled = same.copy()
        cancelled[:-1] |= same[1:]
        key = key[~cancelled]
    if len(key):
        grp = key >> np.uint64(7)
        es_o = (key & np.uint64(0x7F)).astype(np.int64)
        idx = np.arange(len(key))
        lead = np.ones(len(key), dtype=bool)
        lead[1:] = grp[1:] != grp[:-1]
        start = np.maximum.accumulate(np.where(lead, idx, 0))
        # slots within a group are strictly increasing, so slot == rank can
        # only hold on the leading run 0,1,2,...; its length is the first gap
        match = es_o == idx - start
        gid = np.cumsum(lead) - 1
        k_lead = np.bincount(gid, weights=match,
                             minlength=int(gid[-1]) + 1).astype(np.int64)
        gm = (key[lead] >> np.uint64(16)).astype(np.int64)
        gpos = ((key[lead] >> np.uint64(7)) & np.uint64(0x1FF)).astype(np.int64)
        first_slot = es_o[lead]
        comp = np.where(first_slot > 0, first_slot, k_lead)
        have = (first_slot > 0) | (k_lead < g[gm])
        comp_slot[gm[have], gpos[have]] = comp[have]

    exists = comp_slot < n_eff
    a_pad = np.concatenate(
        [state["a_safe"][:, :n_eff], np.zeros((m_rows, 1))], axis=1)
    a_comp = np.take_along_axis(a_pad, comp_slot, axis=1)
    a_dec = state["a_safe"][:, 0:1]
    w_cov = 0.5 * (a_dec - a_comp) * tau_d - l_flat
    w = np.where(exists, w_cov, beta_t * fb_sign)
    return np.where(keep[:, None], w, 0.0)


def truth_hashes(state, truth_flat):
    """Zobrist hashes of the true component codewords, for oracle membership."""
    spec = state["spec"]
    luts, flat_idx = _packed_luts(spec)
    t_inner = np.asarray(truth_flat, dtype=np.uint8)[:, :spec.n_inner]
    return _packed_reduce(t_inner, luts[-1], flat_idx)


def oracle_hits(state, truth_hash):
    """Whether the true codeword appears among the unique candidates."""
    hit = state["slot_ok"] & (state["abs_hash"] == truth_hash[:, None])
    return hit.any(axis=1)


def _normalize_extrinsic_frames(w, axis):
    """Per-frame unit-mean-magnitude scaling over updated component vectors.

    w has shape (B, n_c, n_r); vectors lie along matrix axis `axis`.
    Non-updated vectors are exact zeros, so the per-frame sum over updated
    vectors equals the total sum; only the count needs the mask.
    """
    updated = np.any(w != 0.0, axis=1 + axis)      # (B, V)
    n = w.shape[1 + axis]
    total = np.abs(w).sum(axis=(1, 2))
    cnt = updated.sum(axis=1) * n
    mean = total / np.maximum(cnt, 1)
    scale = np.where(mean > 0.0, 1.0 / np.where(mean > 0.0, mean, 1.0), 1.0)
    return w * scale[:, None, None]


def policy_context(state, t, truth_flat=None, truth_hash=None):
    """Rollback-policy view of a decoded batch, for decide_batch calls."""
    from .rollback import PolicyContext

    if truth_hash is None and truth_flat is not None:
        truth_hash = truth_hashes(state, truth_flat)
    return PolicyContext(
        t=t, g=state["g"], corr1=state["a_safe"][:, 0],
        corr2=state["a_safe"][:, 1], llr=state["l"],
        cand_hash=state["abs_hash"], slot_ok=state["slot_ok"],
        z_table=state["z_tab"], spec=state["spec"], truth_hash=truth_hash,
        dense_candidates=lambda: dense_sorted_candidates(state), extra={},
    )


def half_iteration_batch(l_in, gamma_norm, t, axis, schedule, policy,
                         product_spec, count=None, patterns_kind="landslide",
                         true_blocks=None, options=None, collect_records=False):
    """One half-iteration over a batch of frames.

    l_in and gamma_norm have shape (B, n_c, n_r); axis 0 decodes columns,
    axis 1 rows; t is 1-based into the schedule.  true_blocks (same shape,
    bits) enables the oracle policy and record labels.  Returns the next
    LLR batch and an info dict with per-vector diagnostics.
    """
    if options is None:
        options = DEFAULT_OPTIONS
    if count is None:
        count = 16
    l_in = np.asarray(l_in, dtype=np.float64)
    gamma_norm = np.asarray(gamma_norm, dtype=np.float64)
    if l_in.ndim != 3:
        raise ValueError("expected a (B, n_c, n_r) batch")
    if axis not in (0, 1):
        raise ValueError("axis must be 0 (columns) or 1 (rows)")
    n_frames = l_in.shape[0]
    spec = product_spec.column_code if axis == 0 else product_spec.row_code

    def to_vectors(mat):
        m = mat.transpose(0, 2, 1) if axis == 0 else mat
        return np.ascontiguousarray(m).reshape(-1, spec.n)

    flat = to_vectors(l_in)
    n_vec = flat.shape[0] // n_frames
    state = chase_decode_batch(flat, spec, count, patterns_kind)
    g = state["g"]

    truth_hash = None
    if true_blocks is not None:
        truth_hash = truth_hashes(state, to_vectors(np.asarray(true_blocks)))

    needs_truth = policy is not None and getattr(policy, "needs_truth", False)
    if needs_truth and truth_hash is None:
        raise ValueError(f"policy {policy.name!r} needs the true codeword")

    ctx = policy_context(state, t, truth_hash=truth_hash)
    if policy is None:
        keep = g >= 1
    else:
        keep = policy.decide_batch(ctx) & (g >= 1)

    beta_t = schedule.beta[t - 1]
    w_flat = soft_output_batch(state, keep, beta_t, options)

    records = None
    if collect_records:
        if truth_hash is None:
            raise ValueError("record collection needs true codewords for labels")
        records = _collect_records(state, truth_hash, t, n_vec)

    w = w_flat.reshape(n_frames, n_vec, spec.n)
    if axis == 0:
        w = w.transpose(0, 2, 1)
    w_norm = _normalize_extrinsic_frames(w, axis)
    l_next = schedule.alpha[t - 1] * w_norm + gamma_norm

    info = dict(
        g=g.reshape(n_frames, n_vec),
        keep=keep.reshape(n_frames, n_vec),
        records=records,
    )
    return l_next, info


def _collect_records(state, truth_hash, t, n_vec):
    """Raw training-record rows for every component decode with g >= 1."""
    g = state["g"]
    labels = oracle_hits(state, truth_hash)
    dense = dense_sorted_candidates(state)
    rows = np.nonzero(g >= 1)[0]
    out = []
    for m in rows:
        gm = int(g[m])
        out.append(dict(
            t=t,
            frame=int(m // n_vec),
            vector=int(m % n_vec),
            l=state["l"][m],
            candidates=dense[m, :gm],
            correlations=state["a_sorted"][m, :gm],
            v=bool(labels[m]),
        ))
    return out


def map_posteriors_batch(l_flat, spec):
    """Exhaustive-MAP bit posteriors for a flat batch of component vectors.

    Correlation a(c) relates to the codeword log-likelihood by a(c)/2, so
    posteriors follow from a stable log-sum-exp over the codebook split by
    bit value.  Positions where one bit value never occurs get +/-inf.
    """
    from .bch import LLR_INF

    book = spec.codebook().astype(np.float64)
    tau = 1.0 - 2.0 * book
    l_flat = np.asarray(l_flat, dtype=np.float64)
    a_half = 0.5 * (l_flat @ tau.T)                  # (M, C)
    mx = a_half.max(axis=1, keepdims=True)
    wts = np.exp(a_half - mx)
    s0 = wts @ (book == 0.0)
    s1 = wts @ (book == 1.0)
    with np.errstate(divide="ignore"):
        post = np.log(s0) - np.log(s1)
    post = np.where(s0 == 0.0, -LLR_INF, post)
    post = np.where(s1 == 0.0, LLR_INF, post)
    hard_idx = a_half.argmax(axis=1)
    return post, hard_idx


def map_half_iteration_batch(l_in, gamma_norm, t, axis, schedule, product_spec):
    """Half-iteration with the component decoder replaced by exact MAP.

    w = posterior - l for every vector, then the same normalization and
    alpha weighting as the Chase-Pyndiah path.  Only feasible for small
    component codebooks.
    """
    l_in = np.asarray(l_in, dtype=np.float64)
    gamma_norm = np.asarray(gamma_norm, dtype=np.float64)
    n_frames = l_in.shape[0]
    spec = product_spec.column_code if axis == 0 else product_spec.row_code
    mat = l_in.transpose(0, 2, 1) if axis == 0 else l_in
    flat = np.ascontiguousarray(mat).reshape(-1, spec.n)
    post, _ = map_posteriors_batch(flat, spec)
    w = (post - flat).reshape(n_frames, -1, spec.n)
    if axis == 0:
        w = w.transpose(0, 2, 1)
    w_norm = _normalize_extrinsic_frames(w, axis)
    l_next = schedule.alpha[t - 1] * w_norm + gamma_norm
    return l_next, dict(g=None, keep=None, records=None)
