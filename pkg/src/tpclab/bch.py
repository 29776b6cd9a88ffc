"""Binary BCH component codes with an overall even-parity extension.

Galois-field tables, systematic encoding, syndrome computation,
Berlekamp-Massey error correction and exhaustive MAP decoding for small
codes.  Bit position i of a length-n inner word corresponds to the
coefficient of x^(n-1-i), so information bits occupy the low indices and
parity bits the high ones.
"""

from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np

LLR_INF = np.inf


class FieldConstructionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GaloisField:
    """GF(2^m) built from a primitive polynomial (bit mask of degree m)."""

    m: int
    primitive_polynomial: int
    exp: np.ndarray  # length 2*(q-1); exp[i] = alpha^i, doubled for overflow-free indexing
    log: np.ndarray  # length q; log[0] = -1 sentinel

    @property
    def order(self):
        return 1 << self.m

    def mul(self, a, b):
        if a == 0 or b == 0:
            return 0
        return int(self.exp[self.log[a] + self.log[b]])

    def div(self, a, b):
        if b == 0:
            raise ZeroDivisionError("division by zero field element")
        if a == 0:
            return 0
        return int(self.exp[self.log[a] - self.log[b] + (self.order - 1)])

    def inv(self, a):
        return self.div(1, a)

    def pow(self, a, e):
        if a == 0:
            return 1 if e == 0 else 0
        return int(self.exp[(self.log[a] * e) % (self.order - 1)])


@lru_cache(maxsize=None)
def build_field(m, primitive_polynomial):
    """Construct GF(2^m) log/antilog tables.

    Raises FieldConstructionError when the polynomial does not generate the
    full multiplicative group, i.e. it is not primitive of degree m.
    """
    if not 2 <= m <= 16:
        raise FieldConstructionError(f"unsupported field degree m={m}")
    if primitive_polynomial >> (m + 1) or not primitive_polynomial >> m:
        raise FieldConstructionError(
            f"polynomial 0x{primitive_polynomial:x} does not have degree {m}"
        )
    q = 1 << m
    exp = np.zeros(2 * (q - 1), dtype=np.int64)
    log = np.full(q, -1, dtype=np.int64)
    x = 1
    for i in range(q - 1):
        exp[i] = x
        if log[x] >= 0:
            raise FieldConstructionError(
                f"0x{primitive_polynomial:x} is not primitive over GF(2^{m})"
            )
        log[x] = i
        x <<= 1
        if x & q:
            x ^= primitive_polynomial
    if x != 1:
        raise FieldConstructionError(
            f"0x{primitive_polynomial:x} is not primitive over GF(2^{m})"
        )
    exp[q - 1:] = exp[: q - 1]
    exp.setflags(write=False)
    log.setflags(write=False)
    return GaloisField(m=m, primitive_polynomial=primitive_polynomial, exp=exp, log=log)


def _poly_mul_gf2(a, b):
    """Multiply GF(2)[x] polynomials given as ascending coefficient arrays."""
    out = np.zeros(len(a) + len(b) - 1, dtype=np.uint8)
    for i, c in enumerate(a):
        if c:
            out[i:i + len(b)] ^= np.asarray(b, dtype=np.uint8)
    return out


def _generator_poly(field, t):
    """Product of the distinct minimal polynomials of alpha^1, alpha^3, ... alpha^(2t-1)."""
    n = field.order - 1
    seen = set()
    gen = np.array([1], dtype=np.uint8)
    for s in range(1, 2 * t, 2):
        if s % n in seen:
            continue
        cls = []
        e = s % n
        while e not in cls:
            cls.append(e)
            e = (e * 2) % n
        seen.update(cls)
        # minimal polynomial: prod (x + alpha^e) over the conjugacy class
        poly = [1]
        for e in cls:
            root = int(field.exp[e])
            nxt = [0] * (len(poly) + 1)
            for i, c in enumerate(poly):
                nxt[i + 1] ^= c
                nxt[i] ^= field.mul(c, root)
            poly = nxt
        if any(c not in (0, 1) for c in poly):
            raise FieldConstructionError("minimal polynomial has a non-binary coefficient")
        gen = _poly_mul_gf2(gen, poly)
    return gen


def bch_generator_poly(field, t, k):
    """Generator polynomial (ascending GF(2) coefficients), validated against k."""
    gen = _generator_poly(field, t)
    n = field.order - 1
    degree = len(gen) - 1
    if n - degree != k:
        raise ValueError(f"generator degree {degree} gives k={n - degree}, expected k={k}")
    return gen


def _poly_mod_x_power(power, gen):
    """x^power mod gen over GF(2); ascending coefficients of length deg(gen)."""
    deg = len(gen) - 1
    rem = np.zeros(deg, dtype=np.uint8)
    if power < deg:
        rem[power] = 1
        return rem
    rem[deg - 1] = 1
    reduced_top = gen[:deg]  # x^deg == sum of lower generator terms (mod gen)
    for _ in range(power - (deg - 1)):
        carry = rem[deg - 1]
        rem[1:] = rem[:-1]
        rem[0] = 0
        if carry:
            rem ^= reduced_top
    return rem


@dataclass(frozen=True, eq=False)
class BchSpec:
    """A t-error-correcting BCH code over GF(2^m), optionally parity-extended.

    n_inner = 2^m - 1 inner bits plus one overall even-parity bit when
    extended.  Lookup tables are derived once in make_bch_spec.
    """

    field: GaloisField
    n_inner: int
    k: int
    t: int
    extended: bool
    generator: np.ndarray        # ascending-power GF(2) coefficients
    parity_table: np.ndarray     # (k, n_inner - k) uint8
    syndrome_tables: np.ndarray  # (t, n_inner) int64; rows are S_1, S_3, ...
    _cache: dict = dc_field(default_factory=dict, compare=False, repr=False)

    @property
    def n(self):
        return self.n_inner + 1 if self.extended else self.n_inner

    def codebook(self):
        """All 2^k codewords as a (2^k, n) bit array.  Refused for k > 16."""
        if self.k > 16:
            raise ValueError(f"codebook enumeration refused for k={self.k} > 16")
        if "cb" not in self._cache:
            infos = ((np.arange(1 << self.k)[:, None] >> np.arange(self.k)) & 1).astype(np.uint8)
            cb = encode(infos, self)
            cb.setflags(write=False)
            self._cache["cb"] = cb
        return self._cache["cb"]


@lru_cache(maxsize=None)
def make_bch_spec(m, t, k=None, primitive_polynomial=None, extended=True):
    default_polys = {3: 0xB, 4: 0x13, 8: 0x11D}
    if primitive_polynomial is None:
        primitive_polynomial = default_polys[m]
    fld = build_field(m, primitive_polynomial)
    n_inner = fld.order - 1
    gen = _generator_poly(fld, t)
    derived_k = n_inner - (len(gen) - 1)
    if k is None:
        k = derived_k
    elif k != derived_k:
        raise ValueError(f"generator degree {len(gen) - 1} gives k={derived_k}, expected k={k}")
    n_k = n_inner - k
    # parity_table[i] = x^(n_inner-1-i) mod g; column j holds the coefficient
    # of x^(n_k-1-j), i.e. the bit at codeword position k+j
    table = np.zeros((k, n_k), dtype=np.uint8)
    for i in range(k):
        table[i] = _poly_mod_x_power(n_inner - 1 - i, gen)[::-1]
    synd = np.zeros((t, n_inner), dtype=np.int64)
    n1 = n_inner - 1
    for row, s in enumerate(range(1, 2 * t, 2)):
        synd[row] = fld.exp[(s * (n1 - np.arange(n_inner))) % (fld.order - 1)]
    table.setflags(write=False)
    synd.setflags(write=False)
    gen.setflags(write=False)
    return BchSpec(
        field=fld, n_inner=n_inner, k=k, t=t, extended=extended,
        generator=gen, parity_table=table, syndrome_tables=synd,
    )


def ebch_256_239():
    return make_bch_spec(m=8, t=2, k=239)


def ehamming_8_4():
    return make_bch_spec(m=3, t=1, k=4)


def encode(info, spec):
    """Systematically encode info bits (..., k) -> codeword bits (..., n).

    Info occupies positions 0..k-1, BCH parity k..n_inner-1, and the overall
    even-parity bit sits last when the spec is extended.
    """
    info = np.asarray(info, dtype=np.uint8)
    if info.shape[-1] != spec.k:
        raise ValueError(f"info length {info.shape[-1]} != k={spec.k}")
    parity = (info.astype(np.int64) @ spec.parity_table.astype(np.int64)) & 1
    inner = np.concatenate([info, parity.astype(np.uint8)], axis=-1)
    if not spec.extended:
        return inner
    overall = (inner.sum(axis=-1, dtype=np.int64) & 1).astype(np.uint8)
    return np.concatenate([inner, overall[..., None]], axis=-1)


def ebch_syndrome(word, spec):
    """Syndromes (S_1..S_2t) and even-parity flag of one or more words.

    Even syndromes are squares of the odd ones for binary words, so only the
    odd rows are accumulated from tables.  parity_ok is always True for
    non-extended specs.
    """
    word = np.asarray(word, dtype=np.uint8)
    if word.shape[-1] != spec.n:
        raise ValueError(f"word length {word.shape[-1]} != n={spec.n}")
    mask = word[..., : spec.n_inner].astype(bool)
    out = np.empty(word.shape[:-1] + (2 * spec.t,), dtype=np.int64)
    for row in range(spec.t):
        contrib = np.where(mask, spec.syndrome_tables[row], 0)
        out[..., 2 * row] = np.bitwise_xor.reduce(contrib, axis=-1)
    sq = _square_table(spec.field)
    for j in range(2, 2 * spec.t + 1, 2):
        out[..., j - 1] = sq[out[..., j // 2 - 1]]
    if spec.extended:
        parity_ok = (word.sum(axis=-1, dtype=np.int64) & 1) == 0
    else:
        parity_ok = np.ones(word.shape[:-1], dtype=bool)
    return out, parity_ok


@lru_cache(maxsize=None)
def _square_table(fld):
    tab = np.zeros(fld.order, dtype=np.int64)
    for a in range(1, fld.order):
        tab[a] = fld.mul(a, a)
    tab.setflags(write=False)
    return tab


def is_codeword(word, spec):
    synd, parity_ok = ebch_syndrome(word, spec)
    return not np.any(synd) and bool(np.all(parity_ok))


def bm_decode(word, spec):
    """Berlekamp-Massey decode of one (extended) BCH word.

    Returns a valid codeword obtained by correcting <= t inner positions and
    recomputing the overall parity bit, or None on any inconsistency
    (locator degree above t, root count below the locator degree, residual
    syndrome).  Never returns a best-effort invalid word.
    """
    word = np.asarray(word, dtype=np.uint8)
    synd, _ = ebch_syndrome(word, spec)
    synd_list = [int(s) for s in synd]
    inner = word[: spec.n_inner].copy()
    if any(synd_list):
        fld = spec.field
        nsyms = 2 * spec.t
        c = np.zeros(nsyms + 1, dtype=np.int64); c[0] = 1
        b = np.zeros(nsyms + 1, dtype=np.int64); b[0] = 1
        L, shift, b_disc = 0, 1, 1
        for i in range(nsyms):
            d = synd_list[i]
            for j in range(1, L + 1):
                d ^= fld.mul(int(c[j]), synd_list[i - j])
            if d == 0:
                shift += 1
                continue
            coef = fld.div(d, b_disc)
            prev = c.copy()
            for j in range(nsyms + 1 - shift):
                if b[j]:
                    c[j + shift] ^= fld.mul(coef, int(b[j]))
            if 2 * L <= i:
                b, L, b_disc, shift = prev, i + 1 - L, d, 1
            else:
                shift += 1
        if L > spec.t:
            return None
        loc = [int(x) for x in c[: L + 1]]
        roots = []
        for j in range(spec.n_inner):
            acc = 0
            for deg, coef in enumerate(loc):
                if coef:
                    acc ^= fld.mul(coef, fld.pow(int(fld.exp[j]), deg))
            if acc == 0:
                roots.append(j)
        if len(roots) != L:
            return None
        q1 = fld.order - 1
        for j in roots:
            pos = spec.n_inner - 1 - ((q1 - j) % q1)
            if not 0 <= pos < spec.n_inner:
                return None
            inner[pos] ^= 1
        check = inner if not spec.extended else np.concatenate(
            [inner, np.zeros(1, dtype=np.uint8)])
        resid, _ = ebch_syndrome(check, spec)
        if np.any(resid):
            return None
    if not spec.extended:
        return inner
    overall = np.uint8(inner.sum(dtype=np.int64) & 1)
    return np.concatenate([inner, overall[None]])


def map_decode_exhaustive(llr, code):
    """Exact bitwise posterior LLRs and max-correlation hard word of a small code.

    code is a BchSpec (k <= 16 enforced) or a raw (C, n) codebook bit array.
    Posteriors come from a stable log-sum-exp over exp(correlation/2); a bit
    value unrepresented on one side yields a +/-inf clamp.
    """
    llr = np.asarray(llr, dtype=np.float64)
    if isinstance(code, BchSpec):
        cb = code.codebook()
    else:
        cb = np.asarray(code, dtype=np.uint8)
        if cb.ndim != 2 or cb.shape[0] > (1 << 16):
            raise ValueError("codebook must be (C, n) with C <= 2^16")
    if cb.shape[1] != llr.shape[-1]:
        raise ValueError("llr length does not match code length")
    tau = 1.0 - 2.0 * cb.astype(np.float64)
    corr = tau @ llr
    hard = cb[int(np.argmax(corr))].copy()
    half = corr / 2.0
    w = np.exp(half - half.max())
    post = np.empty(cb.shape[1])
    for j in range(cb.shape[1]):
        s0 = w[cb[:, j] == 0].sum()
        s1 = w[cb[:, j] == 1].sum()
        if s0 == 0.0:
            post[j] = -LLR_INF
        elif s1 == 0.0:
            post[j] = LLR_INF
        else:
            post[j] = np.log(s0) - np.log(s1)
    return post, hard
