"""Product code construction, BPSK mapping, AWGN channel and LLRs.

A product code block is the n_c x n_r array obtained by encoding the k_c
rows of a k_c x k_r info array with the row code and then all n_r columns
with the column code.  Noise is generated from a counter-based Philox
stream keyed by (master_seed, frame_index) so any frame is reproducible in
isolation; Gaussians come from the inverse CDF applied to centered 53-bit
uniforms, drawn in row-major order.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, ndtri

from .bch import BchSpec, encode


@dataclass(frozen=True, eq=False)
class ProductCodeSpec:
    column_code: BchSpec
    row_code: BchSpec

    @property
    def n_c(self):
        return self.column_code.n

    @property
    def n_r(self):
        return self.row_code.n

    @property
    def k_c(self):
        return self.column_code.k

    @property
    def k_r(self):
        return self.row_code.k

    @property
    def rate(self):
        return (self.k_c * self.k_r) / (self.n_c * self.n_r)


def tpc_encode(info, spec):
    """Encode a (k_c, k_r) info array into an (n_c, n_r) product codeword."""
    info = np.asarray(info, dtype=np.uint8)
    if info.shape[-2:] != (spec.k_c, spec.k_r):
        raise ValueError(
            f"info shape {info.shape[-2:]} != ({spec.k_c}, {spec.k_r})")
    rows = encode(info, spec.row_code)                       # (..., k_c, n_r)
    cols = encode(np.swapaxes(rows, -1, -2), spec.column_code)
    return np.swapaxes(cols, -1, -2)                         # (..., n_c, n_r)


def tpc_extract_info(llr_matrix, spec):
    """Hard info bits from the systematic corner of an a posteriori matrix.

    Ties (zero LLR) resolve to bit 0.
    """
    block = np.asarray(llr_matrix)[..., : spec.k_c, : spec.k_r]
    return (block < 0).astype(np.uint8)


@dataclass(frozen=True)
class ChannelParams:
    """AWGN at a given symbol SNR; sigma = sqrt(1 / (2 * 10^(EsN0_db/10)))."""

    es_n0_db: float

    @property
    def sigma(self):
        return float(np.sqrt(1.0 / (2.0 * 10.0 ** (self.es_n0_db / 10.0))))

    @property
    def noise_var(self):
        return self.sigma ** 2


def bpsk(bits):
    """Map bit 0 -> +1.0, bit 1 -> -1.0."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


def frame_rng(master_seed, frame_index):
    """Philox generator keyed by (master_seed, frame_index)."""
    key = np.array([master_seed, frame_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def standard_normal(rng, shape):
    """Inverse-CDF Gaussians from centered 53-bit uniforms (deterministic variant)."""
    u = (rng.integers(0, 1 << 53, size=shape, dtype=np.int64) + 0.5) / float(1 << 53)
    return ndtri(u)


def awgn(symbols, sigma, rng):
    symbols = np.asarray(symbols, dtype=np.float64)
    return symbols + sigma * standard_normal(rng, symbols.shape)


def llr(received, sigma):
    """Channel LLRs 2*y/sigma^2; positive favors bit 0."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return 2.0 * np.asarray(received, dtype=np.float64) / (sigma * sigma)


def q_function(x):
    return 0.5 * erfc(np.asarray(x, dtype=np.float64) / np.sqrt(2.0))


def uncoded_bpsk_ber(es_n0_db):
    """Theory reference: P_b = Q(1/sigma) for hard-decision BPSK."""
    return float(q_function(1.0 / ChannelParams(es_n0_db).sigma))
