"""Training-record ingestion.

The decoder side emits one JSON object per component decode: the soft
input vector, the candidate codewords in descending correlation order,
and a binary keep label.  This module turns those rows into the (n,
2^p + 1) score-model input J: a scaled LLR column followed by one BPSK
column per candidate, zero padded to the slot count.
"""

import json

import numpy as np

RECORD_KEYS = {"t", "l", "candidates", "correlations", "v",
               "frame_index", "vector_index"}


def read_records(path):
    """Load a JSONL dataset; returns a list of dicts with bit arrays."""
    out = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            missing = RECORD_KEYS - set(row)
            if missing:
                raise ValueError(f"{path}:{ln}: missing keys {sorted(missing)}")
            row["l"] = np.asarray(row["l"], dtype=np.float64)
            row["candidates"] = [
                np.frombuffer(c.encode(), dtype=np.uint8) - ord("0")
                for c in row["candidates"]
            ]
            out.append(row)
    return out


def build_j(llr, candidates, slot_count):
    """J matrix (n, slot_count + 1) for one component decode.

    Column 0 carries sqrt(n) * l / ||l||, columns 1..g the candidate
    words as +/-1 symbols in the given order, the rest zeros.
    """
    llr = np.asarray(llr, dtype=np.float64)
    n = llr.shape[0]
    g = len(candidates)
    if g > slot_count:
        raise ValueError(f"{g} candidates exceed slot count {slot_count}")
    norm = np.linalg.norm(llr)
    if norm == 0.0:
        raise ValueError("cannot scale a zero LLR vector")
    j = np.zeros((n, slot_count + 1))
    j[:, 0] = np.sqrt(n) * llr / norm
    for s, word in enumerate(candidates):
        j[:, 1 + s] = 1.0 - 2.0 * np.asarray(word, dtype=np.float64)
    return j


def assemble_dataset(records, p):
    """Stack records into (inputs, labels) float32 arrays.

    All records must share one half-iteration index; the label balance
    is returned alongside so callers can log imbalance.
    """
    if not records:
        raise ValueError("empty training dataset")
    t_values = sorted({int(r["t"]) for r in records})
    if len(t_values) != 1:
        raise ValueError(f"records mix half-iterations {t_values}")
    slot = 2 ** p
    n = records[0]["l"].shape[0]
    inputs = np.empty((len(records), n, slot + 1), dtype=np.float32)
    labels = np.empty(len(records), dtype=np.float32)
    for i, rec in enumerate(records):
        inputs[i] = build_j(rec["l"], rec["candidates"], slot)
        labels[i] = float(rec["v"])
    counts = (int((labels == 0).sum()), int((labels == 1).sum()))
    return inputs, labels, t_values[0], counts
