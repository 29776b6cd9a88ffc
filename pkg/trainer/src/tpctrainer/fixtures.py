"""Cross-framework fixture export.

Writes (t, J, score) rows the decoder can replay against its own
forward pass, cycling through every half-iteration and every candidate
count from a single slot up to a full table.
"""

import json

import numpy as np
import torch

from .model import read_weight_file, scorer_from_group
from .records import build_j


def synthetic_inputs(p, n, n_half, count, seed):
    """Deterministic (t, J) pairs; g cycles over 1..2^p with both extremes."""
    rng = np.random.default_rng(seed)
    slot = 2 ** p
    g_cycle = [1, slot] + list(range(2, slot))
    out = []
    for i in range(count):
        t = 1 + i % n_half
        g = g_cycle[i % len(g_cycle)]
        llr = rng.standard_normal(n)
        cands = rng.integers(0, 2, size=(g, n), dtype=np.uint8)
        out.append((t, build_j(llr, list(cands), slot)))
    return out


def export_fixtures(weights_path, out_path, count=128, seed=0):
    """Score synthetic inputs with every stored scorer; returns row count."""
    meta, groups = read_weight_file(weights_path)
    p, n = meta["p"], meta["n"]
    models = [scorer_from_group(p, n, g, double=True).eval() for g in groups]
    pairs = synthetic_inputs(p, n, 2 * meta["n_t"], count, seed)
    with open(out_path, "w") as fh:
        for t, j in pairs:
            with torch.no_grad():
                v = float(models[t - 1](torch.from_numpy(j[None])))
            fh.write(json.dumps({"t": t, "j": [float(x) for x in j.reshape(-1)],
                                 "v": v}) + "\n")
    return len(pairs)


def replay_fixtures(weights_path, fixture_path, rtol=1e-4):
    """Worst relative error of the stored scores against a re-forward."""
    meta, groups = read_weight_file(weights_path)
    p, n = meta["p"], meta["n"]
    models = [scorer_from_group(p, n, g, double=True).eval() for g in groups]
    worst = 0.0
    bad = 0
    with open(fixture_path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            j = np.array(rec["j"]).reshape(n, 2 ** p + 1)
            with torch.no_grad():
                got = float(models[int(rec["t"]) - 1](torch.from_numpy(j[None])))
            want = float(rec["v"])
            err = abs(got - want) / max(1e-12, abs(want)) if want else abs(got)
            worst = max(worst, err)
            bad += err > rtol
    return worst, bad
