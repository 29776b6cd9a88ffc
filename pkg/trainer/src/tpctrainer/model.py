"""Torch scorer matching the decoder-side transformer bit for bit.

One scorer per half-iteration: two pre-norm attention blocks over the
candidate-table tokens, a class token read out through a linear head.
The decoder consumes plain numpy arrays laid out as (in, out) matrices,
so exports transpose every torch Linear weight.
"""

import json
import math

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

FORMAT_NAME = "tpc-rollback-weights"
FORMAT_VERSION = 1
DEPTH = 2
HEADS = 4
HEAD_DIM = 256
MLP_DIM = 256
LN_EPS = 1e-5
ACTIVATION = "gelu_erf"


def features(p):
    return 2 ** p + 1


def tokens(n):
    return n + 1


class _Head(nn.Module):
    def __init__(self, f):
        super().__init__()
        self.q = nn.Linear(f, HEAD_DIM)
        self.k = nn.Linear(f, HEAD_DIM)
        self.v = nn.Linear(f, HEAD_DIM)


class _Block(nn.Module):
    def __init__(self, f):
        super().__init__()
        self.ln1 = nn.LayerNorm(f, eps=LN_EPS)
        self.heads = nn.ModuleList([_Head(f) for _ in range(HEADS)])
        self.wo = nn.Linear(HEADS * HEAD_DIM, f)
        self.ln2 = nn.LayerNorm(f, eps=LN_EPS)
        self.w1 = nn.Linear(f, MLP_DIM)
        self.w2 = nn.Linear(MLP_DIM, f)


class HalfIterScorer(nn.Module):
    """Keep/rollback score for a batch of J matrices (B, n, 2^p + 1)."""

    def __init__(self, p, n):
        super().__init__()
        self.p = p
        self.n = n
        f = features(p)
        self.class_token = nn.Parameter(torch.zeros(1, f))
        self.positional = nn.Parameter(torch.zeros(tokens(n), f))
        self.blocks = nn.ModuleList([_Block(f) for _ in range(DEPTH)])
        self.final_ln = nn.LayerNorm(f, eps=LN_EPS)
        self.head = nn.Linear(f, 1)

    def forward(self, j):
        b = j.shape[0]
        cls = self.class_token.unsqueeze(0).expand(b, -1, -1)
        x = torch.cat([cls, j], dim=1) + self.positional
        for blk in self.blocks:
            h_in = blk.ln1(x)
            parts = []
            for head in blk.heads:
                q = head.q(h_in)
                k = head.k(h_in)
                v = head.v(h_in)
                att = torch.softmax(
                    q @ k.transpose(1, 2) / math.sqrt(HEAD_DIM), dim=-1)
                parts.append(att @ v)
            x = x + blk.wo(torch.cat(parts, dim=-1))
            m_in = blk.ln2(x)
            x = x + blk.w2(F.gelu(blk.w1(m_in)))
        return self.head(self.final_ln(x)[:, 0, :])[:, 0]


def init_scorer(p, n, seed):
    """Fresh scorer with N(0, 0.02) weights and zero biases."""
    gen = torch.Generator().manual_seed(seed)
    model = HalfIterScorer(p, n)
    with torch.no_grad():
        for name, par in model.named_parameters():
            if name.endswith("bias"):
                par.zero_()
            elif "ln" in name and name.endswith("weight"):
                par.fill_(1.0)
            else:
                par.normal_(0.0, 0.02, generator=gen)
    return model


def group_directory(p, n):
    """(name, shape) pairs in the serialized order for one scorer."""
    f = features(p)
    out = [("embed/class", (1, f)), ("embed/positional", (tokens(n), f))]
    for b in range(DEPTH):
        blk = f"block{b}"
        out += [(f"{blk}/ln1/scale", (f,)), (f"{blk}/ln1/bias", (f,))]
        for h in range(HEADS):
            hd = f"{blk}/attn/head{h}"
            out += [(f"{hd}/wq", (f, HEAD_DIM)), (f"{hd}/bq", (HEAD_DIM,)),
                    (f"{hd}/wk", (f, HEAD_DIM)), (f"{hd}/bk", (HEAD_DIM,)),
                    (f"{hd}/wv", (f, HEAD_DIM)), (f"{hd}/bv", (HEAD_DIM,))]
        out += [(f"{blk}/attn/wo", (HEADS * HEAD_DIM, f)),
                (f"{blk}/attn/bo", (f,)),
                (f"{blk}/ln2/scale", (f,)), (f"{blk}/ln2/bias", (f,)),
                (f"{blk}/mlp/w1", (f, MLP_DIM)), (f"{blk}/mlp/b1", (MLP_DIM,)),
                (f"{blk}/mlp/w2", (MLP_DIM, f)), (f"{blk}/mlp/b2", (f,))]
    out += [("final_ln/scale", (f,)), ("final_ln/bias", (f,)),
            ("head/w", (f, 1)), ("head/b", (1,))]
    return out


def _param_map(model):
    """name -> (torch parameter, transpose flag) in directory order."""
    out = {"embed/class": (model.class_token, False),
           "embed/positional": (model.positional, False)}
    for b, blk in enumerate(model.blocks):
        pre = f"block{b}"
        out[f"{pre}/ln1/scale"] = (blk.ln1.weight, False)
        out[f"{pre}/ln1/bias"] = (blk.ln1.bias, False)
        for h, head in enumerate(blk.heads):
            hd = f"{pre}/attn/head{h}"
            out[f"{hd}/wq"] = (head.q.weight, True)
            out[f"{hd}/bq"] = (head.q.bias, False)
            out[f"{hd}/wk"] = (head.k.weight, True)
            out[f"{hd}/bk"] = (head.k.bias, False)
            out[f"{hd}/wv"] = (head.v.weight, True)
            out[f"{hd}/bv"] = (head.v.bias, False)
        out[f"{pre}/attn/wo"] = (blk.wo.weight, True)
        out[f"{pre}/attn/bo"] = (blk.wo.bias, False)
        out[f"{pre}/ln2/scale"] = (blk.ln2.weight, False)
        out[f"{pre}/ln2/bias"] = (blk.ln2.bias, False)
        out[f"{pre}/mlp/w1"] = (blk.w1.weight, True)
        out[f"{pre}/mlp/b1"] = (blk.w1.bias, False)
        out[f"{pre}/mlp/w2"] = (blk.w2.weight, True)
        out[f"{pre}/mlp/b2"] = (blk.w2.bias, False)
    out["final_ln/scale"] = (model.final_ln.weight, False)
    out["final_ln/bias"] = (model.final_ln.bias, False)
    out["head/w"] = (model.head.weight, True)
    out["head/b"] = (model.head.bias, False)
    return out


def to_group(model):
    """Float32 numpy group in decoder layout; Linear weights transposed."""
    group = {}
    for name, (par, transpose) in _param_map(model).items():
        arr = par.detach().cpu().numpy()
        if transpose:
            arr = arr.T
        group[name] = np.ascontiguousarray(arr, dtype=np.float32)
    return group


def from_group(model, group):
    """Load a decoder-layout group back into the torch scorer in place."""
    with torch.no_grad():
        for name, (par, transpose) in _param_map(model).items():
            arr = np.asarray(group[name], dtype=np.float64)
            if transpose:
                arr = arr.T
            if tuple(arr.shape) != tuple(par.shape):
                raise ValueError(f"{name}: shape {arr.shape} != {tuple(par.shape)}")
            par.copy_(torch.from_numpy(arr.copy()).to(par.dtype))
    return model


def scorer_from_group(p, n, group, double=True):
    model = HalfIterScorer(p, n)
    if double:
        model = model.double()
    return from_group(model, group)


def write_weight_file(path, p, n, n_t, trained_half_iters, groups):
    """Serialize 2 n_t scorer groups as manifest line + float32 payload.

    Missing trailing groups are padded with copies of the last trained
    one so the file always carries the full schedule.
    """
    n_half = 2 * n_t
    if not groups:
        raise ValueError("need at least one trained group")
    if len(groups) > n_half:
        raise ValueError(f"{len(groups)} groups for {n_half} half-iterations")
    full = list(groups) + [groups[-1]] * (n_half - len(groups))
    directory = {}
    chunks = []
    offset = 0
    for t in range(1, n_half + 1):
        grp = full[t - 1]
        for name, shape in group_directory(p, n):
            arr = np.ascontiguousarray(grp[name], dtype="<f4")
            if arr.shape != shape:
                raise ValueError(f"t{t}/{name}: shape {arr.shape} != {shape}")
            directory[f"t{t}/{name}"] = {"offset": offset,
                                         "shape": list(shape),
                                         "dtype": "float32"}
            chunks.append(arr.tobytes())
            offset += arr.nbytes
    manifest = {
        "format": FORMAT_NAME, "version": FORMAT_VERSION,
        "p": p, "n": n, "n_t": n_t,
        "depth": DEPTH, "heads": HEADS, "head_dim": HEAD_DIM,
        "mlp_dim": MLP_DIM, "activation": ACTIVATION, "ln_eps": LN_EPS,
        "trained_half_iters": trained_half_iters,
        "tensors": directory,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(manifest).encode("utf-8"))
        fh.write(b"\n\n")
        for chunk in chunks:
            fh.write(chunk)
    return path


def read_weight_file(path):
    """Parse a scorer weight file; returns (meta, groups).

    meta carries p, n, n_t and trained_half_iters; groups is one dict of
    float32 arrays per half-iteration.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    nl = blob.find(b"\n")
    if nl < 0 or blob[nl + 1:nl + 2] != b"\n":
        raise ValueError("missing manifest/payload separator")
    manifest = json.loads(blob[:nl].decode("utf-8"))
    if manifest.get("format") != FORMAT_NAME:
        raise ValueError(f"unexpected format {manifest.get('format')!r}")
    if manifest.get("version") != FORMAT_VERSION:
        raise ValueError(f"unexpected version {manifest.get('version')!r}")
    p, n, n_t = (int(manifest[k]) for k in ("p", "n", "n_t"))
    payload = blob[nl + 2:]
    groups = []
    for t in range(1, 2 * n_t + 1):
        grp = {}
        for name, shape in group_directory(p, n):
            ent = manifest["tensors"][f"t{t}/{name}"]
            start = int(ent["offset"])
            count = int(np.prod(shape))
            arr = np.frombuffer(payload, dtype="<f4", count=count,
                                offset=start).reshape(shape)
            grp[name] = arr.copy()
        groups.append(grp)
    meta = {"p": p, "n": n, "n_t": n_t,
            "trained_half_iters": int(manifest["trained_half_iters"])}
    return meta, groups
