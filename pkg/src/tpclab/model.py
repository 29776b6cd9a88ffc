"""Rollback scorer: feature construction, forward pass, weight-file I/O.

The scorer is a small ViT-style encoder applied per component decode.  Its
input J has one token per code position and 2^p + 1 features: column 0 is
the scaled LLR vector, columns 1..g are the BPSK-mapped candidates in
descending-correlation order, the rest are exact zeros.  A learned
classification token is prepended; its final representation drives the
keep/rollback score.

Architecture constants below are fixed for this lab and recorded in every
weight file so training and inference cannot drift apart: pre-norm blocks,
depth 2, 4 heads of width 256 (so the attention projects 2^p+1 up to 1024
and back), MLP width 256, erf-exact GELU, layer-norm epsilon 1e-5, scaled
dot-product attention (1/sqrt(head width)), no dropout at inference.
Forward math runs in float64 regardless of the float32 storage unless a
narrower dtype is requested explicitly.
"""

import json
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.special import erf

FORMAT_NAME = "tpc-rollback-weights"
FORMAT_VERSION = 1
DEPTH = 2
HEADS = 4
HEAD_DIM = 256
MLP_DIM = 256
LN_EPS = 1e-5
ACTIVATION = "gelu_erf"


@dataclass(frozen=True)
class ModelDims:
    p: int
    n: int

    @property
    def slot_count(self):
        return 2 ** self.p

    @property
    def features(self):
        return 2 ** self.p + 1

    @property
    def tokens(self):
        return self.n + 1


def tensor_directory(dims):
    """Fixed (name, shape) listing for one half-iteration group."""
    f = dims.features
    out = [
        ("embed/class", (1, f)),
        ("embed/positional", (dims.tokens, f)),
    ]
    for b in range(DEPTH):
        blk = f"block{b}"
        out += [(f"{blk}/ln1/scale", (f,)), (f"{blk}/ln1/bias", (f,))]
        for h in range(HEADS):
            hd = f"{blk}/attn/head{h}"
            out += [
                (f"{hd}/wq", (f, HEAD_DIM)), (f"{hd}/bq", (HEAD_DIM,)),
                (f"{hd}/wk", (f, HEAD_DIM)), (f"{hd}/bk", (HEAD_DIM,)),
                (f"{hd}/wv", (f, HEAD_DIM)), (f"{hd}/bv", (HEAD_DIM,)),
            ]
        out += [
            (f"{blk}/attn/wo", (HEADS * HEAD_DIM, f)),
            (f"{blk}/attn/bo", (f,)),
            (f"{blk}/ln2/scale", (f,)), (f"{blk}/ln2/bias", (f,)),
            (f"{blk}/mlp/w1", (f, MLP_DIM)), (f"{blk}/mlp/b1", (MLP_DIM,)),
            (f"{blk}/mlp/w2", (MLP_DIM, f)), (f"{blk}/mlp/b2", (f,)),
        ]
    out += [
        ("final_ln/scale", (f,)), ("final_ln/bias", (f,)),
        ("head/w", (f, 1)), ("head/b", (1,)),
    ]
    return out


@dataclass
class WeightSet:
    """All 2*N_T half-iteration parameter groups plus dimensions."""

    dims: ModelDims
    n_t: int
    groups: list                      # list of dict name -> float32 array
    trained_half_iters: int = None    # groups beyond this are padding copies

    def __post_init__(self):
        if self.trained_half_iters is None:
            self.trained_half_iters = 2 * self.n_t
        if len(self.groups) != 2 * self.n_t:
            raise ValueError(
                f"need {2 * self.n_t} half-iteration groups, "
                f"got {len(self.groups)}")

    @property
    def slot_count(self):
        return self.dims.slot_count

    def half_iter(self, t):
        """Parameter group for 1-based half-iteration t."""
        if not 1 <= t <= 2 * self.n_t:
            raise ValueError(f"half-iteration {t} outside 1..{2 * self.n_t}")
        return self.groups[t - 1]


def random_weights(dims, n_t=4, seed=0, scale=0.02):
    """ViT-style random initialization; layer norms start at identity."""
    rng = np.random.default_rng(seed)
    groups = []
    for _ in range(2 * n_t):
        grp = {}
        for name, shape in tensor_directory(dims):
            leaf = name.rsplit("/", 1)[-1]
            if leaf == "scale":
                grp[name] = np.ones(shape, dtype=np.float32)
            elif leaf.startswith("b"):
                grp[name] = np.zeros(shape, dtype=np.float32)
            else:
                grp[name] = (scale * rng.standard_normal(shape)).astype(np.float32)
        groups.append(grp)
    return WeightSet(dims=dims, n_t=n_t, groups=groups)


def zero_weights(dims, n_t=4):
    groups = [{name: np.zeros(shape, dtype=np.float32)
               for name, shape in tensor_directory(dims)}
              for _ in range(2 * n_t)]
    return WeightSet(dims=dims, n_t=n_t, groups=groups)


def gelu(x):
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def layer_norm(x, scale, bias, eps=LN_EPS):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * scale + bias


def _softmax(x):
    m = x.max(axis=-1, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=-1, keepdims=True)


def build_model_input(l, candidate_set, p):
    """Reference single-vector J construction from a decoded candidate set."""
    l = np.asarray(l, dtype=np.float64)
    n = len(l)
    if candidate_set.g < 1:
        raise ValueError("model input needs at least one candidate")
    if candidate_set.g > 2 ** p:
        raise ValueError(f"g={candidate_set.g} exceeds 2^p={2 ** p} slots")
    norm = np.linalg.norm(l)
    if norm == 0.0:
        raise ValueError("cannot scale a zero LLR vector")
    j = np.zeros((n, 2 ** p + 1))
    j[:, 0] = np.sqrt(n) * l / norm
    tau = 1.0 - 2.0 * candidate_set.sorted_codewords().astype(np.float64)
    j[:, 1:1 + candidate_set.g] = tau.T
    return j


def build_inputs_batch(llr, bits, g, slot_count):
    """Batched J construction.

    llr (M, n); bits (M, S, n) correlation-sorted candidate bits with
    garbage at slots >= g; g (M,).  S may be smaller than slot_count when
    the batch maximum g allows it.
    """
    llr = np.asarray(llr, dtype=np.float64)
    m_rows, n = llr.shape
    if int(g.max(initial=0)) > slot_count:
        raise ValueError("candidate count exceeds the model's slot count")
    norm = np.linalg.norm(llr, axis=1)
    if np.any(norm == 0.0):
        raise ValueError("cannot scale a zero LLR vector")
    out = np.zeros((m_rows, n, slot_count + 1))
    out[:, :, 0] = np.sqrt(n) * llr / norm[:, None]
    s_eff = min(bits.shape[1], slot_count)
    tau = 1.0 - 2.0 * bits[:, :s_eff, :].astype(np.float64)
    live = (np.arange(s_eff)[None, :] < g[:, None]).astype(np.float64)
    out[:, :, 1:1 + s_eff] = (tau * live[:, :, None]).transpose(0, 2, 1)
    return out


def forward_batch(inputs, group, dtype=np.float64):
    """Scores for a batch of J matrices (M, n, features) -> (M,)."""
    x = np.asarray(inputs, dtype=dtype)
    if x.ndim != 3:
        raise ValueError("expected a batched (M, n, features) input")
    m_rows, n, feats = x.shape

    def w(name):
        return group[name].astype(dtype)

    cls = w("embed/class")
    pos = w("embed/positional")
    if feats != cls.shape[1] or n + 1 != pos.shape[0]:
        raise ValueError(
            f"input shape {(n, feats)} does not match weights "
            f"{(pos.shape[0] - 1, cls.shape[1])}")
    tokens = np.concatenate(
        [np.broadcast_to(cls, (m_rows, 1, feats)), x], axis=1) + pos

    for b in range(DEPTH):
        blk = f"block{b}"
        h_in = layer_norm(tokens, w(f"{blk}/ln1/scale"), w(f"{blk}/ln1/bias"))
        head_outs = []
        for h in range(HEADS):
            hd = f"{blk}/attn/head{h}"
            q = h_in @ w(f"{hd}/wq") + w(f"{hd}/bq")
            k = h_in @ w(f"{hd}/wk") + w(f"{hd}/bk")
            v = h_in @ w(f"{hd}/wv") + w(f"{hd}/bv")
            scores = (q @ k.transpose(0, 2, 1)) / np.sqrt(q.shape[-1])
            head_outs.append(_softmax(scores) @ v)
        attn = np.concatenate(head_outs, axis=-1)
        tokens = tokens + (attn @ w(f"{blk}/attn/wo") + w(f"{blk}/attn/bo"))
        m_in = layer_norm(tokens, w(f"{blk}/ln2/scale"), w(f"{blk}/ln2/bias"))
        hidden = gelu(m_in @ w(f"{blk}/mlp/w1") + w(f"{blk}/mlp/b1"))
        tokens = tokens + (hidden @ w(f"{blk}/mlp/w2") + w(f"{blk}/mlp/b2"))

    out = layer_norm(tokens, w("final_ln/scale"), w("final_ln/bias"))
    score = out[:, 0, :] @ w("head/w") + w("head/b")
    return score[:, 0]


def forward(j, group, dtype=np.float64):
    """Score for a single J matrix (n, features)."""
    return float(forward_batch(np.asarray(j)[None], group, dtype=dtype)[0])


def save_weights(path, weight_set):
    """Write manifest line + blank line + little-endian float32 payload."""
    dims = weight_set.dims
    directory = {}
    chunks = []
    offset = 0
    for t in range(1, 2 * weight_set.n_t + 1):
        grp = weight_set.groups[t - 1]
        for name, shape in tensor_directory(dims):
            full = f"t{t}/{name}"
            arr = np.ascontiguousarray(grp[name], dtype="<f4")
            if arr.shape != shape:
                raise ValueError(f"{full}: expected shape {shape}, have {arr.shape}")
            directory[full] = {"offset": offset, "shape": list(shape),
                               "dtype": "float32"}
            chunks.append(arr.tobytes())
            offset += arr.nbytes
    manifest = {
        "format": FORMAT_NAME, "version": FORMAT_VERSION,
        "p": dims.p, "n": dims.n, "n_t": weight_set.n_t,
        "depth": DEPTH, "heads": HEADS, "head_dim": HEAD_DIM,
        "mlp_dim": MLP_DIM, "activation": ACTIVATION, "ln_eps": LN_EPS,
        "trained_half_iters": weight_set.trained_half_iters,
        "tensors": directory,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(manifest).encode("utf-8"))
        fh.write(b"\n\n")
        for chunk in chunks:
            fh.write(chunk)


def load_weights(path):
    """Read and validate a weight file; errors list every offending tensor."""
    with open(path, "rb") as fh:
        blob = fh.read()
    nl = blob.find(b"\n")
    if nl < 0 or not blob[nl + 1:nl + 2] == b"\n":
        raise ValueError("missing manifest/payload separator")
    try:
        manifest = json.loads(blob[:nl].decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"unparseable manifest: {exc}") from exc
    if manifest.get("format") != FORMAT_NAME:
        raise ValueError(f"not a weight file (format={manifest.get('format')!r})")
    if manifest.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported weight format version {manifest.get('version')!r}")
    for key, want in (("depth", DEPTH), ("heads", HEADS), ("head_dim", HEAD_DIM),
                      ("mlp_dim", MLP_DIM), ("activation", ACTIVATION),
                      ("ln_eps", LN_EPS)):
        if manifest.get(key) != want:
            raise ValueError(f"manifest {key}={manifest.get(key)!r} differs "
                             f"from this implementation's {want!r}")
    dims = ModelDims(p=int(manifest["p"]), n=int(manifest["n"]))
    n_t = int(manifest["n_t"])
    payload = blob[nl + 2:]
    tensors = manifest["tensors"]

    problems = []
    groups = []
    for t in range(1, 2 * n_t + 1):
        grp = {}
        for name, shape in tensor_directory(dims):
            full = f"t{t}/{name}"
            meta = tensors.get(full)
            if meta is None:
                problems.append(f"{full}: missing")
                continue
            if tuple(meta["shape"]) != shape:
                problems.append(
                    f"{full}: shape {tuple(meta['shape'])} != expected {shape}")
                continue
            if meta.get("dtype") != "float32":
                problems.append(f"{full}: dtype {meta.get('dtype')!r}")
                continue
            count = int(np.prod(shape, dtype=np.int64))
            start = int(meta["offset"])
            end = start + 4 * count
            if end > len(payload):
                problems.append(f"{full}: payload truncated "
                                f"(needs {end} bytes, have {len(payload)})")
                continue
            grp[name] = np.frombuffer(
                payload[start:end], dtype="<f4").reshape(shape).copy()
        groups.append(grp)
    extra = set(tensors) - {f"t{t}/{name}"
                            for t in range(1, 2 * n_t + 1)
                            for name, _ in tensor_directory(dims)}
    for name in sorted(extra):
        problems.append(f"{name}: not part of the tensor scheme")
    if problems:
        raise ValueError("weight file validation failed:\n  " +
                         "\n  ".join(problems))
    return WeightSet(dims=dims, n_t=n_t, groups=groups,
                     trained_half_iters=int(
                         manifest.get("trained_half_iters", 2 * n_t)))
