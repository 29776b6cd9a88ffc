"""Derivative-free fitting of per-half-iteration rollback thresholds.

The objective is a Monte-Carlo BER evaluated with common random numbers
(the same frame seeds for every candidate vector), which makes it a
deterministic piecewise-constant function a simplex search can descend.
Plain Nelder-Mead with the standard coefficients does the descending.
"""

from dataclasses import dataclass

import numpy as np

RHO = 1.0     # reflection
CHI = 2.0     # expansion
GAMMA = 0.5   # contraction
SIGMA = 0.5   # shrink


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fx: float
    evals: int
    reason: str            # "tol_x" | "tol_f" | "max_evals"
    best_trace: list       # best value after each evaluation, non-increasing


def nelder_mead(objective, x0, *, step=1.0, max_evals=2000,
                tol_x=1e-9, tol_f=1e-12, tie_key=None):
    """Minimize `objective` from `x0` with a fresh axis-aligned simplex.

    Non-finite objective values are treated as +inf.  Terminates when the
    simplex diameter drops below tol_x, the value spread drops below
    tol_f, or the evaluation budget runs out, whichever happens first;
    the budget is honored during simplex construction too.  `tie_key`
    breaks exact value ties deterministically (smaller key preferred).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    d = x0.size
    steps = np.broadcast_to(np.asarray(step, dtype=np.float64), (d,))
    key = tie_key if tie_key is not None else (lambda x: 0.0)

    state = {"evals": 0, "best": (np.inf, x0.copy()), "trace": []}

    def fev(x):
        val = float(objective(np.asarray(x, dtype=np.float64)))
        if not np.isfinite(val):
            val = np.inf
        state["evals"] += 1
        bf, bx = state["best"]
        if val < bf or (val == bf and key(x) < key(bx)):
            state["best"] = (val, np.array(x, dtype=np.float64))
        state["trace"].append(state["best"][0])
        return val

    def done(reason):
        bf, bx = state["best"]
        return NelderMeadResult(x=bx, fx=bf, evals=state["evals"],
                                reason=reason, best_trace=state["trace"])

    verts = [x0.copy()]
    for i in range(d):
        v = x0.copy()
        v[i] += steps[i]
        verts.append(v)
    vals = []
    for v in verts:
        if state["evals"] >= max_evals:
            return done("max_evals")
        vals.append(fev(v))

    while True:
        order = sorted(range(d + 1), key=lambda i: (vals[i], key(verts[i])))
        verts = [verts[i] for i in order]
        vals = [vals[i] for i in order]
        diameter = max(np.abs(v - verts[0]).max() for v in verts[1:])
        spread = vals[-1] - vals[0]
        if diameter < tol_x:
            return done("tol_x")
        if spread < tol_f:
            return done("tol_f")
        if state["evals"] >= max_evals:
            return done("max_evals")

        centroid = np.mean(verts[:-1], axis=0)
        xr = centroid + RHO * (centroid - verts[-1])
        fr = fev(xr)
        if fr < vals[0]:
            if state["evals"] < max_evals:
                xe = centroid + CHI * (centroid - verts[-1])
                fe = fev(xe)
                if fe < fr:
                    verts[-1], vals[-1] = xe, fe
                else:
                    verts[-1], vals[-1] = xr, fr
            else:
                verts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-2]:
            verts[-1], vals[-1] = xr, fr
            continue
        if state["evals"] >= max_evals:
            return done("max_evals")
        if fr < vals[-1]:
            xc = centroid + GAMMA * (centroid - verts[-1])
            fc = fev(xc)
            if fc <= fr:
                verts[-1], vals[-1] = xc, fc
                continue
        else:
            xc = centroid - GAMMA * (centroid - verts[-1])
            fc = fev(xc)
            if fc < vals[-1]:
                verts[-1], vals[-1] = xc, fc
                continue
        # contraction failed on both sides: shrink toward the best vertex
        for i in range(1, d + 1):
            if state["evals"] >= max_evals:
                return done("max_evals")
            verts[i] = verts[0] + SIGMA * (verts[i] - verts[0])
            vals[i] = fev(verts[i])


DEGENERATE_MU = -1e18


def optimize_thresholds(kind, sim, budget, *, step=1.0, restarts=1,
                        seed=0, tol_x=1e-6, tol_f=0.0):
    """Fit Top-1 or Top-2 thresholds by CRN simplex search.

    Returns (mu, ber, evals).  The search starts from the zero vector and
    always also evaluates the degenerate vector (every entry a huge
    negative number) whose keep decisions coincide with always-keep, so
    the fitted point can never lose to the always-keep baseline on the
    fitting seed set.  BER ties break toward smaller threshold norm.
    """
    from .harness import crn_ber_objective

    if kind not in ("top1", "top2"):
        raise ValueError(f"cannot fit thresholds for policy kind {kind!r}")
    if budget < 1:
        raise ValueError("need a positive evaluation budget")
    d = 2 * sim.n_t
    objective = crn_ber_objective(sim, kind)

    tie = lambda x: float(np.linalg.norm(x))
    best_x = np.zeros(d)
    best_f = float(objective(best_x))
    evals = 1

    if evals < budget:
        degenerate = np.full(d, DEGENERATE_MU)
        f_deg = float(objective(degenerate))
        evals += 1
        if f_deg < best_f or (f_deg == best_f and tie(degenerate) < tie(best_x)):
            best_x, best_f = degenerate, f_deg

    rng = np.random.default_rng(seed)
    start = np.zeros(d)
    cur_step = float(step)
    for _ in range(max(1, restarts)):
        if evals >= budget:
            break
        res = nelder_mead(objective, start, step=cur_step,
                          max_evals=budget - evals, tol_x=tol_x, tol_f=tol_f,
                          tie_key=tie)
        evals += res.evals
        if res.fx < best_f or (res.fx == best_f and tie(res.x) < tie(best_x)):
            best_x, best_f = res.x, res.fx
        # stagnation restart: jitter the incumbent, shrink the simplex
        start = best_x + cur_step * 0.25 * rng.standard_normal(d)
        cur_step *= 0.5
    return best_x, best_f, evals


def save_threshold_table(path, kind, mu, meta=None):
    """Plain-text threshold table; one `mu <t> <value>` line per half-iteration."""
    lines = ["# rollback threshold table", f"kind {kind}",
             f"n_half_iters {len(mu)}"]
    for key, val in (meta or {}).items():
        lines.append(f"{key} {val}")
    for t, value in enumerate(np.asarray(mu, dtype=np.float64), start=1):
        lines.append(f"mu {t} {float(value)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_threshold_table(path):
    """Returns (kind, mu, meta)."""
    kind = None
    meta = {}
    entries = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if fields[0] == "kind":
                kind = fields[1]
            elif fields[0] == "mu":
                entries[int(fields[1])] = float(fields[2])
            elif fields[0] == "n_half_iters":
                meta["n_half_iters"] = int(fields[1])
            else:
                meta[fields[0]] = " ".join(fields[1:])
    if kind is None or not entries:
        raise ValueError(f"{path}: not a threshold table")
    n = meta.get("n_half_iters", max(entries))
    missing = [t for t in range(1, n + 1) if t not in entries]
    if missing:
        raise ValueError(f"{path}: missing thresholds for half-iterations {missing}")
    mu = np.array([entries[t] for t in range(1, n + 1)])
    return kind, mu, meta
