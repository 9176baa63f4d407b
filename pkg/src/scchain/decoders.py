"""Decoders for lifted codes.

* ``peel_bec``      peeling decoder with optional degree-one trajectory capture
* ``bp_bec``        flooding erasure message passing
* ``bp_awgn``       flooding sum-product on log-likelihood ratios
* ``windowed_bp``   sliding-window erasure decoding along a transmission order

All kernels are numba-compiled with ``nogil`` so independent trials can run
on a thread pool.  Variables are identified by their lifted index; layer
bookkeeping comes from the protograph labels carried by the code.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
from scipy import signal

from .errors import ConstructionUnsupported, InvalidParameters, ScheduleMismatch
from .lifting import LiftedCode, lift
from .protographs import Protograph

LLR_CLIP = 30.0
BEC_MAX_ITER = 1000
AWGN_MAX_ITER = 100
WINDOW_ITERS = 50

ORDER_LOWEST = 0
ORDER_RANDOM = 1


@dataclass
class DecodeOutcome:
    """Result of one decoding attempt.

    ``layer_residual`` counts erased (BEC) or wrong (AWGN) bits per layer,
    punctured bits included.
    """

    success: bool
    layer_success: np.ndarray
    layer_residual: np.ndarray
    iterations: int
    decisions: np.ndarray | None = None


@dataclass
class PeelTrajectory:
    """Degree-one check counts sampled during peeling.

    ``tau`` is the number of peeled variables divided by ``v_unc * N``;
    ``r1`` and ``r1_layer`` are degree-one check counts divided by ``N``;
    ``resid_layer`` is the fraction of each layer's variables still erased.
    """

    tau: np.ndarray
    r1: np.ndarray
    r1_layer: np.ndarray
    resid_layer: np.ndarray
    success: bool = True

    def __len__(self):
        return int(self.tau.shape[0])

    def to_csv(self, path) -> None:
        n_layers = self.r1_layer.shape[1] if self.r1_layer.ndim == 2 else 0
        with Path(path).open("w", newline="") as fh:
            fh.write("# schema: trajectory v1\n")
            w = csv.writer(fh)
            w.writerow(["tau", "r1_total"]
                       + [f"r1_layer_{j + 1}" for j in range(n_layers)]
                       + [f"resid_layer_{j + 1}" for j in range(n_layers)])
            for k in range(len(self)):
                w.writerow([f"{self.tau[k]:.6g}", f"{self.r1[k]:.6g}"]
                           + [f"{x:.6g}" for x in self.r1_layer[k]]
                           + [f"{x:.6g}" for x in self.resid_layer[k]])


# ---------------------------------------------------------------------------
# graph bookkeeping


@dataclass(eq=False)
class _Layers:
    var_layer: np.ndarray  # 0-based
    chk_layer: np.ndarray
    n_layers: int
    layer_size: np.ndarray
    var_chk: np.ndarray
    v_unc: int


def _layers(code: LiftedCode) -> _Layers:
    cached = getattr(code, "_layers_cache", None)
    if cached is not None:
        return cached
    p = code.protograph
    if p is None:
        var_layer = np.zeros(code.n_vars, np.int64)
        chk_layer = np.zeros(code.n_checks, np.int64)
        v_unc = 1
    else:
        var_layer = (p.var_layer[code.proto_of_var] - 1).astype(np.int64)
        chk_layer = (p.chk_layer[code.proto_of_chk] - 1).astype(np.int64)
        v_unc = max(int(p.v_unc), 1)
    n_layers = int(var_layer.max(initial=0)) + 1
    out = _Layers(var_layer, chk_layer, n_layers,
                  np.bincount(var_layer, minlength=n_layers), code.var_chk.astype(np.int64), v_unc)
    object.__setattr__(code, "_layers_cache", out)
    return out


def full_erasure_mask(code: LiftedCode, erased) -> np.ndarray:
    """Expand a per-transmitted-bit erasure pattern to all lifted variables.

    Punctured variables are always erased.  A mask that already has one
    entry per lifted variable is accepted as is (punctured entries forced).
    """
    erased = np.asarray(erased, dtype=bool)
    if erased.shape[0] == code.n_vars:
        out = erased.copy()
    elif erased.shape[0] == code.n_transmitted:
        out = np.ones(code.n_vars, dtype=bool)
        out[~code.punctured] = erased
    else:
        raise InvalidParameters(
            f"erasure pattern has length {erased.shape[0]}; expected {code.n_transmitted}")
    out[code.punctured] = True
    return out


def _outcome(code, residual_mask, iterations, decisions=None):
    lay = _layers(code)
    per = np.bincount(lay.var_layer[residual_mask], minlength=lay.n_layers)
    ok = per == 0
    return DecodeOutcome(bool(ok.all()), ok, per, int(iterations), decisions)


# ---------------------------------------------------------------------------
# peeling


@numba.njit(cache=True)
def _splitmix(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = state
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return state, z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _heap_push(heap, n, x):
    i = n
    heap[i] = x
    while i > 0:
        parent = (i - 1) >> 1
        if heap[parent] <= heap[i]:
            break
        heap[parent], heap[i] = heap[i], heap[parent]
        i = parent
    return n + 1


@numba.njit(cache=True)
def _heap_pop(heap, n):
    top = heap[0]
    n -= 1
    heap[0] = heap[n]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= n:
            break
        r = l + 1
        m = l if (r >= n or heap[l] <= heap[r]) else r
        if heap[i] <= heap[m]:
            break
        heap[i], heap[m] = heap[m], heap[i]
        i = m
    return top, n


@numba.njit(cache=True, nogil=True)
def _peel_kernel(chk_ptr, chk_var, var_ptr, var_chk, erased, order, seed,
                 stride, capture, var_layer, chk_layer, n_layers):
    n_chk = chk_ptr.shape[0] - 1
    deg = np.zeros(n_chk, np.int64)
    acc = np.zeros(n_chk, np.int64)
    resid = np.zeros(n_layers, np.int64)
    n_erased = 0
    for v in range(erased.shape[0]):
        if erased[v]:
            n_erased += 1
            resid[var_layer[v]] += 1
            for k in range(var_ptr[v], var_ptr[v + 1]):
                c = var_chk[k]
                deg[c] += 1
                acc[c] += v
    r1_layer = np.zeros(n_layers, np.int64)
    n1 = 0
    # degree-one bookkeeping: heap (lowest index) or indexed bag (random)
    heap = np.empty(var_chk.shape[0] + n_chk + 1, np.int64)
    hn = 0
    bag = np.empty(n_chk, np.int64)
    where = np.full(n_chk, -1, np.int64)
    bn = 0
    for c in range(n_chk):
        if deg[c] == 1:
            n1 += 1
            r1_layer[chk_layer[c]] += 1
            if order == 0:
                hn = _heap_push(heap, hn, c)
            else:
                where[c] = bn
                bag[bn] = c
                bn += 1
    n_samples = 0
    width = 2 + 2 * n_layers
    samples = np.zeros(((n_erased // stride + 2) if capture else 1, width))
    if capture and n_erased > 0:
        samples[0, 0] = 0.0
        samples[0, 1] = n1
        for j in range(n_layers):
            samples[0, 2 + j] = r1_layer[j]
            samples[0, 2 + n_layers + j] = resid[j]
        n_samples = 1
    state = np.uint64(seed)
    it = 0
    while True:
        c = -1
        if order == 0:
            while hn > 0:
                cand, hn = _heap_pop(heap, hn)
                if deg[cand] == 1:
                    c = cand
                    break
        elif bn > 0:
            state, r = _splitmix(state)
            c = bag[np.int64(r % np.uint64(bn))]
        if c < 0:
            break
        v = acc[c]
        erased[v] = False
        resid[var_layer[v]] -= 1
        it += 1
        for k in range(var_ptr[v], var_ptr[v + 1]):
            c2 = var_chk[k]
            old = deg[c2]
            deg[c2] = old - 1
            acc[c2] -= v
            if old == 1:
                n1 -= 1
                r1_layer[chk_layer[c2]] -= 1
                if order == 1:
                    pos = where[c2]
                    bn -= 1
                    last = bag[bn]
                    bag[pos] = last
                    where[last] = pos
                    where[c2] = -1
            elif old == 2:
                n1 += 1
                r1_layer[chk_layer[c2]] += 1
                if order == 0:
                    hn = _heap_push(heap, hn, c2)
                else:
                    where[c2] = bn
                    bag[bn] = c2
                    bn += 1
        if capture and it % stride == 0:
            samples[n_samples, 0] = it
            samples[n_samples, 1] = n1
            for j in range(n_layers):
                samples[n_samples, 2 + j] = r1_layer[j]
                samples[n_samples, 2 + n_layers + j] = resid[j]
            n_samples += 1
    if capture and it > 0 and it % stride != 0:
        # close the curve at the stopping point (r1 = 0 there)
        samples[n_samples, 0] = it
        samples[n_samples, 1] = n1
        for j in range(n_layers):
            samples[n_samples, 2 + j] = r1_layer[j]
            samples[n_samples, 2 + n_layers + j] = resid[j]
        n_samples += 1
    return it, samples[:n_samples]


def peel_bec(code: LiftedCode, erased, capture: bool = False, order: str = "lowest",
             seed: int = 0, stride: int | None = None):
    """Peeling decoder on the BEC.

    Parameters
    ----------
    erased : array of bool
        Erasure pattern over transmitted bits (or over all lifted bits).
    capture : bool
        Also return a PeelTrajectory sampled every ``stride`` peeled
        variables (default ``max(N // 10, 1)``).
    order : {"lowest", "random"}
        Which degree-one check to resolve next.  "random" follows the
        typical path assumed by the expected-evolution analysis.

    Returns
    -------
    DecodeOutcome, or ``(DecodeOutcome, PeelTrajectory)`` when capturing.
    """
    if order not in ("lowest", "random"):
        raise InvalidParameters(f"unknown peeling order {order!r}")
    lay = _layers(code)
    mask = full_erasure_mask(code, erased).astype(np.bool_)
    stride = max(int(stride or code.N // 10), 1)
    it, samples = _peel_kernel(
        code.chk_ptr, code.chk_var, code.var_ptr, lay.var_chk, mask,
        ORDER_LOWEST if order == "lowest" else ORDER_RANDOM, np.uint64(seed & (2**64 - 1)),
        stride, capture, lay.var_layer, lay.chk_layer, lay.n_layers,
    )
    out = _outcome(code, mask, it, decisions=mask)
    if not capture:
        return out
    nl = lay.n_layers
    traj = PeelTrajectory(
        tau=samples[:, 0] / (lay.v_unc * code.N),
        r1=samples[:, 1] / code.N,
        r1_layer=samples[:, 2:2 + nl] / code.N,
        resid_layer=samples[:, 2 + nl:] / np.maximum(lay.layer_size, 1),
        success=out.success,
    )
    return out, traj


# ---------------------------------------------------------------------------
# erasure BP (flooding, optionally windowed)


@numba.njit(cache=True, nogil=True)
def _bec_window_kernel(chk_ptr, chk_var, var_ptr, var_chk, erased,
                       step_recv_ptr, step_recv, step_freeze_ptr, step_freeze,
                       block_ptr, block_var, step_cap):
    """Frontier-driven flooding over a sequence of window steps.

    At each step the listed blocks become received and the listed blocks
    become frozen (their erased bits can no longer be recovered).  A check
    takes part once all its neighbours have been received.
    """
    n_chk = chk_ptr.shape[0] - 1
    n_var = erased.shape[0]
    missing = np.zeros(n_chk, np.int64)  # neighbours not yet received
    for c in range(n_chk):
        missing[c] = chk_ptr[c + 1] - chk_ptr[c]
    frozen = np.zeros(n_var, np.bool_)
    in_front = np.zeros(n_chk, np.bool_)
    front = np.empty(n_chk, np.int64)
    nf = 0
    nxt = np.empty(n_chk, np.int64)
    resolve = np.empty(n_var, np.int64)
    total_rounds = 0
    n_steps = step_recv_ptr.shape[0] - 1
    for s in range(n_steps):
        for k in range(step_recv_ptr[s], step_recv_ptr[s + 1]):
            b = step_recv[k]
            for q in range(block_ptr[b], block_ptr[b + 1]):
                v = block_var[q]
                for e in range(var_ptr[v], var_ptr[v + 1]):
                    c = var_chk[e]
                    missing[c] -= 1
                    if missing[c] == 0 and not in_front[c]:
                        in_front[c] = True
                        front[nf] = c
                        nf += 1
        for k in range(step_freeze_ptr[s], step_freeze_ptr[s + 1]):
            b = step_freeze[k]
            for q in range(block_ptr[b], block_ptr[b + 1]):
                frozen[block_var[q]] = True
        rounds = 0
        while nf > 0 and rounds < step_cap[s]:
            rounds += 1
            nr = 0
            for i in range(nf):
                c = front[i]
                in_front[c] = False
                if missing[c] > 0:
                    continue
                cnt = 0
                last = -1
                for k in range(chk_ptr[c], chk_ptr[c + 1]):
                    v = chk_var[k]
                    if erased[v]:
                        cnt += 1
                        last = v
                        if cnt > 1:
                            break
                if cnt == 1 and not frozen[last]:
                    resolve[nr] = last
                    nr += 1
            nn = 0
            for i in range(nr):
                v = resolve[i]
                if erased[v]:
                    erased[v] = False
                    for e in range(var_ptr[v], var_ptr[v + 1]):
                        c = var_chk[e]
                        if not in_front[c] and missing[c] == 0:
                            in_front[c] = True
                            nxt[nn] = c
                            nn += 1
            for i in range(nn):
                front[i] = nxt[i]
            nf = nn
        total_rounds += rounds
    return total_rounds


def _single_step(code: LiftedCode):
    n = code.n_vars
    return (np.array([0, 1]), np.array([0]), np.array([0, 0]), np.empty(0, np.int64),
            np.array([0, n]), np.arange(n, dtype=np.int64))


def bp_bec(code: LiftedCode, erased, max_iter: int = BEC_MAX_ITER) -> DecodeOutcome:
    """Flooding erasure decoding; stops at a fixed point or after ``max_iter`` rounds."""
    lay = _layers(code)
    mask = full_erasure_mask(code, erased).astype(np.bool_)
    rp, rv, fp, fv, bp, bv = _single_step(code)
    rounds = _bec_window_kernel(code.chk_ptr, code.chk_var, code.var_ptr, lay.var_chk, mask,
                                rp, rv, fp, fv, bp, bv, np.array([int(max_iter)]))
    return _outcome(code, mask, rounds, decisions=mask)


# ---------------------------------------------------------------------------
# windowed decoding


@dataclass
class WindowPlan:
    """Decode steps of a windowed decoder.

    ``steps[k] = (layer, start, needed)`` where ``needed`` lists the blocks
    (layer, position) first required at that step, in the order the
    decoder wants them.
    """

    steps: list
    positions: dict  # layer -> sorted positions present
    W: int

    def order(self) -> list:
        return [b for _, _, need in self.steps for b in need]


def _connection_layout(p: Protograph):
    """Region end and lower boundary positions for each upper layer.

    For (3,6) chains the lower boundary blocks are positions 1, 2 and L:
    with them checks 1, 2 and L+2 of the lower chain become usable.  For
    other families every lower block that shares a check with the upper
    chain is included.
    """
    T = int(p.var_layer.max())
    out = {}
    for j in range(1, T):
        cm = p.chk_layer == j + 1
        upper = p.var_layer == j
        sub = p.base[cm][:, upper]
        conn_chk = np.flatnonzero(cm)[sub.sum(axis=1) > 0]
        region = p.var_position[np.flatnonzero(upper)[sub.sum(axis=0) > 0]]
        if region.size == 0:
            continue
        if p.family == "regular":
            boundary = [1, 2, p.L]
        else:
            lower = p.var_layer == j + 1
            adj = p.base[conn_chk][:, lower].sum(axis=0) > 0
            boundary = sorted(set(p.var_position[np.flatnonzero(lower)[adj]].tolist()))
        out[j] = (int(region.max()), boundary)
    return out


def window_plan(p: Protograph, W: int) -> WindowPlan:
    """Step sequence of the windowed decoder for a single-chain-per-layer structure."""
    if W < 1:
        raise InvalidParameters("window size must be positive")
    if (p.var_chain != 0).any():
        raise ConstructionUnsupported("windowed decoding needs one chain per layer")
    T = int(p.var_layer.max())
    positions = {j: sorted(set(p.var_position[p.var_layer == j].tolist())) for j in range(1, T + 1)}
    layout = _connection_layout(p)
    consumed = set()
    steps = []
    for j in range(1, T + 1):
        pos = positions[j]
        for k, t in enumerate(pos):
            need = []
            for u in pos[k:k + W]:
                if (j, u) not in consumed:
                    consumed.add((j, u))
                    need.append((j, u))
                    if j in layout and u == layout[j][0]:
                        for b in layout[j][1]:
                            if (j + 1, b) not in consumed:
                                consumed.add((j + 1, b))
                                need.append((j + 1, b))
            steps.append((j, t, need))
    return WindowPlan(steps, positions, W)


def transmission_order(L: int, T: int, W: int = 10) -> list:
    """Order in which (layer, position) blocks of a (3,6) CC structure are sent.

    Blocks are sent in the order a windowed decoder first needs them; the
    lower chain's boundary blocks 1, 2, L follow right after the upper
    chain's region end ``L//2 + 3``.
    """
    if T < 1:
        raise InvalidParameters("T must be at least 1")
    if T == 1:
        return [(1, i) for i in range(1, L + 1)]
    if L < 8:
        raise InvalidParameters(f"L={L} too short (need L >= 8)")
    h = L // 2
    order, consumed = [], set()
    for j in range(1, T + 1):
        for u in range(1, L + 1):
            if (j, u) in consumed:
                continue
            consumed.add((j, u))
            order.append((j, u))
            if j < T and u == h + 3:
                for b in (1, 2, L):
                    consumed.add((j + 1, b))
                    order.append((j + 1, b))
    return order


def check_prefix_decodable(plan: WindowPlan, schedule) -> None:
    """Raise ScheduleMismatch unless every step's needs form a schedule prefix."""
    schedule = [tuple(b) for b in schedule]
    if len(set(schedule)) != len(schedule):
        raise ScheduleMismatch("schedule contains duplicate blocks")
    have = set()
    for layer, start, need in plan.steps:
        have.update(need)
        prefix = set(schedule[:len(have)])
        if prefix != have:
            missing = sorted(have - prefix)
            raise ScheduleMismatch(
                f"step (layer {layer}, start {start}) needs {missing[:3]} before they are sent")
    if len(have) != len(schedule) or set(schedule) != have:
        raise ScheduleMismatch("schedule does not cover exactly the structure's blocks")


def windowed_bp(code: LiftedCode, erased, W: int = 10, schedule=None,
                iters_per_shift: int = WINDOW_ITERS) -> DecodeOutcome:
    """Sliding-window erasure decoding.

    The window for layer ``j`` starting at position ``t`` covers positions
    ``t .. t+W-1``.  Blocks arrive in ``schedule`` order (default: the
    order the decoder needs them); the schedule is verified to be
    prefix-decodable before decoding.  A block to the left of the window is
    frozen: bits still erased there stay erased.  Each shift runs at most
    ``iters_per_shift`` rounds, except once the window has reached the end
    of its layer, where it runs to a fixed point (so a window spanning the
    whole chain reproduces ``bp_bec``).
    """
    p = code.protograph
    if p is None:
        raise InvalidParameters("windowed decoding needs a protograph-annotated code")
    plan = window_plan(p, W)
    if schedule is not None:
        check_prefix_decodable(plan, schedule)
    lay = _layers(code)
    blocks = {}
    keys = list(zip(p.var_layer.tolist(), p.var_position.tolist()))
    for j, layer_pos in plan.positions.items():
        for u in layer_pos:
            blocks[(j, u)] = len(blocks)
    proto_block = np.array([blocks[k] for k in keys], dtype=np.int64)
    var_block = proto_block[code.proto_of_var]
    order = np.argsort(var_block, kind="stable").astype(np.int64)
    block_ptr = np.zeros(len(blocks) + 1, np.int64)
    np.cumsum(np.bincount(var_block, minlength=len(blocks)), out=block_ptr[1:])

    recv_ptr, freeze_ptr = [0], [0]
    recv_flat, freeze_flat, caps = [], [], []
    prev = None
    for layer, start, need in plan.steps:
        # once the window reaches the end of its layer nothing is left to
        # shift in, so that step iterates to its fixed point
        last = plan.positions[layer][-1]
        caps.append(BEC_MAX_ITER if start + W - 1 >= last else int(iters_per_shift))
        recv_flat.extend(blocks[b] for b in need)
        recv_ptr.append(len(recv_flat))
        # the position the window just left, or the whole finished layer
        if prev is not None and prev[0] == layer:
            freeze_flat.append(blocks[prev])
        elif prev is not None:
            freeze_flat.extend(blocks[(prev[0], u)] for u in plan.positions[prev[0]])
        freeze_ptr.append(len(freeze_flat))
        prev = (layer, start)
    mask = full_erasure_mask(code, erased).astype(np.bool_)
    rounds = _bec_window_kernel(
        code.chk_ptr, code.chk_var, code.var_ptr, lay.var_chk, mask,
        np.asarray(recv_ptr, np.int64), np.asarray(recv_flat, np.int64),
        np.asarray(freeze_ptr, np.int64), np.asarray(freeze_flat, np.int64),
        block_ptr, order, np.asarray(caps, np.int64),
    )
    return _outcome(code, mask, rounds, decisions=mask)


# ---------------------------------------------------------------------------
# AWGN sum-product


@numba.njit(cache=True, nogil=True)
def _awgn_kernel(chk_ptr, chk_var, var_ptr, var_edge, llr, max_iter, clip):
    n_chk = chk_ptr.shape[0] - 1
    n_var = llr.shape[0]
    n_e = chk_var.shape[0]
    c2v = np.zeros(n_e)
    v2c = np.empty(n_e)
    total = llr.copy()
    hard = np.zeros(n_var, np.uint8)
    t = np.empty(n_e)
    for v in range(n_var):
        for k in range(var_ptr[v], var_ptr[v + 1]):
            v2c[var_edge[k]] = llr[v]
    it = 0
    while it < max_iter:
        it += 1
        for c in range(n_chk):
            a, b = chk_ptr[c], chk_ptr[c + 1]
            for k in range(a, b):
                t[k] = np.tanh(0.5 * v2c[k])
            run = 1.0
            for k in range(a, b):
                c2v[k] = run
                run *= t[k]
            run = 1.0
            for k in range(b - 1, a - 1, -1):
                prod = c2v[k] * run
                run *= t[k]
                if prod >= 1.0:
                    m = clip
                elif prod <= -1.0:
                    m = -clip
                else:
                    m = 2.0 * np.arctanh(prod)
                    if m > clip:
                        m = clip
                    elif m < -clip:
                        m = -clip
                c2v[k] = m
        for v in range(n_var):
            s = llr[v]
            for k in range(var_ptr[v], var_ptr[v + 1]):
                s += c2v[var_edge[k]]
            total[v] = s
            hard[v] = 1 if s < 0 else 0
            for k in range(var_ptr[v], var_ptr[v + 1]):
                e = var_edge[k]
                m = s - c2v[e]
                if m > clip:
                    m = clip
                elif m < -clip:
                    m = -clip
                v2c[e] = m
        ok = True
        for c in range(n_chk):
            par = 0
            for k in range(chk_ptr[c], chk_ptr[c + 1]):
                par ^= hard[chk_var[k]]
            if par:
                ok = False
                break
        if ok:
            break
    return hard, it


def full_llr(code: LiftedCode, llr) -> np.ndarray:
    """Expand per-transmitted-bit LLRs to all lifted variables (punctured get 0)."""
    llr = np.asarray(llr, dtype=np.float64)
    if llr.shape[0] == code.n_vars:
        out = llr.copy()
        out[code.punctured] = 0.0
        return out
    if llr.shape[0] != code.n_transmitted:
        raise InvalidParameters(f"LLR vector has length {llr.shape[0]}; expected {code.n_transmitted}")
    out = np.zeros(code.n_vars)
    out[~code.punctured] = llr
    return out


def bp_awgn(code: LiftedCode, llr, max_iter: int = AWGN_MAX_ITER, codeword=None) -> DecodeOutcome:
    """Sum-product decoding from channel LLRs (positive favours bit 0).

    Success means the hard decisions equal ``codeword`` (all-zero by
    default) on every lifted bit.
    """
    lay = _layers(code)
    x = full_llr(code, llr)
    if not np.isfinite(x).all():
        raise InvalidParameters("LLRs must be finite")
    hard, it = _awgn_kernel(code.chk_ptr, code.chk_var, code.var_ptr, code.var_edge,
                            x, int(max_iter), LLR_CLIP)
    ref = np.zeros(code.n_vars, np.uint8) if codeword is None else np.asarray(codeword, np.uint8)
    return _outcome(code, hard != ref, it, decisions=hard)


# ---------------------------------------------------------------------------
# ensemble-averaged trajectories


def mean_trajectory(p: Protograph, eps: float, N: int = 10_000, trials: int = 20,
                    seed: int = 0, max_attempts: int | None = None) -> PeelTrajectory:
    """Point-wise mean of peeling trajectories over independent lifts.

    Each trial lifts ``p`` afresh, draws an i.i.d. erasure pattern and peels
    in random order.  Only successful decodes are averaged.  Samples are
    taken every ``N // 10`` peeled variables; a run that has finished
    contributes zeros from then on, and one all-zero sample closes the
    curve after the longest run.
    """
    if not 0.0 <= eps <= 1.0:
        raise InvalidParameters("eps must lie in [0, 1]")
    max_attempts = max_attempts or 5 * trials
    stride = max(N // 10, 1)
    runs = []
    attempt = 0
    while len(runs) < trials and attempt < max_attempts:
        rng = np.random.default_rng([seed, attempt])
        code = lift(p, N, seed=int(rng.integers(2**63)))
        erased = rng.random(code.n_transmitted) < eps
        out, traj = peel_bec(code, erased, capture=True, order="random",
                             seed=int(rng.integers(2**63)), stride=stride)
        attempt += 1
        if out.success:
            runs.append(traj)
    if not runs:
        raise InvalidParameters("no successful decodes; eps is likely above threshold")
    n_layers = runs[0].r1_layer.shape[1]
    scale = max(int(p.v_unc), 1) * N
    on_grid = []
    for t in runs:
        steps = np.rint(t.tau * scale).astype(np.int64)
        on_grid.append(steps % stride == 0)
    n = max(int(g.sum()) for g in on_grid)
    if n == 0:
        z = np.zeros(0)
        return PeelTrajectory(z, z, np.zeros((0, n_layers)), np.zeros((0, n_layers)))
    r1 = np.zeros((len(runs), n + 1))
    r1_layer = np.zeros((len(runs), n + 1, n_layers))
    resid = np.zeros((len(runs), n + 1, n_layers))
    for k, (t, g) in enumerate(zip(runs, on_grid)):
        m = int(g.sum())
        r1[k, :m] = t.r1[g]
        r1_layer[k, :m] = t.r1_layer[g]
        resid[k, :m] = t.resid_layer[g]
    return PeelTrajectory(
        tau=np.arange(n + 1) * stride / scale,
        r1=r1.mean(axis=0),
        r1_layer=r1_layer.mean(axis=0),
        resid_layer=resid.mean(axis=0),
    )


def smooth_curve(tau, y, width: float = 1.0) -> np.ndarray:
    """Centred moving average over ``width`` units of ``tau``.

    Samples closer than half a window to either end are set to NaN.
    """
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size < 3:
        return y.copy()
    step = float(np.median(np.diff(tau))) or 1.0
    k = max(int(round(width / step)) | 1, 1)
    if k == 1 or y.size < k:
        return y.copy()
    out = np.convolve(y, np.ones(k) / k, mode="same")
    out[:k // 2] = np.nan
    out[-(k // 2):] = np.nan
    return out


@dataclass
class TrajectoryShape:
    """Summary of a degree-one check trajectory.

    ``minima`` holds the ``tau`` of every interior minimum of the smoothed
    curve whose prominence is at least ``rel_prominence`` times the curve's
    mean over its active part.  ``mid_variation`` is ``(max - min) / mean``
    of the unsmoothed curve over the middle half of the active part.
    """

    minima: np.ndarray
    mid_variation: float
    active_end: float

    @property
    def single_minimum(self) -> bool:
        return self.minima.size == 1

    def plateau(self, tol: float = 0.15) -> bool:
        return self.mid_variation < tol


def trajectory_shape(tau, y, resid=None, width: float = 1.0,
                     rel_prominence: float = 0.05) -> TrajectoryShape:
    """Classify a trajectory as single-minimum or plateau-like.

    Parameters
    ----------
    tau, y : array
        Time axis and degree-one check counts.
    resid : array, optional
        Residual erasure fraction of the same layer; the active part of
        the curve ends where it reaches zero.  Without it the whole curve
        is active.
    """
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(y, dtype=float)
    end = y.size
    if resid is not None:
        done = np.flatnonzero(np.asarray(resid) <= 0)
        if done.size:
            end = max(int(done[0]), 1)
    tau, y = tau[:end], y[:end]
    ys = smooth_curve(tau, y, width)
    valid = np.flatnonzero(~np.isnan(ys))
    minima = np.zeros(0)
    scale = float(np.mean(y)) if y.size else 0.0
    if valid.size >= 3 and scale > 0:
        seg = ys[valid[0]:valid[-1] + 1]
        idx, _ = signal.find_peaks(-seg, prominence=rel_prominence * scale)
        minima = tau[valid[0] + idx]
    lo, hi = end // 4, max(3 * end // 4, end // 4 + 1)
    mid = y[lo:hi]
    mid_var = float((mid.max() - mid.min()) / mid.mean()) if mid.size and mid.mean() > 0 else math.inf
    return TrajectoryShape(minima, mid_var, float(tau[-1]) if tau.size else 0.0)
