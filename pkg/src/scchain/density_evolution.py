"""Protograph density evolution on the binary erasure channel.

Messages are erasure probabilities on every protograph edge instance; an
entry of multiplicity m contributes m independent instances.  Punctured
variables see a channel erasure probability of 1.
"""

from __future__ import annotations

from dataclasses import dataclass
import numba
import numpy as np

from .errors import InvalidParameters
from .protographs import Protograph

DELTA = 1e-3
CONV_TOL = 1e-12
MAX_ITER = 100_000


@dataclass
class DEState:
    eps: float
    v2c: np.ndarray
    c2v: np.ndarray
    residual: np.ndarray
    iterations: int
    converged: bool
    decoded: bool = False


@dataclass(frozen=True)
class ThresholdQuery:
    """Nodes that must decode, given as (layer, chain, position) triples.

    ``kinds`` optionally narrows the targets to variables of the listed
    kinds (e.g. only the repetition nodes of an RA region).
    """

    target_nodes: frozenset
    delta: float = DELTA
    tol: float = 1e-5
    kinds: frozenset | None = None

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise InvalidParameters("delta must lie in (0, 1)")
        if self.tol <= 0:
            raise InvalidParameters("tol must be positive")


class _EdgeGraph:
    """Edge-instance adjacency for one protograph (multiplicities expanded)."""

    def __init__(self, p: Protograph):
        cs, vs = np.nonzero(p.base)
        mult = p.base[cs, vs]
        e_chk = np.repeat(cs, mult)
        e_var = np.repeat(vs, mult)
        order = np.lexsort((e_chk, e_var))
        self.e_var = e_var[order]
        self.e_chk = e_chk[order]
        self.var_ptr = np.zeros(p.n_vars + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.e_var, minlength=p.n_vars), out=self.var_ptr[1:])
        self.chk_edges = np.argsort(self.e_chk, kind="stable").astype(np.int64)
        self.chk_ptr = np.zeros(p.n_checks + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.e_chk, minlength=p.n_checks), out=self.chk_ptr[1:])
        self.punctured = p.punctured.copy()


def _graph(p: Protograph) -> _EdgeGraph:
    g = getattr(p, "_de_graph", None)
    if g is None:
        g = _EdgeGraph(p)
        p._de_graph = g
    return g


@numba.njit(cache=True)
def _de_kernel(eps_v, var_ptr, chk_ptr, chk_edges, n_edges, targets, delta, tol, max_iter):
    n_vars = var_ptr.shape[0] - 1
    n_chks = chk_ptr.shape[0] - 1
    v2c = np.empty(n_edges)
    c2v = np.ones(n_edges)
    residual = np.empty(n_vars)
    for v in range(n_vars):
        residual[v] = eps_v[v]
        for e in range(var_ptr[v], var_ptr[v + 1]):
            v2c[e] = eps_v[v]
    buf = np.empty(n_edges + 1)
    it = 0
    converged = False
    decoded = False
    while it < max_iter:
        it += 1
        # check -> variable
        for c in range(n_chks):
            a, b = chk_ptr[c], chk_ptr[c + 1]
            run = 1.0
            for k in range(a, b):
                buf[k] = run
                run *= 1.0 - v2c[chk_edges[k]]
            run = 1.0
            for k in range(b - 1, a - 1, -1):
                e = chk_edges[k]
                c2v[e] = 1.0 - buf[k] * run
                run *= 1.0 - v2c[e]
        # variable -> check
        diff = 0.0
        for v in range(n_vars):
            a, b = var_ptr[v], var_ptr[v + 1]
            run = eps_v[v]
            for e in range(a, b):
                buf[e] = run
                run *= c2v[e]
            residual[v] = run
            run = 1.0
            for e in range(b - 1, a - 1, -1):
                new = buf[e] * run
                d = abs(new - v2c[e])
                if d > diff:
                    diff = d
                v2c[e] = new
                run *= c2v[e]
        worst = 0.0
        for t in targets:
            if residual[t] > worst:
                worst = residual[t]
        if worst < delta:
            decoded = True
            break
        if diff < tol:
            converged = True
            break
    return v2c, c2v, residual, it, converged, decoded


def _run(p, eps, targets, delta, tol, max_iter):
    if not 0.0 <= eps <= 1.0:
        raise InvalidParameters(f"eps={eps} outside [0, 1]")
    g = _graph(p)
    eps_v = np.where(g.punctured, 1.0, float(eps))
    v2c, c2v, res, it, conv, dec = _de_kernel(
        eps_v, g.var_ptr, g.chk_ptr, g.chk_edges, g.e_var.shape[0],
        np.asarray(targets, dtype=np.int64), delta, tol, max_iter,
    )
    return DEState(float(eps), v2c, c2v, res, int(it), bool(conv), bool(dec))


def de_fixed_point(p: Protograph, eps: float, delta: float = DELTA, max_iter: int = MAX_ITER) -> DEState:
    """Iterate to a fixed point (change below 1e-12) or ``max_iter``.

    ``decoded`` reports whether every transmitted variable ends below ``delta``.
    """
    state = _run(p, eps, np.empty(0, np.int64), -1.0, CONV_TOL, max_iter)
    sent = ~p.punctured
    state.decoded = bool((state.residual[sent] < delta).all()) if sent.any() else True
    return state


def _bisect(p, targets, delta, tol, max_iter):
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size == 0:
        raise InvalidParameters("empty target set")
    lo, hi = 0.0, 1.0
    if _run(p, hi, targets, delta, CONV_TOL, max_iter).decoded:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _run(p, mid, targets, delta, CONV_TOL, max_iter).decoded:
            lo = mid
        else:
            hi = mid
    return lo


def bp_threshold(p: Protograph, tol: float = 1e-5, delta: float = DELTA, max_iter: int = MAX_ITER) -> float:
    """Largest eps (within ``tol``) at which all transmitted variables decode."""
    if tol < 1e-5:
        raise InvalidParameters("tol must be at least 1e-5")
    return _bisect(p, np.flatnonzero(~p.punctured), delta, tol, max_iter)


def target_indices(p: Protograph, nodes, kinds=None) -> np.ndarray:
    """Transmitted variable indices at the given (layer, chain, position) triples."""
    wanted = {tuple(int(x) for x in n) for n in nodes}
    keys = zip(p.var_layer.tolist(), p.var_chain.tolist(), p.var_position.tolist())
    idx = [
        i for i, k in enumerate(keys)
        if k in wanted and not p.punctured[i] and (kinds is None or p.var_kind[i] in kinds)
    ]
    return np.asarray(idx, dtype=np.int64)


def region_threshold(p: Protograph, query: ThresholdQuery, max_iter: int = MAX_ITER) -> float:
    """Largest eps at which the query's target variables decode."""
    if not query.target_nodes:
        raise InvalidParameters("empty target set")
    idx = target_indices(p, query.target_nodes, query.kinds)
    if idx.size == 0:
        raise InvalidParameters("no variable nodes match the target set")
    return _bisect(p, idx, query.delta, query.tol, max_iter)


def cc_threshold(p: Protograph, T: int | None = None, tol: float = 1e-5,
                 delta: float = DELTA, max_iter: int = MAX_ITER) -> float:
    """Largest eps at which every transmitted variable of layers 1..T-1 decodes."""
    if T is None:
        T = int(p.var_layer.max())
    if T <= 1:
        return bp_threshold(p, tol, delta, max_iter)
    idx = np.flatnonzero((p.var_layer < T) & ~p.punctured)
    return _bisect(p, idx, delta, tol, max_iter)


def region_nodes(p: Protograph, positions, layers=None):
    """(layer, chain, position) triples for ``positions`` in every chain of ``layers``."""
    if layers is None:
        layers = [l for l in p.layers if l < max(p.layers)] or p.layers
    out = set()
    for lay, ch in set(zip(p.var_layer.tolist(), p.var_chain.tolist())):
        if lay in layers:
            out.update((lay, ch, int(pos)) for pos in positions)
    return frozenset(out)
