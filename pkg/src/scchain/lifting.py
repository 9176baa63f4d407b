"""Random lifting of protographs into sparse parity-check codes.

Protograph variable ``v`` lifts to the ``N`` lifted variables
``v*N .. v*N + N-1`` (same for checks).  An entry of multiplicity ``m``
becomes the union of ``m`` permutation matrices that never share a
position, so the lifted graph has no parallel edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidParameters
from .protographs import Protograph


@dataclass(frozen=True, eq=False)
class LiftedCode:
    """Lifted Tanner graph in CSR form.

    Edges are numbered in check-major order: the neighbours of check ``c``
    are ``chk_var[chk_ptr[c]:chk_ptr[c+1]]``.  ``var_edge`` lists, for every
    variable, the ids of its edges in that numbering.
    """

    n_vars: int
    n_checks: int
    chk_ptr: np.ndarray
    chk_var: np.ndarray
    var_ptr: np.ndarray
    var_edge: np.ndarray
    edge_chk: np.ndarray
    proto_of_var: np.ndarray
    proto_of_chk: np.ndarray
    punctured: np.ndarray
    N: int
    seed: int
    protograph: Protograph | None = None

    @property
    def n_edges(self) -> int:
        return int(self.chk_var.shape[0])

    @property
    def var_chk(self) -> np.ndarray:
        """Check index of each entry of ``var_edge``."""
        return self.edge_chk[self.var_edge]

    @property
    def var_degree(self) -> np.ndarray:
        return np.diff(self.var_ptr)

    @property
    def chk_degree(self) -> np.ndarray:
        return np.diff(self.chk_ptr)

    @property
    def n_transmitted(self) -> int:
        return int((~self.punctured).sum())

    def H(self) -> sp.csr_matrix:
        """Parity-check matrix as a 0/1 sparse matrix."""
        data = np.ones(self.n_edges, dtype=np.uint8)
        return sp.csr_matrix((data, self.chk_var, self.chk_ptr), shape=(self.n_checks, self.n_vars))

    def var_labels(self, attr: str) -> np.ndarray:
        """Per-lifted-variable copy of a protograph variable annotation."""
        return getattr(self.protograph, attr)[self.proto_of_var]

    def chk_labels(self, attr: str) -> np.ndarray:
        return getattr(self.protograph, attr)[self.proto_of_chk]


def _disjoint_perms(rng, N, m, max_tries=10_000):
    """``m`` permutations of ``range(N)`` with no common position."""
    perms = [rng.permutation(N)]
    for _ in range(m - 1):
        for _ in range(max_tries):
            cand = rng.permutation(N)
            if all((cand != q).all() for q in perms):
                perms.append(cand)
                break
        else:  # pragma: no cover - astronomically unlikely for N >= m
            raise InvalidParameters(f"could not draw {m} disjoint permutations of size {N}")
    return perms


def _from_edges(chk, var, n_checks, n_vars):
    order = np.lexsort((var, chk))
    chk, var = chk[order], var[order]
    chk_ptr = np.zeros(n_checks + 1, dtype=np.int64)
    np.cumsum(np.bincount(chk, minlength=n_checks), out=chk_ptr[1:])
    var_edge = np.argsort(var, kind="stable").astype(np.int64)
    var_ptr = np.zeros(n_vars + 1, dtype=np.int64)
    np.cumsum(np.bincount(var, minlength=n_vars), out=var_ptr[1:])
    return chk_ptr, var.astype(np.int64), var_ptr, var_edge, chk.astype(np.int64)


def lift(p: Protograph, N: int, seed: int = 0, identity: bool = False,
         girth6: bool = False, max_swaps: int = 100_000) -> LiftedCode:
    """Lift ``p`` by factor ``N``.

    Parameters
    ----------
    p : Protograph
    N : int
        Lifting factor; must be at least the largest edge multiplicity.
    seed : int
        Permutations for protograph entry ``k`` (row-major order of
        nonzero entries) come from ``default_rng([seed, k])``, so each
        entry's draw is independent of every other entry.
    identity : bool
        Use cyclic shifts ``0..m-1`` instead of random permutations.
    girth6 : bool
        Remove 4-cycles by swapping permutation targets after lifting.
    """
    N = int(N)
    if N < 1:
        raise InvalidParameters("lifting factor N must be positive")
    mmax = int(p.base.max()) if p.base.size else 0
    if N < mmax:
        raise InvalidParameters(f"N={N} is smaller than the largest edge multiplicity {mmax}")
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    cs, vs = np.nonzero(p.base)
    chk_parts, var_parts, owner = [], [], []
    copies = np.arange(N)
    for k, (c, v) in enumerate(zip(cs, vs)):
        m = int(p.base[c, v])
        if identity:
            perms = [(copies + s) % N for s in range(m)]
        else:
            perms = _disjoint_perms(np.random.default_rng([seed, k]), N, m)
        for perm in perms:
            chk_parts.append(c * N + copies)
            var_parts.append(v * N + perm)
            owner.append(np.full(N, len(owner)))
    chk = np.concatenate(chk_parts) if chk_parts else np.empty(0, np.int64)
    var = np.concatenate(var_parts) if var_parts else np.empty(0, np.int64)
    n_checks, n_vars = p.n_checks * N, p.n_vars * N
    if girth6:
        owner = np.concatenate(owner) if owner else np.empty(0, np.int64)
        var = _break_4cycles(chk, var, owner, n_vars, np.random.default_rng([seed, 2**32]), max_swaps)
    arrays = _from_edges(chk, var, n_checks, n_vars)
    return LiftedCode(
        n_vars, n_checks, *arrays,
        proto_of_var=np.repeat(np.arange(p.n_vars), N),
        proto_of_chk=np.repeat(np.arange(p.n_checks), N),
        punctured=np.repeat(p.punctured, N),
        N=N, seed=seed, protograph=p,
    )


def _four_cycle_edges(chk, var, n_vars):
    """Indices of edges lying on some 4-cycle."""
    H = sp.csr_matrix((np.ones(chk.size, np.int32), (chk, var)), shape=(chk.max() + 1, n_vars))
    overlap = (H.T @ H).tocoo()
    bad_pairs = (overlap.data >= 2) & (overlap.row < overlap.col)
    bad_vars = np.unique(np.concatenate([overlap.row[bad_pairs], overlap.col[bad_pairs]]))
    return np.flatnonzero(np.isin(var, bad_vars))


def _break_4cycles(chk, var, owner, n_vars, rng, max_swaps):
    var = var.copy()
    for _ in range(max_swaps):
        bad = _four_cycle_edges(chk, var, n_vars)
        if bad.size == 0:
            return var
        e = rng.choice(bad)
        same = np.flatnonzero(owner == owner[e])
        f = rng.choice(same)
        if f == e:
            continue
        # swapping targets within one permutation keeps it a permutation;
        # skip swaps that would overlap a sibling permutation of the entry
        trial = var.copy()
        trial[e], trial[f] = var[f], var[e]
        keys = chk.astype(np.int64) * n_vars + trial
        if np.unique(keys).size != keys.size:
            continue
        if _four_cycle_edges(chk, trial, n_vars).size <= bad.size:
            var = trial
    raise InvalidParameters("could not remove all 4-cycles; increase N or max_swaps")


def has_4cycles(code: LiftedCode) -> bool:
    return _four_cycle_edges(code.edge_chk, code.chk_var, code.n_vars).size > 0


def lifted_block_length(p: Protograph, N: int) -> tuple[int, int]:
    """(n, transmitted length) of the lifted code.

    ``n`` counts every lifted variable, punctured ones included, so for the
    families built here it equals ``v_unc*L*N + a*N``.
    """
    n = p.n_vars * int(N)
    return n, n - int(p.punctured.sum()) * int(N)


# ---------------------------------------------------------------------------
# alist IO


def to_alist(code: LiftedCode) -> str:
    """MacKay-style alist text (1-based indices, zero padded)."""
    vdeg, cdeg = code.var_degree, code.chk_degree
    lines = [
        f"{code.n_vars} {code.n_checks}",
        f"{int(vdeg.max(initial=0))} {int(cdeg.max(initial=0))}",
        " ".join(map(str, vdeg)),
        " ".join(map(str, cdeg)),
    ]
    width = int(vdeg.max(initial=0))
    var_chk = code.var_chk
    for v in range(code.n_vars):
        row = (var_chk[code.var_ptr[v]:code.var_ptr[v + 1]] + 1).tolist()
        lines.append(" ".join(map(str, row + [0] * (width - len(row)))))
    width = int(cdeg.max(initial=0))
    for c in range(code.n_checks):
        row = (code.chk_var[code.chk_ptr[c]:code.chk_ptr[c + 1]] + 1).tolist()
        lines.append(" ".join(map(str, row + [0] * (width - len(row)))))
    return "\n".join(lines) + "\n"


def from_alist(text: str, punctured=None) -> LiftedCode:
    """Parse alist text into a LiftedCode with trivial protograph maps.

    Either neighbour section may be zero padded to the maximum degree; the
    layout is inferred from the token count.  Check lists are authoritative.
    """
    tok = np.array(text.split(), dtype=np.int64)
    n_vars, n_checks, max_vdeg, max_cdeg = (int(x) for x in tok[:4])
    vdeg = tok[4:4 + n_vars]
    cdeg = tok[4 + n_vars:4 + n_vars + n_checks]
    body = tok[4 + n_vars + n_checks:]
    vlen = {True: n_vars * max_vdeg, False: int(vdeg.sum())}
    clen = {True: n_checks * max_cdeg, False: int(cdeg.sum())}
    layout = [(vp, cp) for vp in (True, False) for cp in (True, False)
              if vlen[vp] + clen[cp] == body.size]
    if not layout:
        raise InvalidParameters("alist body length matches no known layout")
    v_padded, c_padded = layout[0]
    chk_body = body[vlen[v_padded]:]
    chk, var = [], []
    pos = 0
    for c, d in enumerate(cdeg):
        d = int(d)
        entries = chk_body[pos:pos + d]
        pos += max_cdeg if c_padded else d
        chk.append(np.full(d, c))
        var.append(entries - 1)
    chk = np.concatenate(chk) if chk else np.empty(0, np.int64)
    var = np.concatenate(var) if var else np.empty(0, np.int64)
    if (np.bincount(var, minlength=n_vars) != vdeg).any():
        raise InvalidParameters("alist variable degrees do not match the check lists")
    arrays = _from_edges(chk, var, n_checks, n_vars)
    punct = np.zeros(n_vars, bool) if punctured is None else np.asarray(punctured, bool)
    return LiftedCode(n_vars, n_checks, *arrays, proto_of_var=np.arange(n_vars),
                      proto_of_chk=np.arange(n_checks), punctured=punct, N=1, seed=0)
