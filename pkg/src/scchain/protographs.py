"""Protograph base matrices for coupled chains.

Three component families are supported: the (J,K)-regular coupled chain,
the coupled repeat-accumulate (RA) chain and the coupled ARJA chain, plus
the lower-rate "modified" RA/ARJA chains whose end nodes are released so
their check sockets can be wired to another chain.

Nodes are stored in (position, intra-position index) order.  Positions are
1-based; layers are 1-based as well (a lone chain is layer 1, chain 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .errors import ConstructionUnsupported, InvalidParameters

# Uncoupled ARJA protograph (rate 1/2 after puncturing column 1):
#   [[1, 2, 0, 0, 0],
#    [0, 3, 1, 1, 1],
#    [0, 1, 2, 2, 1]]
# split into the memory-1 spreading components below.  Row 0 of the
# second component is empty, so the terminated chain has 3L + 2 checks.
ARJA_B0 = np.array([[1, 2, 0, 0, 0],
                    [0, 1, 1, 0, 1],
                    [0, 1, 1, 1, 0]], dtype=np.int64)
ARJA_B1 = np.array([[0, 0, 0, 0, 0],
                    [0, 2, 0, 1, 0],
                    [0, 0, 1, 1, 1]], dtype=np.int64)
ARJA_PUNCTURED = 1
# nodes released at each chain end by the modified ARJA chain
ARJA_RELEASED = ("v1", "v2", "v3")


@dataclass(eq=False)
class Protograph:
    """Position-annotated protograph.

    ``base[c, v]`` is the number of parallel edges between check ``c`` and
    variable ``v``.  Every per-node array is aligned with the node order of
    ``base``.
    """

    base: np.ndarray
    var_position: np.ndarray
    chk_position: np.ndarray
    punctured: np.ndarray
    var_layer: np.ndarray
    chk_layer: np.ndarray
    var_chain: np.ndarray
    chk_chain: np.ndarray
    var_kind: tuple = ()
    var_slot: np.ndarray = None
    chk_slot: np.ndarray = None
    family: str = ""
    L: int = 0
    v_unc: int = 0
    a: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=np.int64)
        c, v = self.base.shape
        self.var_position = np.asarray(self.var_position, dtype=np.int64)
        self.chk_position = np.asarray(self.chk_position, dtype=np.int64)
        self.punctured = np.asarray(self.punctured, dtype=bool)
        self.var_layer = np.asarray(self.var_layer, dtype=np.int64)
        self.chk_layer = np.asarray(self.chk_layer, dtype=np.int64)
        self.var_chain = np.asarray(self.var_chain, dtype=np.int64)
        self.chk_chain = np.asarray(self.chk_chain, dtype=np.int64)
        self.var_slot = np.zeros(v, np.int64) if self.var_slot is None else np.asarray(self.var_slot, np.int64)
        self.chk_slot = np.zeros(c, np.int64) if self.chk_slot is None else np.asarray(self.chk_slot, np.int64)
        if not self.var_kind:
            self.var_kind = ("v",) * v
        self.var_kind = tuple(self.var_kind)
        for name, arr, n in (
            ("var_position", self.var_position, v),
            ("punctured", self.punctured, v),
            ("var_layer", self.var_layer, v),
            ("var_chain", self.var_chain, v),
            ("chk_position", self.chk_position, c),
            ("chk_layer", self.chk_layer, c),
            ("chk_chain", self.chk_chain, c),
            ("var_slot", self.var_slot, v),
            ("chk_slot", self.chk_slot, c),
        ):
            if arr.shape != (n,):
                raise InvalidParameters(f"{name} has shape {arr.shape}, expected ({n},)")
        if len(self.var_kind) != v:
            raise InvalidParameters("var_kind length does not match variable count")
        if (self.base < 0).any():
            raise InvalidParameters("base matrix entries must be non-negative")
        if v and (self.base.sum(axis=0) == 0).any():
            raise InvalidParameters("base matrix has an all-zero column")

    @property
    def n_checks(self) -> int:
        return self.base.shape[0]

    @property
    def n_vars(self) -> int:
        return self.base.shape[1]

    @property
    def var_degree(self) -> np.ndarray:
        return self.base.sum(axis=0)

    @property
    def chk_degree(self) -> np.ndarray:
        return self.base.sum(axis=1)

    @property
    def n_edges(self) -> int:
        return int(self.base.sum())

    @property
    def layers(self) -> list[int]:
        return sorted(set(self.var_layer.tolist()))

    def var_nodes(self, layer=None, chain=None, positions=None) -> np.ndarray:
        """Indices of variable nodes matching the given labels."""
        mask = np.ones(self.n_vars, dtype=bool)
        if layer is not None:
            mask &= np.isin(self.var_layer, np.atleast_1d(layer))
        if chain is not None:
            mask &= np.isin(self.var_chain, np.atleast_1d(chain))
        if positions is not None:
            mask &= np.isin(self.var_position, np.atleast_1d(positions))
        return np.flatnonzero(mask)

    def same_as(self, other: "Protograph") -> bool:
        """Node-for-node equality of structure and labels."""
        return (
            self.base.shape == other.base.shape
            and np.array_equal(self.base, other.base)
            and np.array_equal(self.var_position, other.var_position)
            and np.array_equal(self.chk_position, other.chk_position)
            and np.array_equal(self.punctured, other.punctured)
            and np.array_equal(self.var_layer, other.var_layer)
            and np.array_equal(self.chk_layer, other.chk_layer)
            and np.array_equal(self.var_chain, other.var_chain)
            and np.array_equal(self.chk_chain, other.chk_chain)
        )

    def permuted(self, var_perm, chk_perm) -> "Protograph":
        """Relabel nodes: new node ``k`` is old node ``perm[k]``."""
        var_perm = np.asarray(var_perm)
        chk_perm = np.asarray(chk_perm)
        return replace(
            self,
            base=self.base[np.ix_(chk_perm, var_perm)],
            var_position=self.var_position[var_perm],
            chk_position=self.chk_position[chk_perm],
            punctured=self.punctured[var_perm],
            var_layer=self.var_layer[var_perm],
            chk_layer=self.chk_layer[chk_perm],
            var_chain=self.var_chain[var_perm],
            chk_chain=self.chk_chain[chk_perm],
            var_kind=tuple(self.var_kind[i] for i in var_perm),
            var_slot=self.var_slot[var_perm],
            chk_slot=self.chk_slot[chk_perm],
            params=dict(self.params),
        )


class _Assembler:
    """Collects nodes and edges, then emits a Protograph in sorted order."""

    def __init__(self):
        self.vars = []  # (position, index, kind, punctured)
        self.chks = []  # (position, index)
        self.edges = {}  # (chk, var) -> multiplicity

    def var(self, position, index, kind, punctured=False):
        self.vars.append((position, index, kind, punctured))
        return len(self.vars) - 1

    def chk(self, position, index=0):
        self.chks.append((position, index))
        return len(self.chks) - 1

    def edge(self, c, v, m=1):
        if m:
            self.edges[(c, v)] = self.edges.get((c, v), 0) + m

    def build(self, keep_empty_checks=False, **meta) -> Protograph:
        if keep_empty_checks:
            used_c = list(range(len(self.chks)))
        else:
            used_c = sorted({c for (c, _), m in self.edges.items() if m > 0})
        vorder = sorted(range(len(self.vars)), key=lambda i: self.vars[i][:2])
        corder = sorted(used_c, key=lambda i: self.chks[i])
        vmap = {old: new for new, old in enumerate(vorder)}
        cmap = {old: new for new, old in enumerate(corder)}
        base = np.zeros((len(corder), len(vorder)), dtype=np.int64)
        for (c, v), m in self.edges.items():
            if m > 0:
                base[cmap[c], vmap[v]] += m
        nv, nc = len(vorder), len(corder)
        return Protograph(
            base=base,
            var_position=[self.vars[i][0] for i in vorder],
            chk_position=[self.chks[i][0] for i in corder],
            punctured=[self.vars[i][3] for i in vorder],
            var_layer=np.ones(nv, dtype=np.int64),
            chk_layer=np.ones(nc, dtype=np.int64),
            var_chain=np.zeros(nv, dtype=np.int64),
            chk_chain=np.zeros(nc, dtype=np.int64),
            var_kind=tuple(self.vars[i][2] for i in vorder),
            var_slot=[self.vars[i][1] for i in vorder],
            chk_slot=[self.chks[i][1] for i in corder],
            **meta,
        )


def build_regular_chain(J: int = 3, K: int = 6, L: int = 50) -> Protograph:
    """Terminated (J,K)-regular chain with K/J variables per position.

    Each variable at position ``i`` sends one edge to each of the check
    positions ``i .. i+J-1``; for (3,6) this gives the 2,4,6,...,6,4,2 check
    profile across the L+2 check positions.
    """
    if J < 2 or K <= J or K % J:
        raise ConstructionUnsupported(f"(J,K)=({J},{K}) is not supported; need K a multiple of J")
    if L < J:
        raise InvalidParameters(f"chain length L={L} must be at least J={J}")
    b = K // J
    asm = _Assembler()
    chk = {pos: asm.chk(pos) for pos in range(1, L + J)}
    for i in range(1, L + 1):
        for k in range(b):
            v = asm.var(i, k, f"v{k}")
            for d in range(J):
                asm.edge(chk[i + d], v)
    return asm.build(family="regular", L=L, v_unc=b, a=0, params={"J": J, "K": K})


def build_sc_ra(q: int = 6, L: int = 50, modified: bool = False) -> Protograph:
    """Coupled repeat-accumulate chain.

    Repetition variable ``i`` (degree q) spreads over check positions
    ``i .. i+q-1``.  The ``L+q-1`` degree-2 accumulators form a closed
    accumulator ring: accumulator ``j`` joins checks ``j`` and ``j+1``, and
    the last one joins check ``L+q-1`` back to check 1.  The modified chain
    drops the accumulators at positions 1, 2, L+q-2 and L+q-1, which opens
    the ring and frees 8 check sockets.
    """
    if q < 3:
        raise InvalidParameters(f"repetition degree q={q} must be at least 3")
    if L < 3:
        raise InvalidParameters(f"chain length L={L} must be at least 3")
    m = L + q - 1
    removed = {1, 2, m - 1, m} if modified else set()
    asm = _Assembler()
    chk = {pos: asm.chk(pos) for pos in range(1, m + 1)}
    for i in range(1, L + 1):
        v = asm.var(i, 0, "rep")
        for d in range(q):
            asm.edge(chk[i + d], v)
    for j in range(1, m + 1):
        if j in removed:
            continue
        v = asm.var(j, 1, "acc")
        asm.edge(chk[j], v)
        asm.edge(chk[j % m + 1], v)
    fam = "ra_modified" if modified else "ra"
    return asm.build(family=fam, L=L, v_unc=2, a=q - 1, params={"q": q, "modified": modified})


def build_sc_arja(L: int = 50, modified: bool = False, keep_empty_checks: bool = False) -> Protograph:
    """Coupled ARJA chain with one punctured variable per position.

    The modified chain releases the nodes in ``ARJA_RELEASED`` at positions
    1 and L; their edges become free sockets for CC connections.  Releasing
    them leaves one end check without neighbours; it is dropped unless
    ``keep_empty_checks`` is set (CC assembly needs it as a socket).
    """
    if L < 3:
        raise InvalidParameters(f"chain length L={L} must be at least 3")
    asm = _Assembler()
    nc, nv = ARJA_B0.shape
    chk = {(pos, r): asm.chk(pos, r) for pos in range(1, L + 2) for r in range(nc)}
    for i in range(1, L + 1):
        for k in range(nv):
            kind = f"v{k}"
            if modified and i in (1, L) and kind in ARJA_RELEASED:
                continue
            v = asm.var(i, k, kind, punctured=(k == ARJA_PUNCTURED))
            for r in range(nc):
                asm.edge(chk[(i, r)], v, int(ARJA_B0[r, k]))
                asm.edge(chk[(i + 1, r)], v, int(ARJA_B1[r, k]))
    fam = "arja_modified" if modified else "arja"
    return asm.build(keep_empty_checks=keep_empty_checks, family=fam, L=L, v_unc=nv - 1, a=0,
                     params={"modified": modified})


def design_rate(p: Protograph) -> Fraction:
    """Design rate over transmitted symbols, ``(v - c) / (v - punctured)``."""
    c, v = p.n_checks, p.n_vars
    sent = v - int(p.punctured.sum())
    if sent <= 0:
        raise InvalidParameters("protograph has no transmitted variables")
    return Fraction(v - c, sent)


def degree_profile(p: Protograph) -> tuple[list[int], list[int]]:
    """Variable and check degrees in node order."""
    return p.var_degree.tolist(), p.chk_degree.tolist()


def degrees_by_position(p: Protograph, layer=None, chain=None):
    """Map position -> (variable degrees, check degrees) for one chain."""
    out = {}
    vm = np.ones(p.n_vars, bool)
    cm = np.ones(p.n_checks, bool)
    if layer is not None:
        vm &= p.var_layer == layer
        cm &= p.chk_layer == layer
    if chain is not None:
        vm &= p.var_chain == chain
        cm &= p.chk_chain == chain
    vd, cd = p.var_degree, p.chk_degree
    for i in np.flatnonzero(vm):
        out.setdefault(int(p.var_position[i]), ([], []))[0].append(int(vd[i]))
    for i in np.flatnonzero(cm):
        out.setdefault(int(p.chk_position[i]), ([], []))[1].append(int(cd[i]))
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# text format

_ANNOTATIONS = (
    ("punctured", None),
    ("positions", "var_position"),
    ("check_positions", "chk_position"),
    ("var_layers", "var_layer"),
    ("check_layers", "chk_layer"),
    ("var_chains", "var_chain"),
    ("check_chains", "chk_chain"),
    ("kinds", "var_kind"),
    ("var_slots", "var_slot"),
    ("check_slots", "chk_slot"),
)


def to_text(p: Protograph) -> str:
    c, v = p.base.shape
    lines = [f"{c} {v}"]
    lines += [" ".join(str(int(x)) for x in row) for row in p.base]
    lines.append("#punctured: " + " ".join(str(i) for i in np.flatnonzero(p.punctured)))
    for key, attr in _ANNOTATIONS[1:]:
        lines.append(f"#{key}: " + " ".join(str(x) for x in getattr(p, attr)))
    lines.append(f"#meta: family={p.family} L={p.L} v_unc={p.v_unc} a={p.a}")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> Protograph:
    lines = text.splitlines()
    c, v = (int(x) for x in lines[0].split())
    base = np.array([[int(x) for x in lines[1 + r].split()] for r in range(c)], dtype=np.int64)
    base = base.reshape(c, v)
    ann = {}
    for line in lines[1 + c:]:
        if not line.startswith("#"):
            continue
        key, _, rest = line[1:].partition(":")
        ann[key.strip()] = rest.split()
    punctured = np.zeros(v, dtype=bool)
    punctured[[int(i) for i in ann.get("punctured", [])]] = True
    kw = {}
    defaults = {
        "var_position": np.ones(v), "chk_position": np.ones(c),
        "var_layer": np.ones(v), "chk_layer": np.ones(c),
        "var_chain": np.zeros(v), "chk_chain": np.zeros(c),
        "var_slot": np.zeros(v), "chk_slot": np.zeros(c),
    }
    for key, attr in _ANNOTATIONS[1:]:
        if key in ann:
            vals = ann[key]
            kw[attr] = tuple(vals) if attr == "var_kind" else np.array([int(x) for x in vals])
        elif attr != "var_kind":
            kw[attr] = defaults[attr]
    meta = dict(item.split("=", 1) for item in ann.get("meta", []))
    return Protograph(
        base=base,
        punctured=punctured,
        family=meta.get("family", ""),
        L=int(meta.get("L", 0)),
        v_unc=int(meta.get("v_unc", 0)),
        a=int(meta.get("a", 0)),
        **kw,
    )
