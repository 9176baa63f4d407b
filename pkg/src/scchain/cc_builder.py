"""Continuous-chain (CC) structures: component chains stacked in layers.

Chains of layer ``j+1`` spend the free sockets of their terminated end
checks on extra edges into a mid-chain region of a chain in layer ``j``.
The result is one large protograph whose nodes carry (layer, chain,
position, slot) labels, so per-chain accounting stays possible.

Layers and positions are 1-based, chains are 0-based within a layer.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .density_evolution import ThresholdQuery, region_nodes
from .errors import ConstructionUnsupported, InvalidParameters, InvalidSpec
from .protographs import (
    ARJA_B0,
    ARJA_B1,
    ARJA_RELEASED,
    Protograph,
    build_regular_chain,
    build_sc_arja,
    build_sc_ra,
)

REGULAR_PATTERNS = ("four_pos_45", "six_pos_deg4", "two_pos_deg6")
RA_VARIANTS = ("two_per_layer", "modified_single", "single_30")


@dataclass(frozen=True)
class ConnectionEdge:
    """Extra edge(s) from a variable in one chain to an end check of another.

    ``var_slot``/``chk_slot`` pick a node among those sharing a position
    (e.g. the two variables of a (3,6) position, or the three check rows
    of an ARJA position).
    """

    from_layer: int
    from_chain: int
    var_position: int
    to_layer: int
    to_chain: int
    chk_position: int
    multiplicity: int = 1
    var_slot: int = 0
    chk_slot: int = 0


@dataclass(frozen=True)
class EnsembleSpec:
    """Component chain: ``family`` is ``regular``, ``ra`` or ``arja``."""

    family: str = "regular"
    L: int = 50
    J: int = 3
    K: int = 6
    q: int = 6

    def build(self, modified: bool = False) -> Protograph:
        if self.family == "regular":
            if modified:
                raise ConstructionUnsupported("regular chains have no modified variant")
            return build_regular_chain(self.J, self.K, self.L)
        if self.family == "ra":
            return build_sc_ra(self.q, self.L, modified=modified)
        if self.family == "arja":
            return build_sc_arja(self.L, modified=modified, keep_empty_checks=modified)
        raise ConstructionUnsupported(f"unknown family {self.family!r}")


@dataclass
class CCSpec:
    """Full description of a CC structure.

    ``modified_from_layer`` switches layers at or below that index to the
    modified component (None keeps every layer unmodified).
    """

    T: int
    chains_per_layer: list
    component: EnsembleSpec
    connections: list = field(default_factory=list)
    modified_from_layer: int | None = None

    def __post_init__(self):
        if self.T < 1:
            raise InvalidParameters("T must be at least 1")
        self.chains_per_layer = [int(c) for c in self.chains_per_layer]
        if len(self.chains_per_layer) != self.T or min(self.chains_per_layer) < 1:
            raise InvalidParameters("chains_per_layer needs one positive count per layer")


def _socket_cap(component: EnsembleSpec) -> int:
    """Largest check degree allowed after connecting (the interior degree)."""
    return int(component.build().chk_degree.max())


def _node_lookup(p: Protograph):
    vkey = {
        (int(l), int(c), int(pos), int(s)): i
        for i, (l, c, pos, s) in enumerate(zip(p.var_layer, p.var_chain, p.var_position, p.var_slot))
    }
    ckey = {
        (int(l), int(c), int(pos), int(s)): i
        for i, (l, c, pos, s) in enumerate(zip(p.chk_layer, p.chk_chain, p.chk_position, p.chk_slot))
    }
    return vkey, ckey


def _stack(chains: list[tuple[int, int, Protograph]], template: Protograph) -> Protograph:
    """Block-diagonal union of labelled chains."""
    nc = sum(p.n_checks for *_, p in chains)
    nv = sum(p.n_vars for *_, p in chains)
    base = np.zeros((nc, nv), dtype=np.int64)
    r = c = 0
    parts = {k: [] for k in ("vp", "cp", "pu", "vl", "cl", "vc", "cc", "vs", "cs")}
    kinds = []
    for layer, chain, p in chains:
        base[r:r + p.n_checks, c:c + p.n_vars] = p.base
        r += p.n_checks
        c += p.n_vars
        parts["vp"].append(p.var_position)
        parts["cp"].append(p.chk_position)
        parts["pu"].append(p.punctured)
        parts["vl"].append(np.full(p.n_vars, layer))
        parts["cl"].append(np.full(p.n_checks, layer))
        parts["vc"].append(np.full(p.n_vars, chain))
        parts["cc"].append(np.full(p.n_checks, chain))
        parts["vs"].append(p.var_slot)
        parts["cs"].append(p.chk_slot)
        kinds.extend(p.var_kind)
    cat = {k: np.concatenate(v) for k, v in parts.items()}
    return Protograph(
        base=base, var_position=cat["vp"], chk_position=cat["cp"], punctured=cat["pu"],
        var_layer=cat["vl"], chk_layer=cat["cl"], var_chain=cat["vc"], chk_chain=cat["cc"],
        var_kind=tuple(kinds), var_slot=cat["vs"], chk_slot=cat["cs"],
        family=template.family, L=template.L, v_unc=template.v_unc, a=template.a,
        params=dict(template.params),
    )


def build_custom(spec: CCSpec) -> Protograph:
    """Realise a CCSpec as a single protograph.

    Raises
    ------
    InvalidSpec
        If an edge names a missing node, goes anywhere but the next layer,
        reuses an already-consumed end-check socket or would push a check
        above the component's interior degree.  The offending edge is
        attached to the exception.
    """
    comp = spec.component
    chains = []
    for layer in range(1, spec.T + 1):
        modified = spec.modified_from_layer is not None and layer >= spec.modified_from_layer
        p = comp.build(modified=modified)
        chains.extend((layer, ch, p) for ch in range(spec.chains_per_layer[layer - 1]))
    template = comp.build()
    out = _stack(chains, template)
    if not spec.connections:
        return _drop_empty_checks(out)

    cap = _socket_cap(comp)
    vkey, ckey = _node_lookup(out)
    base = out.base.copy()
    touched = np.zeros(out.n_checks, dtype=bool)
    for e in spec.connections:
        if e.multiplicity < 1:
            raise InvalidSpec("multiplicity must be positive", edge=e)
        if e.to_layer != e.from_layer + 1:
            raise InvalidSpec("connections must go to the next layer down", edge=e)
        v = vkey.get((e.from_layer, e.from_chain, e.var_position, e.var_slot))
        if v is None:
            raise InvalidSpec("connection names a variable that does not exist", edge=e)
        c = ckey.get((e.to_layer, e.to_chain, e.chk_position, e.chk_slot))
        if c is None:
            raise InvalidSpec("connection names a check that does not exist", edge=e)
        new_deg = int(base[c].sum()) + e.multiplicity
        if new_deg > cap:
            kind = "socket reuse" if touched[c] else "degree-cap violation"
            raise InvalidSpec(f"{kind}: check would reach degree {new_deg} > {cap}", edge=e)
        base[c, v] += e.multiplicity
        touched[c] = True
    out.base = base
    out.params = dict(out.params, T=spec.T, chains_per_layer=list(spec.chains_per_layer))
    return _drop_empty_checks(out)


def _drop_empty_checks(p: Protograph) -> Protograph:
    keep = np.flatnonzero(p.chk_degree > 0)
    if keep.size == p.n_checks:
        return p
    return p.permuted(np.arange(p.n_vars), keep)


# ---------------------------------------------------------------------------
# (3,6)-regular structures


def _regular_region_edges(L, pattern, up, down, start=None):
    """Connections from chain ``up`` (layer, chain) into the ends of ``down``.

    ``start`` is the first position of the strengthened region; it defaults
    to the mid-chain position ``L // 2``.
    """
    h = L // 2 if start is None else start
    lo1, lo2, hi1, hi2 = 1, 2, L + 1, L + 2
    if pattern == "four_pos_45":
        plan = [(h, (lo1,)), (h + 1, (lo1, lo2)), (h + 2, (hi1, hi2)), (h + 3, (hi2,))]
        plan = [(pos, {s: chks for s in (0, 1)}) for pos, chks in plan]
    elif pattern == "six_pos_deg4":
        targets = [lo1, lo1, lo2, hi1, hi2, hi2]
        plan = [(h - 1 + k, {s: (t,) for s in (0, 1)}) for k, t in enumerate(targets)]
    elif pattern == "two_pos_deg6":
        plan = [(pos, {0: (lo1, lo2, hi2), 1: (lo1, hi1, hi2)}) for pos in (h, h + 1)]
    else:
        raise InvalidParameters(f"unknown connection pattern {pattern!r}")
    edges = []
    for pos, by_slot in plan:
        for slot, chks in by_slot.items():
            for cpos in chks:
                edges.append(ConnectionEdge(up[0], up[1], pos, down[0], down[1], cpos,
                                            1, var_slot=slot))
    return edges


def region_positions(L: int, pattern: str = "four_pos_45") -> list[int]:
    """Strengthened positions of a regular-chain connection pattern."""
    h = L // 2
    return {
        "four_pos_45": list(range(h, h + 4)),
        "six_pos_deg4": list(range(h - 1, h + 5)),
        "two_pos_deg6": [h, h + 1],
    }[pattern]


def build_cc_regular_variant(L: int, T: int, pattern: str = "four_pos_45") -> Protograph:
    """One C(3,6,L) chain per layer, joined with the named connection pattern.

    Every pattern spends the same 12 end-check sockets of the lower chain.
    """
    if pattern not in REGULAR_PATTERNS:
        raise InvalidParameters(f"unknown connection pattern {pattern!r}")
    if T < 1:
        raise InvalidParameters("T must be at least 1")
    if L < 8:
        raise InvalidParameters(f"L={L} too short for mid-chain connections (need L >= 8)")
    conns = []
    for j in range(1, T):
        conns += _regular_region_edges(L, pattern, (j, 0), (j + 1, 0))
    spec = CCSpec(T, [1] * T, EnsembleSpec("regular", L), conns)
    return build_custom(spec)


def build_cc_regular(L: int, T: int) -> Protograph:
    """CC structure of C(3,6,L) chains with the degree 4,5,5,4 connection region."""
    return build_cc_regular_variant(L, T, "four_pos_45")


def tree_region_starts(L: int) -> tuple[int, int]:
    """First positions of the two strengthened regions of a tree-structure chain."""
    return L // 3 - 1, (2 * L) // 3 - 1


def build_cc_tree(L: int, T: int) -> Protograph:
    """Binary-tree CC structure: layer j holds 2**(j-1) C(3,6,L) chains.

    Chain ``c`` of layer ``j`` has two strengthened regions; region ``r`` is
    fed by both ends of chain ``2c + r`` in layer ``j+1``.
    """
    if T < 1:
        raise InvalidParameters("T must be at least 1")
    if L < 12:
        raise InvalidParameters(f"L={L} too short for two disjoint regions (need L >= 12)")
    counts = [2 ** (j - 1) for j in range(1, T + 1)]
    conns = []
    for j in range(1, T):
        for c in range(counts[j - 1]):
            for r, start in enumerate(tree_region_starts(L)):
                conns += _regular_region_edges(L, "four_pos_45", (j, c), (j + 1, 2 * c + r), start)
    return build_custom(CCSpec(T, counts, EnsembleSpec("regular", L), conns))


def protected_ratio(T: int) -> Fraction:
    """Share of chains in a binary-tree structure that receive protection."""
    if T < 1:
        raise InvalidParameters("T must be at least 1")
    return Fraction(2 ** (T - 1) - 1, 2 ** T - 1)


# ---------------------------------------------------------------------------
# RA structures


def _ra_end_sockets(lower: Protograph, cap: int) -> tuple[list[int], list[int]]:
    """Check positions with free sockets at the left and right chain ends."""
    deg = lower.chk_degree
    left, right = [], []
    mid = (lower.chk_position.min() + lower.chk_position.max()) / 2
    for i in np.argsort(lower.chk_position, kind="stable"):
        free = cap - int(deg[i])
        pos = int(lower.chk_position[i])
        (left if pos <= mid else right).extend([pos] * free)
    return left, right


def _spread(up, positions, down, sockets):
    """Deal sockets round-robin over ``positions`` (socket k -> positions[k % n])."""
    n = len(positions)
    edges = {}
    for k, cpos in enumerate(sockets):
        key = (positions[k % n], cpos)
        edges[key] = edges.get(key, 0) + 1
    return [ConnectionEdge(up[0], up[1], vpos, down[0], down[1], cpos, m)
            for (vpos, cpos), m in sorted(edges.items())]


def ra_region_positions(L: int, variant: str) -> list[int]:
    h = L // 2
    return list(range(h, h + (4 if variant == "modified_single" else 5)))


def region_query(p: Protograph, positions, kinds=None, **kw):
    """ThresholdQuery over ``positions`` of every chain in layers 1..T-1.

    For RA structures pass ``kinds={"rep"}``: only the repetition nodes of
    the region gain edges, the accumulators there keep degree 2.
    """
    kinds = frozenset(kinds) if kinds is not None else None
    return ThresholdQuery(region_nodes(p, positions), kinds=kinds, **kw)


def build_cc_ra(q: int, L: int, T: int, variant: str = "two_per_layer") -> Protograph:
    """CC structure of coupled RA chains.

    ``two_per_layer``
        Binary tree; both children of a chain pour their 30 end sockets into
        the repetition variables at five mid positions (degree 6 -> 18).
    ``modified_single``
        One chain per layer.  Layers below the first use the modified chain
        whose four removed accumulators are replaced by four repetition
        variables of the chain above, each taking over the two check
        connections of one removed accumulator.
    ``single_30``
        One chain per layer, a single child's 30 sockets raise five mid
        repetition variables from degree 6 to 12.
    """
    if q != 6:
        raise ConstructionUnsupported(f"CC structures are only defined for q=6, got q={q}")
    if variant not in RA_VARIANTS:
        raise InvalidParameters(f"unknown RA variant {variant!r}")
    if T < 1:
        raise InvalidParameters("T must be at least 1")
    if L < 10:
        raise InvalidParameters(f"L={L} too short (need L >= 10)")
    comp = EnsembleSpec("ra", L, q=q)
    positions = ra_region_positions(L, variant)
    conns = []
    if variant == "modified_single":
        m = L + q - 1
        pairs = [(1, 2), (2, 3), (m - 1, m), (m, 1)]
        for j in range(1, T):
            for vpos, chks in zip(positions, pairs):
                for cpos in chks:
                    conns.append(ConnectionEdge(j, 0, vpos, j + 1, 0, cpos, 1, var_slot=0))
        return build_custom(CCSpec(T, [1] * T, comp, conns, modified_from_layer=2))

    cap = _socket_cap(comp)
    left, right = _ra_end_sockets(comp.build(), cap)
    sockets = left + right
    if variant == "single_30":
        counts = [1] * T
        for j in range(1, T):
            conns += _spread((j, 0), positions, (j + 1, 0), sockets)
    else:
        counts = [2 ** (j - 1) for j in range(1, T + 1)]
        for j in range(1, T):
            for c in range(counts[j - 1]):
                for child in (2 * c, 2 * c + 1):
                    conns += _spread((j, c), positions, (j + 1, child), sockets)
    return build_custom(CCSpec(T, counts, comp, conns))


# ---------------------------------------------------------------------------
# ARJA structures


def arja_merge_plan(L: int) -> list[tuple[int, str, int, str]]:
    """(upper position, upper kind, lower position, released kind) merges.

    Left end of the lower chain feeds positions h, h+1, right end feeds
    h+2, h+3, with h = L // 2.  The punctured hub of the upper chain absorbs
    the released hub (degree 12); another hub absorbs a released degree-3
    node (degree 9); a transmitted degree-3 node absorbs the other one
    (degree 6).
    """
    h = L // 2
    return [
        (h, "v1", 1, "v1"), (h + 1, "v1", 1, "v2"), (h, "v2", 1, "v3"),
        (h + 3, "v1", L, "v1"), (h + 2, "v1", L, "v2"), (h + 3, "v2", L, "v3"),
    ]


def arja_region_positions(L: int) -> list[int]:
    return list(range(L // 2, L // 2 + 4))


def build_cc_arja(L: int, T: int) -> Protograph:
    """One modified ARJA chain per layer; released end nodes merge upward."""
    if T < 1:
        raise InvalidParameters("T must be at least 1")
    if L < 8:
        raise InvalidParameters(f"L={L} too short (need L >= 8)")
    comp = EnsembleSpec("arja", L)
    conns = []
    for j in range(1, T):
        for upos, ukind, lpos, lkind in arja_merge_plan(L):
            k = int(lkind[1:])
            uslot = int(ukind[1:])
            for shift, B in ((0, ARJA_B0), (1, ARJA_B1)):
                for r in range(B.shape[0]):
                    if B[r, k]:
                        conns.append(ConnectionEdge(j, 0, upos, j + 1, 0, lpos + shift,
                                                    int(B[r, k]), var_slot=uslot, chk_slot=r))
    return build_custom(CCSpec(T, [1] * T, comp, conns, modified_from_layer=1))


# ---------------------------------------------------------------------------
# JSON IO


def spec_to_dict(spec: CCSpec) -> dict:
    comp = asdict(spec.component)
    d = {
        "family": comp.pop("family"),
        "L": comp.pop("L"),
        "T": spec.T,
        "chains_per_layer": list(spec.chains_per_layer),
        "modified_from_layer": spec.modified_from_layer,
        "connections": [asdict(e) for e in spec.connections],
    }
    if d["family"] == "regular":
        d.update(J=comp["J"], K=comp["K"])
    elif d["family"] == "ra":
        d["q"] = comp["q"]
    return d


def spec_from_dict(d: dict) -> CCSpec:
    try:
        comp = EnsembleSpec(
            family=d.get("family", "regular"),
            L=int(d["L"]),
            J=int(d.get("J", 3)),
            K=int(d.get("K", 6)),
            q=int(d.get("q", 6)),
        )
        T = int(d.get("T", 1))
        conns = [ConnectionEdge(**e) for e in d.get("connections", [])]
        return CCSpec(
            T=T,
            chains_per_layer=d.get("chains_per_layer", [1] * T),
            component=comp,
            connections=conns,
            modified_from_layer=d.get("modified_from_layer"),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidSpec(f"malformed CC spec: {exc}") from exc


def save_spec(spec: CCSpec, path) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2))


def load_spec(path) -> CCSpec:
    return spec_from_dict(json.loads(Path(path).read_text()))
