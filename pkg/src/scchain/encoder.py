"""Sequential syndrome-former encoding for chains and CC structures.

Blocks are the lifted bits of one (layer, chain, position) triple, visited
in lexicographic order.  A check "closes" at the last block it touches.
When a block is reached, its parity bits are solved from the checks that
close there, using information bits of the block and already encoded
earlier blocks.  If those checks are rank deficient over the block alone
(typically at the terminated end of a chain), the block is merged with its
predecessors until the local system is solvable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import InvalidParameters, ReliftRequired
from .lifting import LiftedCode

MAX_GROUP_BLOCKS = 6
N_SAMPLES = 48


@dataclass
class SubBlock:
    layer: int
    chain: int
    position: int
    bits: np.ndarray


@numba.njit(cache=True)
def _rref_packed(M, n_cols):
    """In-place GF(2) row reduction of bit-packed rows (LSB-first in uint64).

    Returns pivot columns (in order) and the row transform T with T @ M0 = M.
    """
    rows = M.shape[0]
    tw = (rows + 63) // 64
    T = np.zeros((rows, tw), np.uint64)
    for r in range(rows):
        T[r, r // 64] |= np.uint64(1) << np.uint64(r % 64)
    pivots = np.empty(min(rows, n_cols), np.int64)
    rank = 0
    for col in range(n_cols):
        if rank == rows:
            break
        w = col // 64
        bit = np.uint64(1) << np.uint64(col % 64)
        piv = -1
        for r in range(rank, rows):
            if M[r, w] & bit:
                piv = r
                break
        if piv < 0:
            continue
        if piv != rank:
            for k in range(M.shape[1]):
                M[piv, k], M[rank, k] = M[rank, k], M[piv, k]
            for k in range(tw):
                T[piv, k], T[rank, k] = T[rank, k], T[piv, k]
        for r in range(rows):
            if r != rank and (M[r, w] & bit):
                for k in range(M.shape[1]):
                    M[r, k] ^= M[rank, k]
                for k in range(tw):
                    T[r, k] ^= T[rank, k]
        pivots[rank] = col
        rank += 1
    return pivots[:rank], T


def _pack(dense: np.ndarray) -> np.ndarray:
    """Pack a 0/1 matrix row-wise into uint64 words, LSB first."""
    rows, cols = dense.shape
    words = (cols + 63) // 64
    padded = np.zeros((rows, words * 64), np.uint8)
    padded[:, :cols] = dense
    return np.packbits(padded, axis=1, bitorder="little").view(np.uint64).reshape(rows, words)


def _unpack(packed: np.ndarray, cols: int) -> np.ndarray:
    b = np.unpackbits(packed.view(np.uint8), axis=1, bitorder="little")
    return b[:, :cols]


def _block_order(p):
    """Sort key for (layer, chain, position) blocks.

    Chains are visited layer by layer.  A chain whose checks wrap around
    (some check touches both its first and its last position, as in a
    tail-biting accumulator ring) is visited in folded order 1, m, 2, m-1, ...
    so that every check closes a bounded number of blocks after it opens.
    """
    folded = {}
    for c in range(p.n_checks):
        vs = np.flatnonzero(p.base[c])
        same = (p.var_layer[vs] == p.chk_layer[c]) & (p.var_chain[vs] == p.chk_chain[c])
        if not same.any():
            continue
        pos = p.var_position[vs[same]]
        key = (int(p.chk_layer[c]), int(p.chk_chain[c]))
        sel = (p.var_layer == key[0]) & (p.var_chain == key[1])
        lo, hi = p.var_position[sel].min(), p.var_position[sel].max()
        if hi - lo >= 4 and pos.min() == lo and pos.max() == hi:
            folded[key] = (int(lo), int(hi))

    def key(k):
        layer, chain, pos = k
        if (layer, chain) in folded:
            lo, hi = folded[(layer, chain)]
            a, b = pos - lo, hi - pos
            pos = 2 * a if a <= b else 2 * b + 1
        return (layer, chain, pos)

    return key


@dataclass
class _Group:
    blocks: list
    rows: np.ndarray        # checks solved by this group (independent subset)
    parity: np.ndarray      # lifted var indices solved here
    info: np.ndarray        # lifted var indices carrying information
    T: np.ndarray           # (r, |rows|) transform applied to the syndrome
    R_info: np.ndarray      # (r, |info|) parity dependence on info bits
    outside: object         # sparse H[rows, earlier vars]
    outside_cols: np.ndarray


class Encoder:
    """Syndrome-former encoder for a lifted code.

    Parameters
    ----------
    code : LiftedCode
        Any lifted code carrying protograph labels.

    Attributes
    ----------
    k : int
        Number of information bits per codeword.
    info_index : ndarray
        Lifted variable indices that carry the information bits, in the
        order bits are consumed.
    """

    def __init__(self, code: LiftedCode, max_group_blocks: int = MAX_GROUP_BLOCKS):
        p = code.protograph
        if p is None:
            raise InvalidParameters("encoding needs a protograph-annotated code")
        self.code = code
        H = code.H().tocsr()
        self._H = H
        keys = sorted(set(zip(p.var_layer.tolist(), p.var_chain.tolist(), p.var_position.tolist())),
                      key=_block_order(p))
        self.block_keys = keys
        kid = {k: i for i, k in enumerate(keys)}
        proto_block = np.array([kid[k] for k in zip(p.var_layer.tolist(), p.var_chain.tolist(),
                                                      p.var_position.tolist())])
        var_block = proto_block[code.proto_of_var]
        self.var_block = var_block
        # block at which each check closes
        last = np.maximum.reduceat(var_block[code.chk_var], code.chk_ptr[:-1]) if code.n_edges else np.zeros(0)
        nb = len(keys)
        self._close = [np.flatnonzero(last == b) for b in range(nb)]
        self._cols = [np.flatnonzero(var_block == b) for b in range(nb)]
        self.groups: list[_Group] = []
        # random partial codewords, completed group by group; used to tell
        # dependencies implied by earlier checks from genuine conflicts
        rng = np.random.default_rng(0x5EED)
        self._samples = rng.integers(0, 2, (N_SAMPLES, code.n_vars)).astype(np.uint8)
        b = 0
        pending: list[int] = []
        while b < nb:
            pending = [b]
            while True:
                g = self._try_group(pending)
                if g is not None:
                    break
                if pending[0] == 0 or len(pending) >= max_group_blocks:
                    key = keys[pending[-1]]
                    raise ReliftRequired(
                        f"parity checks closing at block (layer {key[0]}, chain {key[1]}, "
                        f"position {key[2]}) cannot be solved; draw a new lifting",
                        position=key,
                    )
                # merge with the previous group
                prev = self.groups.pop()
                pending = prev.blocks + pending
            self.groups.append(g)
            self._apply(g, self._samples)
            b = pending[-1] + 1
        del self._samples
        self.info_index = np.concatenate([g.info for g in self.groups]) if self.groups else np.zeros(0, int)
        self.k = int(self.info_index.size)

    # -- plan construction ---------------------------------------------------

    def _try_group(self, blocks):
        code, H = self.code, self._H
        rows = np.concatenate([self._close[b] for b in blocks])
        cols = np.concatenate([self._cols[b] for b in blocks])
        if rows.size == 0:
            return _Group(blocks, rows, np.zeros(0, int), cols, np.zeros((0, 0), np.uint8),
                          np.zeros((0, cols.size), np.uint8), None, np.zeros(0, int))
        # pivot preference: punctured first, then later (higher) indices
        pref = np.lexsort((-cols, ~code.punctured[cols]))
        cols = cols[pref]
        sub = H[rows][:, cols].toarray().astype(np.uint8) & 1
        packed = _pack(sub)
        piv, Tp = _rref_packed(packed, cols.size)
        r = piv.size
        T = _unpack(Tp, rows.size)
        earlier = np.concatenate([self._cols[b] for b in range(blocks[0])]) if blocks[0] > 0 else np.zeros(0, int)
        outside = H[rows][:, earlier] if earlier.size else None
        if r < rows.size:
            # a dependent combination of these rows leaves a constraint on
            # earlier bits; it is harmless only if earlier checks imply it
            if outside is None:
                return None
            s = (outside @ self._samples[:, earlier].T.astype(np.int64)) % 2
            if ((T[r:].astype(np.int64) @ s) % 2).any():
                return None
        R = _unpack(packed[:r], cols.size)
        pivot_cols = cols[piv]
        info_mask = np.ones(cols.size, bool)
        info_mask[piv] = False
        info_cols = cols[info_mask]
        return _Group(
            blocks=list(blocks),
            rows=rows,
            parity=pivot_cols,
            info=np.sort(info_cols),
            T=T[:r],
            R_info=R[:, info_mask][:, np.argsort(info_cols)],
            outside=outside,
            outside_cols=earlier,
        )

    # -- encoding --------------------------------------------------------------

    def encode_batch(self, info: np.ndarray) -> np.ndarray:
        """Encode a (batch, k) 0/1 array; returns (batch, n_vars) codewords."""
        info = np.atleast_2d(np.asarray(info, dtype=np.uint8))
        if info.shape[1] != self.k:
            raise InvalidParameters(f"expected {self.k} information bits, got {info.shape[1]}")
        x = np.zeros((info.shape[0], self.code.n_vars), np.uint8)
        x[:, self.info_index] = info
        for g in self.groups:
            self._apply(g, x)
        return x

    @staticmethod
    def _apply(g: _Group, x: np.ndarray) -> None:
        """Fill the parity bits of group ``g`` in the (batch, n) array ``x``."""
        if g.parity.size == 0:
            return
        xi = x[:, g.info].T.astype(np.int64)
        rhs = g.R_info.astype(np.int64) @ xi
        if g.outside is not None:
            s = (g.outside @ x[:, g.outside_cols].T.astype(np.int64)) % 2
            rhs += g.T.astype(np.int64) @ s
        x[:, g.parity] = (rhs % 2).T.astype(np.uint8)

    def encode(self, info) -> np.ndarray:
        return self.encode_batch(np.asarray(info, np.uint8)[None, :])[0]

    def extract_info(self, codeword) -> np.ndarray:
        return np.asarray(codeword)[..., self.info_index]

    def syndrome(self, codeword) -> np.ndarray:
        return (self._H @ np.asarray(codeword, np.int64)) % 2

    def sub_blocks(self, codeword) -> list[SubBlock]:
        out = []
        for b, (layer, chain, pos) in enumerate(self.block_keys):
            out.append(SubBlock(layer, chain, pos, np.asarray(codeword)[self._cols[b]]))
        return out

    def layer_info_sizes(self) -> dict:
        """Information bits carried by each layer."""
        layers = self.code.protograph.var_layer[self.code.proto_of_var[self.info_index]]
        return {int(j): int((layers == j).sum()) for j in np.unique(self.code.protograph.var_layer)}


def encode_chain(code: LiftedCode, info, encoder: Encoder | None = None) -> list[SubBlock]:
    """Encode one chain; ``info`` holds ``Encoder(code).k`` bits."""
    enc = encoder or Encoder(code)
    return enc.sub_blocks(enc.encode(info))


def encode_cc(code: LiftedCode, info_per_layer: dict, encoder: Encoder | None = None) -> dict:
    """Encode a CC structure layer by layer.

    ``info_per_layer`` maps layer -> bit array of the size reported by
    ``Encoder.layer_info_sizes``.  Returns layer -> list of SubBlock.
    """
    enc = encoder or Encoder(code)
    sizes = enc.layer_info_sizes()
    layers = code.protograph.var_layer[code.proto_of_var[enc.info_index]]
    info = np.zeros(enc.k, np.uint8)
    for j, n in sizes.items():
        bits = np.asarray(info_per_layer[j], np.uint8)
        if bits.size != n:
            raise InvalidParameters(f"layer {j} needs {n} information bits, got {bits.size}")
        info[layers == j] = bits
    out = {}
    for sb in enc.sub_blocks(enc.encode(info)):
        out.setdefault(sb.layer, []).append(sb)
    return out


def retained_memory_bits(code: LiftedCode) -> dict:
    """Bits of layer ``j-1`` that layer ``j``'s checks read, per layer boundary.

    These are the sub-blocks an encoder must keep after finishing layer
    ``j-1`` in order to encode layer ``j``.
    """
    p = code.protograph
    var_layer = p.var_layer[code.proto_of_var]
    chk_layer = p.chk_layer[code.proto_of_chk]
    edge_layer_chk = chk_layer[code.edge_chk]
    edge_layer_var = var_layer[code.chk_var]
    out = {}
    for j in range(2, int(var_layer.max()) + 1):
        sel = (edge_layer_chk == j) & (edge_layer_var == j - 1)
        out[j] = int(np.unique(code.chk_var[sel]).size)
    return out


def pack_bits(bits) -> bytes:
    """Pack a 0/1 sequence into bytes, least significant bit first."""
    return np.packbits(np.asarray(bits, np.uint8), bitorder="little").tobytes()


def unpack_bits(data: bytes, n: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, np.uint8), bitorder="little")[:n]
