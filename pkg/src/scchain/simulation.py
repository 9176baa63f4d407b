"""Monte-Carlo campaigns, brute-force oracles and scaling comparisons."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numba
import numpy as np
from scipy import stats

from . import cc_builder
from .cc_builder import CCSpec, EnsembleSpec
from .decoders import (
    bp_awgn,
    bp_bec,
    peel_bec,
    transmission_order,
    windowed_bp,
)
from .errors import InvalidParameters, InvalidSpec
from .lifting import LiftedCode, lift
from .protographs import Protograph, build_regular_chain, build_sc_arja, build_sc_ra
from .scaling import ScalingParams, p_block_asymptotic, p_block_single_point

SIM_SCHEMA = "# schema: sim v1"
COMPARE_SCHEMA = "# schema: compare v1"
DEFAULT_BATCH = 50
EXACT_MAX_BITS = 22

# ---------------------------------------------------------------------------
# structures


_BUILDERS = {
    "regular": lambda d: build_regular_chain(int(d.get("J", 3)), int(d.get("K", 6)), int(d["L"])),
    "ra": lambda d: build_sc_ra(int(d.get("q", 6)), int(d["L"]), bool(d.get("modified", False))),
    "arja": lambda d: build_sc_arja(int(d["L"]), bool(d.get("modified", False))),
    "cc_regular": lambda d: cc_builder.build_cc_regular_variant(
        int(d["L"]), int(d["T"]), d.get("pattern", "four_pos_45")),
    "cc_tree": lambda d: cc_builder.build_cc_tree(int(d["L"]), int(d["T"])),
    "cc_ra": lambda d: cc_builder.build_cc_ra(int(d.get("q", 6)), int(d["L"]), int(d["T"]),
                                              d.get("variant", "two_per_layer")),
    "cc_arja": lambda d: cc_builder.build_cc_arja(int(d["L"]), int(d["T"])),
}


def structure_from_dict(d: dict) -> Protograph:
    """Build a protograph from a JSON-style description.

    Two forms are accepted: ``{"builder": name, ...params}`` with ``name``
    one of ``regular, ra, arja, cc_regular, cc_tree, cc_ra, cc_arja``, or
    a full CC description as written by ``cc_builder.save_spec``.
    """
    if "builder" in d:
        name = d["builder"]
        if name not in _BUILDERS:
            raise InvalidSpec(f"unknown builder {name!r}; choose from {sorted(_BUILDERS)}")
        try:
            return _BUILDERS[name](d)
        except KeyError as exc:
            raise InvalidSpec(f"builder {name!r} is missing parameter {exc}") from exc
    return cc_builder.build_custom(cc_builder.spec_from_dict(d))


def resolve_structure(structure) -> Protograph:
    if isinstance(structure, Protograph):
        return structure
    if isinstance(structure, CCSpec):
        return cc_builder.build_custom(structure)
    if isinstance(structure, EnsembleSpec):
        return structure.build()
    if isinstance(structure, dict):
        return structure_from_dict(structure)
    raise InvalidParameters(f"cannot build a structure from {type(structure).__name__}")


def transmitted_rate(p: Protograph) -> float:
    """Design rate counted over transmitted bits only."""
    return (p.n_vars - p.n_checks) / (p.n_vars - int(p.punctured.sum()))


def ebn0_to_sigma(ebn0_db: float, rate: float) -> float:
    """Noise standard deviation for unit-energy antipodal symbols."""
    return math.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0)))


# ---------------------------------------------------------------------------
# confidence intervals


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def mean_interval(s1: float, s2: float, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Normal interval for a mean of per-trial fractions from their sums."""
    if n == 0:
        return 0.0, 1.0
    m = s1 / n
    if n == 1:
        return 0.0, 1.0
    var = max(s2 / n - m * m, 0.0) * n / (n - 1)
    half = stats.norm.ppf(0.5 + confidence / 2) * math.sqrt(var / n)
    return max(m - half, 0.0), min(m + half, 1.0)


# ---------------------------------------------------------------------------
# campaigns


@dataclass
class SimConfig:
    """Monte-Carlo campaign description.

    Parameters
    ----------
    structure : Protograph, CCSpec, EnsembleSpec or dict
    N : int
        Lifting factor.  The code is lifted once per campaign from ``seed``.
    channel : {"bec", "biawgn"}
    points : list of float
        Erasure probabilities, or Eb/N0 values in dB.  Must be sorted.
    decoder : {"peel", "bp", "windowed"}
    trials : int
        Maximum number of codewords per point.
    target_errors : int or None
        Stop a point once this many structure block errors were seen
        (checked after every batch).
    schedule : list, "auto" or None
        Transmission schedule for windowed decoding of multi-layer
        structures; "auto" uses ``transmission_order``.
    """

    structure: object
    N: int
    channel: str = "bec"
    points: list = field(default_factory=lambda: [0.4])
    decoder: str = "bp"
    trials: int = 1000
    target_errors: int | None = 100
    seed: int = 0
    W: int = 10
    max_iter: int | None = None
    schedule: object = None
    threads: int = 1
    batch: int = DEFAULT_BATCH

    def __post_init__(self):
        if self.channel not in ("bec", "biawgn"):
            raise InvalidParameters(f"unknown channel {self.channel!r}")
        if self.decoder not in ("peel", "bp", "windowed"):
            raise InvalidParameters(f"unknown decoder {self.decoder!r}")
        self.points = [float(x) for x in self.points]
        if not self.points or sorted(self.points) != self.points:
            raise InvalidParameters("channel grid must be non-empty and sorted")
        if self.trials < 1:
            raise InvalidParameters("trials must be at least 1")
        if self.channel == "bec" and not all(0.0 <= e <= 1.0 for e in self.points):
            raise InvalidParameters("erasure probabilities must lie in [0, 1]")
        if self.channel == "biawgn" and self.decoder != "bp":
            raise InvalidParameters(f"decoder {self.decoder!r} only works on the BEC")


@dataclass
class PointResult:
    point: float
    layer: int  # 0 is the whole structure
    trials: int
    bit_errors: int
    block_errors: int
    bits_per_block: int
    ber: float
    ber_low: float
    ber_high: float
    bler: float
    bler_low: float
    bler_high: float
    seed: int
    wall_time: float = 0.0


@dataclass
class SimResult:
    config: SimConfig
    rows: list

    def get(self, point: float, layer: int = 0) -> PointResult:
        for r in self.rows:
            if r.layer == layer and math.isclose(r.point, point, rel_tol=0, abs_tol=1e-12):
                return r
        raise KeyError((point, layer))

    def points(self) -> list:
        return sorted({r.point for r in self.rows})

    @classmethod
    def from_csv(cls, text: str) -> "SimResult":
        """Rows of a CSV written by ``to_csv`` (the configuration is not stored)."""
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        rows = []
        for rec in csv.DictReader(lines):
            rows.append(PointResult(
                point=float(rec["point"]), layer=int(rec["layer"]), trials=int(rec["trials"]),
                bit_errors=int(rec["bit_errors"]), block_errors=int(rec["block_errors"]),
                bits_per_block=int(rec["bits_per_block"]),
                ber=float(rec["ber"]), ber_low=float(rec["ber_low"]), ber_high=float(rec["ber_high"]),
                bler=float(rec["bler"]), bler_low=float(rec["bler_low"]),
                bler_high=float(rec["bler_high"]), seed=int(rec["seed"]),
                wall_time=float(rec.get("wall_time") or 0.0)))
        return cls(None, rows)

    def to_csv(self, path=None, timing: bool = False) -> str:
        """CSV text (also written to ``path`` if given).

        Wall time is left out unless ``timing`` is set, so that identical
        configurations produce byte-identical files.
        """
        buf = io.StringIO()
        buf.write(SIM_SCHEMA + "\n")
        w = csv.writer(buf, lineterminator="\n")
        cols = ["point", "layer", "trials", "bit_errors", "block_errors", "bits_per_block",
                "ber", "ber_low", "ber_high", "bler", "bler_low", "bler_high", "seed"]
        w.writerow(cols + (["wall_time"] if timing else []))
        for r in self.rows:
            row = [f"{r.point:.6g}", r.layer, r.trials, r.bit_errors, r.block_errors, r.bits_per_block,
                   f"{r.ber:.6e}", f"{r.ber_low:.6e}", f"{r.ber_high:.6e}",
                   f"{r.bler:.6e}", f"{r.bler_low:.6e}", f"{r.bler_high:.6e}", r.seed]
            w.writerow(row + ([f"{r.wall_time:.3f}"] if timing else []))
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _decode_one(code, cfg, decoder_args, point, k, trial):
    rng = np.random.default_rng([cfg.seed, k, trial])
    n = code.n_transmitted
    if cfg.channel == "bec":
        erased = rng.random(n) < point
        if cfg.decoder == "peel":
            out = peel_bec(code, erased)
        elif cfg.decoder == "bp":
            out = bp_bec(code, erased, **decoder_args)
        else:
            out = windowed_bp(code, erased, **decoder_args)
    else:
        sigma = decoder_args["sigma"][k]
        y = 1.0 + sigma * rng.standard_normal(n)
        out = bp_awgn(code, 2.0 * y / sigma ** 2,
                      **({"max_iter": cfg.max_iter} if cfg.max_iter else {}))
    return out.layer_residual.astype(np.int64)


def run_campaign(cfg: SimConfig, code: LiftedCode | None = None) -> SimResult:
    """Simulate every channel point of ``cfg``.

    Trial ``i`` at point index ``k`` draws its channel from the generator
    seeded with ``(seed, k, i)``, so results depend only on the configuration.
    Trials run in fixed batches; the stopping rule is evaluated between
    batches, which keeps the outcome independent of ``threads``.
    """
    p = resolve_structure(cfg.structure)
    if code is None:
        code = lift(p, cfg.N, seed=cfg.seed)
    layer_ids = sorted(set(p.var_layer.tolist()))
    var_layer = p.var_layer[code.proto_of_var]
    layer_bits = np.array([(var_layer == j).sum() for j in layer_ids])
    decoder_args = {}
    if cfg.decoder == "bp" and cfg.channel == "bec" and cfg.max_iter:
        decoder_args["max_iter"] = cfg.max_iter
    if cfg.decoder == "windowed":
        decoder_args["W"] = cfg.W
        if len(layer_ids) > 1:
            if cfg.schedule is None:
                raise InvalidParameters("windowed decoding of a multi-layer structure needs a schedule")
            decoder_args["schedule"] = (transmission_order(p.L, len(layer_ids), cfg.W)
                                        if cfg.schedule == "auto" else cfg.schedule)
    if cfg.channel == "biawgn":
        rate = transmitted_rate(p)
        decoder_args["sigma"] = [ebn0_to_sigma(x, rate) for x in cfg.points]

    rows = []
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        for k, point in enumerate(cfg.points):
            t0 = time.perf_counter()
            nl = len(layer_ids)
            bit_err = np.zeros(nl, np.int64)
            blk_err = np.zeros(nl, np.int64)
            frac1 = np.zeros(nl + 1)
            frac2 = np.zeros(nl + 1)
            struct_err = 0
            done = 0
            while done < cfg.trials:
                idx = range(done, min(done + cfg.batch, cfg.trials))
                if pool is None:
                    res = [_decode_one(code, cfg, decoder_args, point, k, i) for i in idx]
                else:
                    res = list(pool.map(lambda i: _decode_one(code, cfg, decoder_args, point, k, i), idx))
                for resid in res:
                    bit_err += resid
                    blk_err += resid > 0
                    struct_err += int(resid.any())
                    f = np.append(resid / layer_bits, resid.sum() / layer_bits.sum())
                    frac1 += f
                    frac2 += f * f
                done = idx.stop
                if cfg.target_errors is not None and struct_err >= cfg.target_errors:
                    break
            wall = time.perf_counter() - t0
            entries = [(0, int(bit_err.sum()), struct_err, int(layer_bits.sum()))]
            entries += [(j, int(bit_err[i]), int(blk_err[i]), int(layer_bits[i]))
                        for i, j in enumerate(layer_ids)]
            for e, (layer, be, ble, nbits) in enumerate(entries):
                fi = nl if layer == 0 else e - 1
                blo, bhi = wilson_interval(ble, done)
                rlo, rhi = mean_interval(frac1[fi], frac2[fi], done)
                rows.append(PointResult(point, layer, done, be, ble, nbits,
                                        be / (done * nbits), rlo, rhi,
                                        ble / done, blo, bhi, cfg.seed, wall))
    finally:
        if pool is not None:
            pool.shutdown()
    return SimResult(cfg, rows)


# ---------------------------------------------------------------------------
# exhaustive oracle


@numba.njit(cache=True)
def _failure_counts(chk_ptr, chk_var, var_ptr, var_chk, tx_index, n_vars, punctured):
    n_tx = tx_index.shape[0]
    counts = np.zeros(n_tx + 1, np.int64)
    n_chk = chk_ptr.shape[0] - 1
    erased = np.zeros(n_vars, np.bool_)
    for pattern in range(1 << n_tx):
        for v in range(n_vars):
            erased[v] = punctured[v]
        w = 0
        for b in range(n_tx):
            if (pattern >> b) & 1:
                erased[tx_index[b]] = True
                w += 1
        progress = True
        while progress:
            progress = False
            for c in range(n_chk):
                cnt = 0
                last = -1
                for k in range(chk_ptr[c], chk_ptr[c + 1]):
                    if erased[chk_var[k]]:
                        cnt += 1
                        last = chk_var[k]
                        if cnt > 1:
                            break
                if cnt == 1:
                    erased[last] = False
                    progress = True
        for v in range(n_vars):
            if erased[v]:
                counts[w] += 1
                break
    return counts


def failure_weight_counts(code: LiftedCode) -> np.ndarray:
    """Number of uncorrectable erasure patterns of each weight (peeling)."""
    tx = np.flatnonzero(~code.punctured).astype(np.int64)
    if tx.size > EXACT_MAX_BITS:
        raise InvalidParameters(f"exact enumeration limited to {EXACT_MAX_BITS} transmitted bits, "
                                f"code has {tx.size}")
    return _failure_counts(code.chk_ptr, code.chk_var, code.var_ptr, code.var_chk,
                           tx, code.n_vars, code.punctured.astype(np.bool_))


def exact_bler(code: LiftedCode, eps, counts: np.ndarray | None = None):
    """Exact block error probability of peeling by enumeration.

    A ``Fraction`` ``eps`` gives an exact rational result; otherwise a float
    summed with ``math.fsum``.
    """
    if counts is None:
        counts = failure_weight_counts(code)
    n = counts.size - 1
    if isinstance(eps, Fraction):
        return sum((int(c) * eps ** k * (1 - eps) ** (n - k) for k, c in enumerate(counts) if c),
                   Fraction(0))
    eps = float(eps)
    return math.fsum(int(c) * eps ** k * (1 - eps) ** (n - k) for k, c in enumerate(counts) if c)


def monte_carlo_bler(code: LiftedCode, eps: float, trials: int, seed: int = 0) -> tuple[int, int]:
    """(block errors, trials) of peeling on i.i.d. erasures."""
    rng = np.random.default_rng(seed)
    errors = 0
    for _ in range(trials):
        errors += not peel_bec(code, rng.random(code.n_transmitted) < eps).success
    return errors, trials


# ---------------------------------------------------------------------------
# scaling comparison


@dataclass
class ComparisonRow:
    point: float
    observed: float
    reference_scaled: float
    ratio: float
    eq_asymptotic: float
    eq_single_point: float


def compare_scaling(observed: SimResult, reference: SimResult | None = None, factor: float = 0.5,
                    params: ScalingParams | None = None, L: int | None = None,
                    N: int | None = None, layer: int = 0) -> list[ComparisonRow]:
    """Side-by-side BLERs for the chain-length scaling comparison.

    ``reference`` is typically a chain of twice the length; its BLER times
    ``factor`` is the length-scaled prediction for ``observed``.  With
    ``params`` the closed-form predictions for chain length ``L`` are added.
    """
    obs_pts = observed.points()
    if reference is not None and reference.points() != obs_pts:
        raise InvalidParameters("observed and reference results use different channel grids")
    out = []
    for x in obs_pts:
        o = observed.get(x, layer).bler
        ref = factor * reference.get(x, layer).bler if reference is not None else float("nan")
        ratio = o / ref if ref > 0 else (1.0 if o == ref else float("inf"))
        asym = single = float("nan")
        if params is not None and x < params.eps_star:
            asym = p_block_asymptotic(params, L, N, x)
            single = p_block_single_point(params, N, x)
        out.append(ComparisonRow(x, o, ref, ratio, asym, single))
    return out


def comparison_csv(rows: list[ComparisonRow], path=None) -> str:
    buf = io.StringIO()
    buf.write(COMPARE_SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["point", "observed_bler", "reference_scaled_bler", "ratio",
                "eq_asymptotic", "eq_single_point"])
    for r in rows:
        w.writerow([f"{r.point:.6g}", f"{r.observed:.6e}", f"{r.reference_scaled:.6e}",
                    f"{r.ratio:.6g}", f"{r.eq_asymptotic:.6e}", f"{r.eq_single_point:.6e}"])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


PLOT_STUB = '''"""Plot a sim CSV written by `scchain sim` (needs matplotlib)."""
import sys
import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv(sys.argv[1], comment="#")
for layer, g in df.groupby("layer"):
    plt.semilogy(g["point"], g["bler"], marker="o", label=f"layer {layer}" if layer else "structure")
plt.xlabel("channel parameter")
plt.ylabel("BLER")
plt.legend()
plt.grid(True, which="both")
plt.savefig(sys.argv[2] if len(sys.argv) > 2 else "bler.png")
'''
