"""Command-line entry point: ``scchain <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import density_evolution as de
from .cc_builder import region_query
from .decoders import mean_trajectory, transmission_order
from .errors import SCChainError
from .lifting import lift, to_alist
from .protographs import design_rate, to_text
from .scaling import (
    ScalingParams,
    omega,
    p_block_asymptotic,
    p_block_critical_phase,
    p_block_single_point,
)
from .simulation import (
    PLOT_STUB,
    SimConfig,
    SimResult,
    compare_scaling,
    comparison_csv,
    run_campaign,
    structure_from_dict,
)

log = logging.getLogger("scchain")


def _load_structure(args):
    if args.spec is None:
        raise SCChainError("--spec is required")
    return structure_from_dict(json.loads(Path(args.spec).read_text()))


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x.strip()]


def cmd_build(args):
    p = _load_structure(args)
    if args.alist:
        _emit(to_alist(lift(p, args.N, seed=args.seed)), args.out)
    else:
        _emit(to_text(p), args.out)
    log.info("design rate %s", design_rate(p))


def cmd_de(args):
    p = _load_structure(args)
    rows = [("design_rate", f"{float(design_rate(p)):.6f}")]
    if args.region:
        positions = [int(x) for x in args.region.split(",")]
        kinds = set(args.kinds.split(",")) if args.kinds else None
        rows.append(("region_threshold", f"{de.region_threshold(p, region_query(p, positions, kinds=kinds)):.5f}"))
    layers = sorted(set(p.var_layer.tolist()))
    if len(layers) > 1:
        rows.append(("cc_threshold", f"{de.cc_threshold(p):.5f}"))
    if not args.skip_full:
        rows.append(("bp_threshold", f"{de.bp_threshold(p, tol=args.tol):.5f}"))
    text = "# schema: de v1\nquantity,value\n" + "".join(f"{k},{v}\n" for k, v in rows)
    _emit(text, args.out)


def cmd_trajectory(args):
    p = _load_structure(args)
    traj = mean_trajectory(p, args.eps, N=args.N, trials=args.trials, seed=args.seed)
    out = args.out or "/dev/stdout"
    traj.to_csv(out)


def cmd_sim(args):
    structure = json.loads(Path(args.spec).read_text())
    cfg = SimConfig(
        structure=structure, N=args.N, channel=args.channel, points=_floats(args.points),
        decoder=args.decoder, trials=args.trials,
        target_errors=None if args.target_errors <= 0 else args.target_errors,
        seed=args.seed, W=args.window, max_iter=args.max_iter,
        schedule="auto" if args.decoder == "windowed" else None, threads=args.threads,
    )
    res = run_campaign(cfg)
    _emit(res.to_csv(timing=args.timing), args.out)
    if args.plot_stub:
        Path(args.plot_stub).write_text(PLOT_STUB)


def cmd_tx_order(args):
    if args.spec:
        p = _load_structure(args)
        L, T = p.L, int(p.var_layer.max())
    else:
        L, T = args.L, args.T
    rows = ["# schema: tx-order v1", "seq,layer,position"]
    rows += [f"{k},{j},{i}" for k, (j, i) in enumerate(transmission_order(L, T, args.window))]
    _emit("\n".join(rows) + "\n", args.out)


# descriptive names accepted next to the short model codes
_MODEL_ALIASES = {"critical_phase": "eq2", "asymptotic": "eq3", "single_point": "eq4"}


def cmd_scaling(args):
    params = ScalingParams(alpha=args.alpha, theta=args.theta, eps_star=args.eps_star,
                           tau_circ=args.tau_circ, a=args.a, v_unc=args.v_unc)
    model = _MODEL_ALIASES.get(args.model, args.model)
    lines = ["# schema: scaling v1", "model,L,N,eps,omega,p_block,valid"]
    for eps in _floats(args.eps):
        valid = True
        if model == "eq2":
            p = p_block_critical_phase(params, args.L, args.N, eps)
        elif model == "eq3":
            p, valid = p_block_asymptotic(params, args.L, args.N, eps, with_flag=True)
        else:
            p = p_block_single_point(params, args.N, eps)
        w = omega(args.L, eps, args.a, args.v_unc)
        lines.append(f"{model},{args.L},{args.N},{eps:.6g},{w:.6g},{p:.6e},{int(valid)}")
    _emit("\n".join(lines) + "\n", args.out)


def cmd_compare(args):
    obs = SimResult.from_csv(Path(args.observed).read_text())
    ref = SimResult.from_csv(Path(args.reference).read_text()) if args.reference else None
    params = None
    if args.alpha is not None:
        params = ScalingParams(alpha=args.alpha, theta=args.theta, eps_star=args.eps_star)
    rows = compare_scaling(obs, ref, factor=args.factor, params=params, L=args.L, N=args.N,
                           layer=args.layer)
    _emit(comparison_csv(rows), args.out)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="JSON structure description")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="scchain", description="Spatially coupled chains and CC structures.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    b = sub.add_parser("build", parents=[common], help="export a protograph or a lifted alist")
    b.add_argument("--alist", action="store_true", help="lift and write alist instead")
    b.add_argument("--N", type=int, default=100)
    b.set_defaults(func=cmd_build)

    d = sub.add_parser("de", parents=[common], help="density-evolution thresholds")
    d.add_argument("--region", help="comma-separated positions of a strengthened region")
    d.add_argument("--kinds", help="restrict region targets to these node kinds")
    d.add_argument("--tol", type=float, default=1e-5)
    d.add_argument("--skip-full", action="store_true", help="skip the whole-structure threshold")
    d.set_defaults(func=cmd_de)

    t = sub.add_parser("trajectory", parents=[common], help="mean degree-one check trajectory")
    t.add_argument("--eps", type=float, default=0.45)
    t.add_argument("--N", type=int, default=10_000)
    t.add_argument("--trials", type=int, default=20)
    t.set_defaults(func=cmd_trajectory)

    s = sub.add_parser("sim", parents=[common], help="Monte-Carlo campaign")
    s.add_argument("--N", type=int, default=500)
    s.add_argument("--channel", choices=("bec", "biawgn"), default="bec")
    s.add_argument("--points", required=True, help="comma-separated eps or Eb/N0 [dB] values")
    s.add_argument("--decoder", choices=("peel", "bp", "windowed"), default="bp")
    s.add_argument("--window", type=int, default=10)
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--target-errors", type=int, default=100, help="0 disables early stopping")
    s.add_argument("--max-iter", type=int)
    s.add_argument("--timing", action="store_true", help="add a wall_time column")
    s.add_argument("--plot-stub", help="also write a matplotlib script here")
    s.set_defaults(func=cmd_sim)

    x = sub.add_parser("tx-order", parents=[common], help="transmission schedule as CSV")
    x.add_argument("--L", type=int, default=50)
    x.add_argument("--T", type=int, default=2)
    x.add_argument("--window", type=int, default=10)
    x.set_defaults(func=cmd_tx_order)

    sc = sub.add_parser("scaling", parents=[common], help="evaluate a scaling law")
    sc.add_argument("action", choices=("eval",))
    sc.add_argument("--model", choices=("eq2", "eq3", "eq4", *_MODEL_ALIASES), required=True,
                    help="eq2=critical_phase, eq3=asymptotic, eq4=single_point")
    sc.add_argument("--alpha", type=float, required=True)
    sc.add_argument("--theta", type=float, default=1.0)
    sc.add_argument("--eps-star", type=float, required=True)
    sc.add_argument("--tau-circ", type=float, default=0.0)
    sc.add_argument("--a", type=int, default=0)
    sc.add_argument("--v-unc", type=int, default=2)
    sc.add_argument("--L", type=int, default=50)
    sc.add_argument("--N", type=int, default=1000)
    sc.add_argument("--eps", required=True, help="comma-separated erasure probabilities")
    sc.set_defaults(func=cmd_scaling)

    c = sub.add_parser("compare", parents=[common], help="chain-length scaling comparison")
    c.add_argument("--observed", required=True, help="sim CSV of the chain under test")
    c.add_argument("--reference", help="sim CSV of the reference (e.g. twice as long) chain")
    c.add_argument("--factor", type=float, default=0.5)
    c.add_argument("--layer", type=int, default=0)
    c.add_argument("--alpha", type=float)
    c.add_argument("--theta", type=float, default=1.0)
    c.add_argument("--eps-star", type=float, default=0.4881)
    c.add_argument("--L", type=int, default=50)
    c.add_argument("--N", type=int, default=1000)
    c.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (SCChainError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
