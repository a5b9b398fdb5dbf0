"""Command line interface.

Commands: solve, certify, optimize-h, gen, validate.  Exit codes: 0 all
checks pass, 1 a certified bound or membership check failed, 2 input
error, 3 a resource or search limit was hit.
"""

from __future__ import annotations

import argparse
import sys
import time
from fractions import Fraction

from .bomc import run_pipeline
from .certificates import aggregate_certificate
from .decomposition import verify_structured
from .errors import CheckFailed, InputError, ResourceLimit
from .harness import (SCHEMA_VERSION, TOOL_NAME, TOOL_VERSION, gen_instance,
                      jsonable, load_weight_function, oracle_narrow_cuts,
                      oracle_min_tjoin_cost, brute_force_path, parse_instance,
                      serialize_instance, weight_function_to_dict, write_report)
from .hopt import optimize_weight
from .model import validate_metric
from .weightfn import RHO_STAR, WeightFunction

_STRICT_RATIO_CAP = Fraction(15284, 10000)


def _parse_weight_flag(spec: str) -> WeightFunction:
    if spec == "default":
        return WeightFunction.default()
    if spec.startswith("const:"):
        return WeightFunction.constant(Fraction(spec[len("const:"):]))
    if spec.startswith("file:"):
        return load_weight_function(spec[len("file:"):])
    raise InputError(f"bad --h value {spec!r}; use default, const:<p/q>, or file:PATH")


def _read_instance(args) -> "MetricInstance":
    try:
        with open(args.instance) as handle:
            text = handle.read()
    except OSError as exc:
        raise InputError(f"cannot read {args.instance}: {exc}") from exc
    return parse_instance(text, "auto", args.source, args.sink)


def _chain_summary(chain) -> list[dict]:
    return [{"s_side": sorted(nc.cut.s_side), "value": nc.value, "z": nc.z}
            for nc in chain]


def _trees_payload(dec) -> list[dict]:
    return [{
        "edges": [list(e) for e in sorted(t.edges)],
        "weight": t.weight,
        "interval": [t.sigma_interval[0], t.sigma_interval[1]],
    } for t in dec.trees]


def _pipeline_report(inst, result, timings, seed=None) -> dict:
    dec = result.decomposition
    per_tree = [{
        "index": r.index,
        "weight": dec.trees[r.index].weight,
        "c_tree": r.c_tree,
        "lonely_cuts": len(dec.trees[r.index].edges) and sum(
            1 for ci in range(len(result.chain))
            if _is_lonely(dec, result.chain, r.index, ci)),
        "c_forest": r.c_forest,
        "c_join": r.c_join,
        "cj_join": r.cj_join,
        "c_reconnect": r.c_reconnect,
        "tour_cost": r.tour_cost,
    } for r in result.tree_results]
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": TOOL_NAME, "version": TOOL_VERSION},
        "seed": seed,
        "instance": {
            "n": inst.n, "s": inst.s, "t": inst.t,
            "total_cost_entries": inst.n * (inst.n - 1) // 2,
        },
        "lp": {
            "value": result.solution.value,
            "support": {f"{u},{v}": val
                        for (u, v), val in sorted(result.solution.x.items())},
            "cut_rounds": result.solution.cut_rounds,
        },
        "narrow_cuts": _chain_summary(result.chain),
        "decomposition": {
            "trees": len(dec.trees),
            "extraction_steps": dec.stats.extraction_steps,
            "backtracks": dec.stats.backtracks,
            "master_solves": dec.stats.master_solves,
            "verified": verify_structured(dec).passed,
        },
        "trees": per_tree,
        "best": {
            "index": result.best_index,
            "tour": result.best_tour,
            "cost": result.best_cost,
            "ratio": result.ratio,
            "ratio_float": float(result.ratio),
        },
        "timings": timings,
    }


def _is_lonely(dec, chain, j, ci) -> bool:
    tree = dec.trees[j]
    nc = chain[ci]
    crossing = sum(1 for e in tree.edges if nc.cut.crosses(e))
    return crossing == 1 and tree.sigma_interval[1] <= nc.z


def _cmd_solve(args, with_certificate: bool) -> int:
    inst = _read_instance(args)
    t0 = time.perf_counter()
    result = run_pipeline(inst)
    t1 = time.perf_counter()
    timings = {"pipeline_seconds": t1 - t0}
    report = _pipeline_report(inst, result, timings, seed=args.seed)

    failed = []
    ratio_ok = result.ratio_within_proved_bound()
    strict_ok = result.ratio < _STRICT_RATIO_CAP
    report["checks"] = {
        "ratio_within_proved_bound": ratio_ok,
        "ratio_below_1_5284": strict_ok,
    }
    if not ratio_ok:
        failed.append("tour/relaxation ratio exceeds the proved bound")
    if not strict_ok:
        failed.append("tour/relaxation ratio reached 1.5284")

    if with_certificate:
        h = _parse_weight_flag(args.h)
        t2 = time.perf_counter()
        cert = aggregate_certificate(result, h)
        report["certificate"] = cert.to_dict()
        report["h"] = weight_function_to_dict(h)
        report["timings"]["certificate_seconds"] = time.perf_counter() - t2
        if not cert.passed:
            bad = [k for k, v in cert.verdicts.items() if not v]
            failed.append("certificate checks failed: " + ", ".join(bad))

    if args.oracle:
        oracle = {}
        chain_sides = {tuple(sorted(nc.cut.s_side)) for nc in result.chain}
        oracle_sides = {tuple(sorted(c.s_side))
                        for c in oracle_narrow_cuts(result.solution)}
        oracle["narrow_cuts_match"] = chain_sides == oracle_sides
        if inst.n <= 11:
            opt = brute_force_path(inst)
            oracle["optimal_path_cost"] = opt
            oracle["sandwich_ok"] = (result.solution.value <= opt
                                     <= result.best_cost)
            if not oracle["sandwich_ok"]:
                failed.append("relaxation / optimum / tour sandwich failed")
        if not oracle["narrow_cuts_match"]:
            failed.append("narrow cut chain disagrees with enumeration")
        report["oracle_checks"] = oracle

    if args.trees_out:
        write_report(args.trees_out, {"trees": _trees_payload(result.decomposition)})
    if args.report:
        write_report(args.report, report)
    print(f"n={inst.n} lp={result.solution.value} best={result.best_cost} "
          f"ratio={float(result.ratio):.6f} trees={len(result.decomposition.trees)}")
    if failed:
        for msg in failed:
            print(f"FAILED: {msg}", file=sys.stderr)
        return 1
    return 0


def _cmd_optimize(args) -> int:
    if args.buckets < 1 or args.zgrid < 1:
        raise InputError("--buckets and --zgrid must be positive")
    t0 = time.perf_counter()
    opt = optimize_weight(args.buckets, args.zgrid)
    elapsed = time.perf_counter() - t0
    payload = weight_function_to_dict(opt.h, {
        "rho": opt.rho,
        "rho_float": float(opt.rho),
        "grid_rho": opt.grid_rho,
        "scale": opt.scale,
        "max_residual": opt.max_residual,
        "fine_grid_max_residual": opt.fine_grid_max_residual,
        "grid_certified": True,
        "buckets": args.buckets,
        "zgrid": args.zgrid,
    })
    if args.out:
        write_report(args.out, payload)
    if args.report:
        write_report(args.report, {
            "schema_version": SCHEMA_VERSION,
            "tool": {"name": TOOL_NAME, "version": TOOL_VERSION},
            "optimize_h": {k: v for k, v in payload.items() if k != "values"},
            "rounds": opt.meta["rounds"],
            "rows": opt.meta["rows"],
            "timings": {"optimize_seconds": elapsed},
        })
    print(f"buckets={args.buckets} zgrid={args.zgrid} "
          f"rho={float(opt.rho):.6f} rows={opt.meta['rows']}")
    return 0


def _cmd_gen(args) -> int:
    inst = gen_instance(args.n, args.seed, args.mode)
    text = serialize_instance(inst)
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_validate(args) -> int:
    inst = _read_instance(args)
    problems = validate_metric(inst)
    if problems:
        for p in problems[:10]:
            print(f"violation: {p}", file=sys.stderr)
        return 2
    print(f"valid metric instance: n={inst.n} s={inst.s} t={inst.t}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="Exact solver and bound certifier for the metric s-t path TSP")
    sub = parser.add_subparsers(dest="command", required=True)

    def instance_flags(p):
        p.add_argument("instance", help="instance file (native or TSPLIB subset)")
        p.add_argument("--report", help="write a JSON run report here")
        p.add_argument("--h", default="default",
                       help="weight function: default | const:<p/q> | file:PATH")
        p.add_argument("--source", type=int, default=None, help="override s")
        p.add_argument("--sink", type=int, default=None, help="override t")
        p.add_argument("--seed", type=int, default=None,
                       help="seed recorded in the report")
        p.add_argument("--oracle", action="store_true",
                       help="cross-check against enumeration oracles")
        p.add_argument("--trees-out", help="write the tree decomposition here")

    p_solve = sub.add_parser("solve", help="run the tour pipeline")
    instance_flags(p_solve)
    p_cert = sub.add_parser("certify", help="run the pipeline plus all certificates")
    instance_flags(p_cert)

    p_opt = sub.add_parser("optimize-h", help="optimize the weight function by LP")
    p_opt.add_argument("--buckets", type=int, required=True)
    p_opt.add_argument("--zgrid", type=int, required=True)
    p_opt.add_argument("--out", help="write the optimized weight function here")
    p_opt.add_argument("--report", help="write a JSON summary here")

    p_gen = sub.add_parser("gen", help="generate a seeded instance")
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--mode", choices=("euclidean", "random-metric"),
                       default="euclidean")
    p_gen.add_argument("--out", help="write the instance here (default stdout)")

    p_val = sub.add_parser("validate", help="check metric properties")
    p_val.add_argument("instance")
    p_val.add_argument("--source", type=int, default=None)
    p_val.add_argument("--sink", type=int, default=None)
    return parser


def run_cli(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "solve":
            return _cmd_solve(args, with_certificate=False)
        if args.command == "certify":
            return _cmd_solve(args, with_certificate=True)
        if args.command == "optimize-h":
            return _cmd_optimize(args)
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "validate":
            return _cmd_validate(args)
        raise InputError(f"unknown command {args.command!r}")
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except ResourceLimit as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 3
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))
