"""Single entry point wiring the modules together.

Subcommands: build-zdd, equilibrium, optimize, bench, oracle.  Structured logs
go to stderr; data goes to the files named by --out (the oracle subcommand
prints its vector to stdout, that being its data).  Exit codes: 0 success,
1 validation/parse error, 2 runtime error.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import harness, network as network_mod, zdd as zdd_mod
from .equilibrium import fw_equilibrium
from .errors import CcgError, ParseError, ValidationError
from .harness import closed_form_equilibrium, load_scenario, run_scenario, write_csv
from .leader import ZoConfig, zo_stackelberg
from .network import FamilySpec

log = logging.getLogger("ccg")


def _add_shared(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--log-level", type=str, default="INFO")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ccg",
        description="Stackelberg tuning of combinatorial congestion games",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-zdd", help="compile a strategy family diagram to a cache file")
    p.add_argument("--net", required=True, help="TNTP network file")
    p.add_argument("--coords", default=None, help="node coordinate file (node_id x y rows)")
    p.add_argument("--family", required=True,
                   choices=["st_paths", "hamiltonian_st_paths", "steiner_cycles"])
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--terminals", type=str, default=None, help="comma-separated node ids")
    p.add_argument("--subgraph-nodes", type=str, default=None, help="comma-separated node ids")
    _add_shared(p)

    p = sub.add_parser("equilibrium", help="run the inner Frank-Wolfe solver once")
    p.add_argument("--scenario", required=True)
    p.add_argument("--theta", default=None, help="CSV of theta values (default: barycenter)")
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--lmo", default=None,
                   choices=["shortest_path", "zdd_exact", "zdd_subsampled"])
    p.add_argument("--scheme", default="US", choices=["US", "UL", "HL"])
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--gap-every", type=int, default=100)
    _add_shared(p)

    p = sub.add_parser("optimize", help="run the zeroth-order outer loop")
    p.add_argument("--scenario", required=True)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--B", type=int, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--directions", default=None, choices=["sphere", "rademacher"])
    p.add_argument("--interiorize", action="store_true")
    _add_shared(p)

    p = sub.add_parser("bench", help="run a (variant, seed) grid and summarize")
    p.add_argument("--scenario", required=True)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--workers", type=int, default=None)
    _add_shared(p)

    p = sub.add_parser("oracle", help="print a closed-form equilibrium")
    p.add_argument("--example", required=True, choices=["two_link", "parallel_kinks"])
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--M", type=float, default=4.0)
    _add_shared(p)

    return parser


def _echo_config(args):
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "command"}
    log.info("resolved config: %s", json.dumps(resolved, default=str))


def _cmd_build_zdd(args):
    if args.out is None:
        raise ValidationError("build-zdd needs --out for the cache file")
    net = network_mod.load_network(args.net, coords_path=args.coords)
    if args.subgraph_nodes:
        nodes = [int(x) for x in args.subgraph_nodes.split(",")]
        net = network_mod.normalize_freeflow(network_mod.induced_subgraph(net, nodes))
    if args.family == "steiner_cycles":
        if not args.terminals:
            raise ValidationError("steiner_cycles needs --terminals")
        spec = FamilySpec.steiner_cycles(int(x) for x in args.terminals.split(","))
    else:
        if args.s is None or args.t is None:
            raise ValidationError(f"{args.family} needs --s and --t")
        spec = FamilySpec(args.family, s=args.s, t=args.t)
    diagram = zdd_mod.build_family(net, spec)
    zdd_mod.save_zdd(diagram, args.out)
    log.info("wrote %s: %d internal nodes, %s strategies",
             args.out, diagram.num_internal, zdd_mod.count(diagram).exact)
    return 0


def _load_theta_file(path, k, total):
    if path is None:
        from .congestion import barycenter
        return barycenter(k, total)
    with open(path, "r", encoding="utf-8") as fh:
        toks = fh.read().replace(",", " ").split()
    theta = np.array([float(t) for t in toks])
    if len(theta) != k:
        raise ValidationError(f"theta file has {len(theta)} values, model needs {k}")
    return theta


def _cmd_equilibrium(args):
    if args.out is None:
        raise ValidationError("equilibrium needs --out for the trace CSV")
    scn = load_scenario(args.scenario)
    lmo = scn.lmo
    if args.lmo is not None:
        diagram = scn.zdd
        if diagram is None and args.lmo != "shortest_path":
            if scn.net is None or scn.family is None:
                raise ValidationError("scenario has no family to compile a diagram from")
            diagram = harness.diagram_for(scn.net, scn.family)
        lmo = harness._build_lmo(
            {"kind": args.lmo, "scheme": args.scheme, "m": args.m},
            scn.net, scn.family, diagram, scn.n,
        )
    T = args.T if args.T is not None else scn.T
    theta = _load_theta_file(args.theta, scn.k, scn.theta_total)
    fw = fw_equilibrium(scn.model, theta, T, lmo, seed=args.seed,
                        gap_every=args.gap_every, engine="python")
    rows = []
    for t in range(T + 1):
        rows.append((
            t, float(fw.potential[t]),
            float(fw.gamma[t]) if t < T else None,
            float(fw.gap[t]),
            float(fw.wall_ms[t]),
        ))
    write_csv(args.out, ("iter", "potential", "gamma", "gap", "wall_ms"), rows)
    log.info("final potential %.6g, final gap %.3g, %d LMO calls",
             fw.potential[-1], fw.final_gap, fw.lmo_calls)
    return 0


def _cmd_optimize(args):
    if args.out is None:
        raise ValidationError("optimize needs --out for the trace CSV")
    scn = load_scenario(args.scenario)
    if args.T is not None:
        from dataclasses import replace
        scn = replace(scn, T=args.T)
    zo = scn.zo
    cfg = ZoConfig(
        K=args.K if args.K is not None else zo.K,
        B=args.B if args.B is not None else zo.B,
        rho=args.rho if args.rho is not None else zo.rho,
        eta=args.eta if args.eta is not None else zo.eta,
        directions=args.directions if args.directions is not None else zo.directions,
        interiorize=args.interiorize or zo.interiorize,
        seed=args.seed,
    )
    trace = zo_stackelberg(scn, cfg, workers=_workers(None))
    write_csv(
        args.out,
        ("outer_iter", "phi_hat", "ghat_norm", "grad_map_norm", "wall_ms", "max_inner_gap"),
        trace.rows(),
    )
    log.info("final phi_hat %.6g at theta %s", trace.final_phi,
             np.array2string(trace.final_theta, precision=4))
    return 0


def _workers(flag_value):
    env = os.environ.get("CCG_WORKERS")
    if flag_value is not None:
        return max(1, flag_value)
    if env:
        return max(1, int(env))
    return 1


def _cmd_bench(args):
    scn = load_scenario(args.scenario)
    out = args.out if args.out is not None else scn.out_dir
    written = run_scenario(scn, repetitions=args.reps,
                           workers=_workers(args.workers), out_dir=out)
    log.info("wrote %d run files plus summary.csv under %s", len(written), out)
    return 0


def _cmd_oracle(args):
    if args.example == "two_link":
        y = closed_form_equilibrium("two_link", args.theta)
    else:
        y = closed_form_equilibrium("parallel_kinks", args.theta, n=args.n, M=args.M)
    sys.stdout.write(",".join(f"{v:g}" for v in y) + "\n")
    return 0


_COMMANDS = {
    "build-zdd": _cmd_build_zdd,
    "equilibrium": _cmd_equilibrium,
    "optimize": _cmd_optimize,
    "bench": _cmd_bench,
    "oracle": _cmd_oracle,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, args.log_level.upper(), logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    _echo_config(args)
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, ParseError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return 1
    except CcgError as exc:
        log.error("%s", exc)
        return 2
    except Exception as exc:   # noqa: BLE001 - report, exit 2
        log.exception("unexpected failure: %s", exc)
        return 2


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
