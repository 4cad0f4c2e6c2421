"""Command-line front end.

Subcommands: gen (graph generation to edge-list), dis (well-connectedness
report), audit (multi-epsilon optimality audit), simulate (single system
trace), couple (graph system + ranked companion), fluid (ODE trajectory),
scale (diffusion-scale a trace CSV), experiment (run a configured suite).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .connectivity import dis_exact, dis_heuristic, optimality_audit
from .experiments import run_all
from .fluid import diffusion_scale, fluid_integrate
from .graphs import (Graph, gen_clique, gen_complete_bipartite,
                     gen_erased_regular, gen_erdos_renyi, gen_isolated,
                     gen_ring, gen_rgg_torus, gen_toric_grid, load_edge_list,
                     rgg_radius, save_edge_list)
from .sim import SimConfig, simulate, simulate_coupled


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_graph(path: str) -> Graph:
    return load_edge_list(Path(path).read_text())


def _add_gen(sub) -> None:
    p = sub.add_parser("gen", help="generate a graph and write its edge list")
    p.add_argument("--family", required=True,
                   choices=["clique", "ring", "toric_grid", "erdos_renyi",
                            "erased_regular", "rgg_torus", "complete_bipartite",
                            "isolated"])
    p.add_argument("--n", type=int, help="vertex count")
    p.add_argument("--p", type=float, help="edge probability (erdos_renyi)")
    p.add_argument("--d", type=int, help="degree (erased_regular)")
    p.add_argument("--c", type=float,
                   help="part fraction (complete_bipartite) or "
                        "target average degree (rgg_torus)")
    p.add_argument("--radius", type=float, help="connection radius (rgg_torus)")
    p.add_argument("--width", type=int, help="grid width (toric_grid)")
    p.add_argument("--height", type=int, help="grid height (toric_grid)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", default=None)


def _run_gen(args) -> int:
    fam = args.family

    def need(flag, value):
        if value is None:
            raise ValueError(f"--{flag} is required for family {fam}")
        return value

    if fam == "toric_grid":
        if args.width is not None or args.height is not None:
            w = need("width", args.width)
            h = need("height", args.height)
        else:
            n = need("n", args.n)
            side = math.isqrt(n)
            if side * side != n:
                raise ValueError("toric_grid needs --width/--height or a square --n")
            w = h = side
        g = gen_toric_grid(w, h)
    else:
        n = need("n", args.n)
        if fam == "clique":
            g = gen_clique(n)
        elif fam == "ring":
            g = gen_ring(n)
        elif fam == "isolated":
            g = gen_isolated(n)
        elif fam == "erdos_renyi":
            g = gen_erdos_renyi(n, need("p", args.p), args.seed)
        elif fam == "erased_regular":
            g = gen_erased_regular(n, need("d", args.d), args.seed)
        elif fam == "complete_bipartite":
            g = gen_complete_bipartite(n, need("c", args.c))
        else:  # rgg_torus
            if (args.radius is None) == (args.c is None):
                raise ValueError("rgg_torus needs exactly one of --radius / --c")
            r = args.radius if args.radius is not None else rgg_radius(n, args.c)
            g = gen_rgg_torus(n, r, args.seed)
    _write(args.out, save_edge_list(g))
    return 0


def _add_dis(sub) -> None:
    p = sub.add_parser("dis", help="worst-case non-coverage over subsets")
    p.add_argument("--graph", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--scale", choices=["fluid", "diffusion"], default="fluid")
    p.add_argument("--mode", choices=["exact", "heuristic"], default="exact")
    p.add_argument("--effort", type=int, default=1000,
                   help="random subsets tried in heuristic mode")
    p.add_argument("--budget", type=int, default=None,
                   help="subset enumeration cap for exact mode")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None,
                   help="also write a key: value report file")


def _run_dis(args) -> int:
    g = _load_graph(args.graph)
    if args.mode == "exact":
        kwargs = {} if args.budget is None else {"budget": args.budget}
        rep = dis_exact(g, args.epsilon, args.scale, **kwargs)
    else:
        rep = dis_heuristic(g, args.epsilon, args.scale,
                            effort=args.effort, seed=args.seed)
    print(rep.summary())
    if args.report:
        lines = [f"graph: {args.graph}",
                 f"n: {g.n}",
                 f"epsilon: {rep.epsilon:.12g}",
                 f"scale: {rep.scale}",
                 f"subset_size: {rep.threshold_size}",
                 f"value: {rep.value}",
                 f"method: {rep.method}",
                 f"exact: {'yes' if rep.exact else 'no'}",
                 f"witness: {' '.join(str(v) for v in rep.witness)}"]
        _write(args.report, "\n".join(lines) + "\n")
    return 0


def _add_audit(sub) -> None:
    p = sub.add_parser("audit", help="degree and coverage optimality audit")
    p.add_argument("--graph", required=True)
    p.add_argument("--epsilon", type=float, action="append", default=None,
                   help="repeatable; default 0.05 0.1 0.2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None)


def _run_audit(args) -> int:
    g = _load_graph(args.graph)
    eps = tuple(args.epsilon) if args.epsilon else (0.05, 0.1, 0.2)
    rep = optimality_audit(g, epsilon_list=eps, seed=args.seed)
    text = "\n".join(rep.lines()) + "\n"
    sys.stdout.write(text)
    if args.report:
        _write(args.report, text)
    return 0


def _buffer_arg(text: str) -> int | None:
    if text.lower() in ("inf", "none"):
        return None
    b = int(text)
    if b < 1:
        raise argparse.ArgumentTypeError("buffer must be >= 1 or 'inf'")
    return b


def _add_simulate(sub) -> None:
    p = sub.add_parser("simulate", help="run one system and write a trace CSV")
    p.add_argument("--graph", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="arrival rate per server")
    p.add_argument("--b", type=_buffer_arg, default=None,
                   help="buffer size per server, or 'inf'")
    p.add_argument("--T", dest="horizon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policy", choices=["graph_jsq", "isolated", "cjsq"],
                   default="graph_jsq")
    p.add_argument("--cjsq-n", type=int, default=0,
                   help="rank bound n for the cjsq policy")
    p.add_argument("--grid", type=float, default=0.5, help="sample spacing")
    p.add_argument("--levels", type=int, default=8,
                   help="occupancy levels written to the CSV")
    p.add_argument("-o", "--out", default=None)


def _run_simulate(args) -> int:
    g = _load_graph(args.graph)
    cfg = SimConfig(lam=args.lam, horizon=args.horizon, seed=args.seed,
                    buffer_b=args.b, policy=args.policy, cjsq_n=args.cjsq_n,
                    sample_grid=args.grid, record_levels=args.levels)
    _write(args.out, simulate(g, cfg).csv_text())
    return 0


def _add_couple(sub) -> None:
    p = sub.add_parser("couple",
                       help="run the coupled pair and write a joint trace CSV")
    p.add_argument("--graph", required=True)
    p.add_argument("--n", type=int, required=True,
                   help="companion rank bound: tasks join one of the n+1 "
                        "shortest queues")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--T", dest="horizon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=float, default=0.5)
    p.add_argument("--levels", type=int, default=8)
    p.add_argument("--tie", choices=["earliest", "latest"], default="earliest",
                   help="rank assigned to the graph system's pick within its "
                        "queue-length tie class")
    p.add_argument("-o", "--out", default=None)


def _run_couple(args) -> int:
    g = _load_graph(args.graph)
    cfg = SimConfig(lam=args.lam, horizon=args.horizon, seed=args.seed,
                    sample_grid=args.grid, record_levels=args.levels)
    ct = simulate_coupled(g, cfg, args.n, tie_rule=args.tie)
    _write(args.out, ct.csv_text())
    return 0


def _add_fluid(sub) -> None:
    p = sub.add_parser("fluid", help="integrate the mean-field ODE")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--T", dest="horizon", type=float, required=True)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--levels", type=int, default=None,
                   help="truncation depth (default scales with the load)")
    p.add_argument("--grid", type=float, default=None,
                   help="output spacing (default: every step)")
    p.add_argument("-o", "--out", default=None)


def _run_fluid(args) -> int:
    path = fluid_integrate(args.lam, args.horizon, dt=args.dt,
                           levels=args.levels, sample_grid=args.grid)
    _write(args.out, path.csv_text())
    return 0


def _add_scale(sub) -> None:
    p = sub.add_parser("scale",
                       help="diffusion-scale the q columns of a trace CSV")
    p.add_argument("--trace", required=True)
    p.add_argument("--N", dest="n", type=int, required=True)
    p.add_argument("--lambdaN", dest="lambda_total", type=float, required=True,
                   help="total arrival rate used in the run")
    p.add_argument("-o", "--out", default=None)


def _read_trace_q(text: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty trace file")
    header = lines[0].split(",")
    if not header or header[0] != "t":
        raise ValueError("trace must start with a 't' column")
    qcols = []
    for j, name in enumerate(header):
        if name == f"q{len(qcols) + 1}":
            qcols.append(j)
    if not qcols:
        raise ValueError("no q1..qK columns found in trace")
    times = np.empty(len(lines) - 1)
    q = np.empty((len(lines) - 1, len(qcols)))
    for i, ln in enumerate(lines[1:]):
        cells = ln.split(",")
        times[i] = float(cells[0])
        for k, j in enumerate(qcols):
            q[i, k] = float(cells[j])
    return times, q


def _run_scale(args) -> int:
    times, q = _read_trace_q(Path(args.trace).read_text())
    dp = diffusion_scale(times, q * args.n, args.n, args.lambda_total)
    _write(args.out, dp.csv_text())
    return 0


def _add_experiment(sub) -> None:
    p = sub.add_parser("experiment", help="run a configured experiment suite")
    p.add_argument("--config", required=True)
    p.add_argument("--profile", choices=["ci", "full"], default="ci")
    p.add_argument("--out", required=True, help="output directory")


def _run_experiment(args) -> int:
    return run_all(Path(args.config).read_text(), args.profile, args.out)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="graphlb",
        description="graph-constrained shortest-queue load balancing toolkit")
    parser.add_argument("--version", action="version",
                        version=f"graphlb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_gen(sub)
    _add_dis(sub)
    _add_audit(sub)
    _add_simulate(sub)
    _add_couple(sub)
    _add_fluid(sub)
    _add_scale(sub)
    _add_experiment(sub)
    args = parser.parse_args(argv)
    runners = {
        "gen": _run_gen,
        "dis": _run_dis,
        "audit": _run_audit,
        "simulate": _run_simulate,
        "couple": _run_couple,
        "fluid": _run_fluid,
        "scale": _run_scale,
        "experiment": _run_experiment,
    }
    try:
        return runners[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"graphlb: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
