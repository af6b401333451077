"""Command-line entry point: ``run``, ``gen`` and ``stats``.

Exit codes: 0 success, 1 I/O failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .graph import (
    EdgeListParseError,
    clustering_coefficient,
    count_kstars,
    count_triangles,
    generate_er,
    max_degree,
    read_edge_list,
    write_edge_list,
)
from .harness import ALGORITHMS, ConfigError, ExperimentConfig, run_trials, summary_dict, write_csv, write_summary
from .mech import RandomSource

EXIT_OK, EXIT_IO, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _er_spec(text: str) -> tuple[int, float]:
    try:
        n, alpha = text.split(",")
        return int(n), float(alpha)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N,ALPHA, got {text!r}") from None


def _split(text: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a,b,c, got {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three fractions, got {text!r}")
    return parts


def _dmax(text: str) -> int | str:
    if text in ("true", "private"):
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N, 'true' or 'private', got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ldpgraph", description="Edge-LDP subgraph counting")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an estimator for a number of trials")
    run.add_argument("--algo", required=True, choices=ALGORITHMS)
    run.add_argument("--eps", type=float, required=True)
    run.add_argument("--split", type=_split, help="fractions of --eps for max degree, RR, Laplace")
    run.add_argument("--k", type=int, default=2)
    run.add_argument("--dmax", type=_dmax, default="true")
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--n", type=int, help="users sampled from --input per trial")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", metavar="PATH")
    src.add_argument("--er", type=_er_spec, metavar="N,ALPHA")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True, metavar="PREFIX")
    run.add_argument("--tight-round2-noise", action="store_true")
    run.add_argument("--fixed-sample", action="store_true",
                     help="reuse one graph sample across trials")
    run.add_argument("--timing", action="store_true",
                     help="fill the seconds column (makes the CSV nondeterministic)")
    run.add_argument("--workers", type=int, default=1)

    gen = sub.add_parser("gen", help="write an Erdos-Renyi graph as an edge list")
    gen.add_argument("--er", type=_er_spec, required=True, metavar="N,ALPHA")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, metavar="PATH")

    stats = sub.add_parser("stats", help="exact statistics of an edge list")
    stats.add_argument("--input", required=True, metavar="PATH")
    stats.add_argument("--k", type=int)
    stats.add_argument("--seed", type=int, default=0, help="accepted for uniformity; unused")
    return p


def cmd_run(args) -> int:
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    config = ExperimentConfig(
        algorithm=args.algo, eps=args.eps, split=args.split, k=args.k, d_tilde=args.dmax,
        trials=args.trials, seed=args.seed, n=args.n, input_path=args.input, er=args.er,
        tight_round2_noise=args.tight_round2_noise, fixed_sample=args.fixed_sample,
    )
    config.validate()
    run = run_trials(config, RandomSource(args.seed), workers=args.workers)

    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    write_csv(run, f"{prefix}.csv", timing=args.timing)
    for name, reports in run.parts.items():
        write_csv(run, f"{prefix}.{name}.csv", reports, timing=args.timing)
    write_summary(run, f"{prefix}.summary.json")

    s = summary_dict(run)
    print(f"{config.algorithm}: {s['trials']} trials, n={run.reports[0].n}")
    print(f"mean l2 {s['mean_l2']:.6g}  mean RE {s['mean_relative_error']:.6g}  "
          f"median RE {s['median_relative_error']:.6g}")
    b = run.reports[0].budget
    print(f"budget: edge LDP {b.edge_ldp_total():g}, entire edge LDP {b.entire_edge_ldp_total():g}")
    if s.get("l2_bound_ORDER_ONLY") is not None:
        print(f"l2 bound (ORDER-ONLY, constant 1): {s['l2_bound_ORDER_ONLY']:.6g}")
    print(f"wrote {prefix}.csv, {prefix}.summary.json")
    return EXIT_OK


def cmd_gen(args) -> int:
    n, alpha = args.er
    if n < 0 or not 0 <= alpha <= 1:
        raise UsageError(f"bad ER spec {n},{alpha}")
    g = generate_er(n, alpha, RandomSource(args.seed).seed_for(0, "graph"))
    out = Path(args.out)
    if out.parent != Path("."):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_edge_list(g, out)
    print(f"wrote {out}: n={g.n} edges={g.edge_count}")
    return EXIT_OK


def cmd_stats(args) -> int:
    if args.k is not None and args.k < 1:
        raise UsageError("--k must be >= 1")
    g, load = read_edge_list(args.input)
    tri, two = count_triangles(g), count_kstars(g, 2)
    print(f"n: {g.n}")
    print(f"edge_count: {g.edge_count}")
    print(f"avg_degree (2|E|/n): {load.avg_degree:.6g}")
    print(f"edges_per_node (|E|/n): {load.edges_per_node:.6g}")
    print(f"d_max: {max_degree(g)}")
    print(f"triangles: {tri}")
    print(f"2-stars: {two}")
    if args.k is not None:
        print(f"{args.k}-stars: {count_kstars(g, args.k)}")
    print(f"clustering_coefficient: {clustering_coefficient(tri, two):.6g}")
    print(f"dropped: {load.self_loops} self-loops, {load.duplicates} duplicates")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "gen": cmd_gen, "stats": cmd_stats}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, EdgeListParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
