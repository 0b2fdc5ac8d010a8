"""Command-line entry point: ``loopsoup <command> --graph G2 ...``; exit code 0 iff the verdict is pass."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import LoopSoupError
from .graph import FORMAT_VERSION
from .green import matrix_csv, potential_bundle
from .io import dump_paths, load_graph, write_text
from .loops import nontrivial_mass
from .report import write_report
from .soup import SoupSampler, bridges, make_generator
from .suites import run_branching_demo, run_gff_suite, run_soup_suite, run_verify_exact, run_wilson_suite
from .wilson import wilson_batch

SUITES = ("verify-exact", "verify-soup", "verify-gff", "verify-wilson", "branching-demo")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loopsoup", description="Markov loop soups on finite graphs.")
    p.add_argument("command", choices=(
        "validate", "green", "verify-exact", "soup", "verify-soup", "verify-gff",
        "wilson", "verify-wilson", "bridge", "branching-demo",
    ))
    p.add_argument("--graph", default="G2", help="graph JSON file or fixture name (default G2)")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=None, help="replicas, runs or paths")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--mode", choices=("aggregate", "resolved"), default="aggregate")
    p.add_argument("--eps", type=float, default=None, help="one-point loop cutoff in resolved mode")
    p.add_argument("--out", default=None, help="write JSON (report or dump) here")
    p.add_argument("--zmax", type=float, default=4.0)
    p.add_argument("--N", type=int, default=64, help="path length for branching-demo")
    p.add_argument("--x", default=None, help="bridge start node")
    p.add_argument("--y", default=None, help="bridge end node")
    return p


def _samples(args, default: int) -> int:
    n = default if args.samples is None else args.samples
    if n < 1:
        raise LoopSoupError("--samples must be positive")
    return n


def _report(rep, args) -> int:
    print(rep.table())
    if args.out:
        write_report(rep, args.out)
    return 0 if rep.verdict == "pass" else 1


def run(args) -> int:
    cmd = args.command
    if cmd == "branching-demo":
        return _report(run_branching_demo(args.N, args.alpha, _samples(args, 100_000), args.seed, args.zmax), args)
    g = load_graph(args.graph)
    if cmd == "validate":
        b = potential_bundle(g)
        info = {
            "format_version": FORMAT_VERSION, "nodes": g.n, "edges": int(np.count_nonzero(g.C) // 2),
            "log_Z_e": b.log_Z, "nontrivial_loop_mass": nontrivial_mass(b),
        }
        print(json.dumps(info, indent=1))
        return 0
    if cmd == "green":
        write_text(matrix_csv(g, potential_bundle(g).G), args.out)
        return 0
    if cmd == "verify-exact":
        return _report(run_verify_exact(g, zmax=args.zmax), args)
    if cmd == "verify-soup":
        rep = run_soup_suite(g, args.alpha, _samples(args, 100_000), args.seed, args.mode, args.eps, zmax=args.zmax)
        return _report(rep, args)
    if cmd == "verify-gff":
        return _report(run_gff_suite(g, _samples(args, 100_000), args.seed, args.zmax), args)
    if cmd == "verify-wilson":
        return _report(run_wilson_suite(g, _samples(args, 100_000), args.seed, args.zmax), args)
    b = potential_bundle(g)
    if cmd == "soup":
        s = SoupSampler(b, args.alpha, mode=args.mode, eps=args.eps)
        batch = s.batch(make_generator(args.seed)[0], _samples(args, 1))
        text = "".join(batch.soup(r, g.nodes, args.seed).dumps() for r in range(batch.nrep))
    elif cmd == "wilson":
        W = wilson_batch(b, _samples(args, 1), args.seed)
        lines = [json.dumps({"format_version": FORMAT_VERSION, "runs": W.runs, "seed": args.seed})]
        for r in range(W.runs):
            lines.append(W.tree(r).dumps(g))
            for l in W.loops(r):
                lines.append(json.dumps({"cycle": [g.nodes[x] for x in l.cycle], "holding": [float(t) for t in l.holding]}))
        text = "\n".join(lines) + "\n"
    else:  # bridge
        x = args.x if args.x is not None else g.nodes[0]
        y = args.y if args.y is not None else g.nodes[-1]
        text = dump_paths(g, bridges(b, x, y, _samples(args, 1), args.seed))
    write_text(text, args.out)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except LoopSoupError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
