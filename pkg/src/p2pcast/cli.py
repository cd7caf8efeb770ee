"""Command-line front end.

Subcommands:

* ``run`` — run an experiment grid from a config file.
* ``aggregate`` — recompute aggregate rows from an existing raw results CSV.
* ``verify`` — check a topology CSV (plus its capacity sidecar) for
  feasibility and report the first violated requirement.
* ``distributions`` — write sample delay spaces as node,x,y CSVs.
* ``demo`` — run a small built-in grid end to end and verify every cell.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import harness
from .delay_space import KINDS, DistributionSpec, generate
from .metrics import verify_feasible
from .rng import make_rng
from .topology import CapacityProfile, PolicySpec, build, read_topology_csv


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _progress(stream):
    state = {"count": 0}

    def report(result: harness.CellResult) -> None:
        state["count"] += 1
        status = "FAILED (admission stuck)" if result.failed else f"{result.build_ms} ms"
        print(
            f"[{state['count']}] {result.policy}/{result.distribution}/"
            f"n={result.n}/run={result.run}: {status}",
            file=stream,
        )

    return report


def _cmd_run(args) -> int:
    try:
        with open(args.config) as f:
            mapping = harness.parse_config(f.read())
        config = harness.config_from_mapping(
            mapping,
            master_seed=args.seed,
            sizes_override=args.sizes,
            policies_override=args.policies,
        )
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    results, _ = harness.run_experiment(
        config, args.out, parallel=args.parallel, progress=_progress(sys.stderr)
    )
    failed = sum(r.failed for r in results)
    print(
        f"{len(results)} cells in {os.path.join(args.out, 'results.csv')} "
        f"({failed} failed); aggregates in {os.path.join(args.out, 'agg.csv')}"
    )
    return 0


def _cmd_aggregate(args) -> int:
    try:
        results = harness.read_results_csv(args.raw)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out if args.out is not None else (os.path.dirname(args.raw) or ".")
    os.makedirs(out_dir, exist_ok=True)
    rows = harness.aggregate(results)
    path = os.path.join(out_dir, "agg.csv")
    harness.write_aggregate_csv(rows, path)
    print(f"{len(rows)} aggregate rows in {path}")
    return 0


def _cmd_verify(args) -> int:
    try:
        topology, caps = read_topology_csv(args.edges, args.capacities)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = verify_feasible(topology, caps, args.m)
    if report.ok:
        print(f"feasible: {topology.n_nodes} nodes, M={args.m}")
        return 0
    print(f"infeasible: {report.message}")
    return 1


def _cmd_distributions(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    for kind in KINDS:
        for n in args.sizes:
            space = generate(DistributionSpec.preset(kind, n, args.seed))
            path = os.path.join(args.out, f"space_{kind}_n{n}.csv")
            space.to_csv(path)
            note = "" if space.cluster_count is None else f" ({space.cluster_count} clusters)"
            print(f"{path}: {n} nodes{note}")
    return 0


def _cmd_demo(args) -> int:
    config = harness.ExperimentConfig.demo_grid(args.seed)
    results, _ = harness.run_experiment(
        config, args.out, parallel=args.parallel, progress=_progress(sys.stderr)
    )
    # Re-derive each cell and check the three feasibility requirements
    # independently of what the harness recorded.
    bad: list[str] = []
    for policy, dist, n, run in harness.iter_cells(config):
        seed = harness.cell_seed(config.master_seed, policy, dist, n, run)
        space = generate(DistributionSpec.preset(dist, n, seed))
        caps = CapacityProfile.sample(
            n, make_rng(seed, "capacities"), config.sim.capacity_choices, config.sim.u0
        )
        try:
            topo = build(space, caps, PolicySpec.from_code(policy), config.sim.m, seed)
        except Exception as exc:  # admission stuck would already be a failed cell
            bad.append(f"{policy}/{dist}/n={n}/run={run}: build failed ({exc})")
            continue
        report = verify_feasible(topo, caps, config.sim.m)
        if not report.ok:
            bad.append(f"{policy}/{dist}/n={n}/run={run}: {report.message}")
    total = len(results)
    if bad:
        print(f"demo: {len(bad)}/{total} cells infeasible", file=sys.stderr)
        for line in bad:
            print(f"  {line}", file=sys.stderr)
        return 1
    print(f"demo: all {total} cells feasible; outputs in {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="p2pcast",
        description="Locality-aware peer-to-peer streaming topology simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment grid from a config file")
    p_run.add_argument("--config", required=True, help="flat key=value config file")
    p_run.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p_run.add_argument("--out", default="results", help="output directory (default results)")
    p_run.add_argument("--parallel", type=int, default=1, help="worker processes (default 1)")
    p_run.add_argument("--sizes", type=_int_list, default=None, help="override config sizes")
    p_run.add_argument("--policies", type=_str_list, default=None, help="override config policies")
    p_run.set_defaults(func=_cmd_run)

    p_agg = sub.add_parser("aggregate", help="recompute aggregates from a raw results CSV")
    p_agg.add_argument("raw", help="path to results.csv")
    p_agg.add_argument("--out", default=None, help="directory for agg.csv (default: beside raw)")
    p_agg.set_defaults(func=_cmd_aggregate)

    p_verify = sub.add_parser("verify", help="check a topology CSV for feasibility")
    p_verify.add_argument("edges", help="uploader,downloader,multiplicity CSV")
    p_verify.add_argument("capacities", help="node,u,residual_u sidecar CSV")
    p_verify.add_argument("--m", type=int, default=4, help="substream count M (default 4)")
    p_verify.set_defaults(func=_cmd_verify)

    p_dist = sub.add_parser("distributions", help="write sample delay spaces as CSV")
    p_dist.add_argument("--out", default="delay_spaces", help="output directory")
    p_dist.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p_dist.add_argument(
        "--sizes", type=_int_list, default=(1000,), help="node counts (default 1000)"
    )
    p_dist.set_defaults(func=_cmd_distributions)

    p_demo = sub.add_parser("demo", help="run and verify a small built-in grid")
    p_demo.add_argument("--out", default="demo_out", help="output directory (default demo_out)")
    p_demo.add_argument("--seed", type=int, default=harness.DEMO_SEED, help="master seed")
    p_demo.add_argument("--parallel", type=int, default=1, help="worker processes (default 1)")
    p_demo.set_defaults(func=_cmd_demo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
