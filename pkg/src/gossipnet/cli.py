"""Command-line front end.

Subcommands: `run` executes a sweep from a JSON config and/or flags,
`fit` aggregates a results CSV into scaling reports, `plot` renders
figures, and `queue` drives the queueing simulator. Exit codes: 0 on
success, 1 on validation or input errors, 2 on argument-parse errors
(argparse's convention), 3 when trials hit the round cap or a
dominance check fails.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import experiments, queueing
from .graph import FAMILIES, bfs_tree, generate
from .protocols import run_brr_broadcast, run_tag, run_uniform_ag


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gossipnet",
        description="Coded-gossip and queue-drain simulation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one experiment sweep")
    run.add_argument("--config", help="JSON config file; flags override it")
    run.add_argument("--protocol",
                     choices=["uniform_ag", "brr", "tag", "tag_oracle"])
    run.add_argument("--family", choices=list(FAMILIES))
    run.add_argument("--n", type=_int_list,
                     help="comma-separated size list, e.g. 32,64,128")
    run.add_argument("--k", help="k rule: fixed:V, equal_n, sqrt_n, "
                                 "log_n, polylog:P")
    run.add_argument("--time-model", choices=["sync", "async"])
    run.add_argument("--action", choices=["push", "pull", "exchange"])
    run.add_argument("--q", type=int, choices=[2, 4, 16, 256])
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--percentile", type=float)
    run.add_argument("--graph-seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--engine", choices=["auto", "pure", "fast"])
    run.add_argument("--cap", type=int)
    run.add_argument("--out", help="results CSV path (appended)")
    run.add_argument("--trace", action="store_true",
                     help="print per-contact trace lines (pure engine; "
                          "meant for small single runs)")

    fit = sub.add_parser("fit", help="aggregate a results CSV")
    fit.add_argument("--in", dest="in_path", required=True)
    fit.add_argument("--out", help="report CSV path")
    fit.add_argument("--percentile", type=float, default=99.0)
    fit.add_argument("--graph-seed", type=int, default=0)
    fit.add_argument("--min-sizes", type=int, default=4)

    plot = sub.add_parser("plot", help="render figures from a results CSV")
    plot.add_argument("--in", dest="in_path", required=True, nargs="+")
    plot.add_argument("--out", required=True, help="output directory")
    plot.add_argument("--graph-seed", type=int, default=0)

    queue = sub.add_parser("queue", help="queueing simulator utilities")
    qsub = queue.add_subparsers(dest="queue_command", required=True)

    scal = qsub.add_parser("scaling", help="drain-time scaling grid")
    scal.add_argument("--k", type=_int_list, required=True)
    scal.add_argument("--depths", type=_int_list, required=True)
    scal.add_argument("--n", type=int, default=1024,
                      help="nominal network size for the ln n term")
    scal.add_argument("--mu", type=float, default=1.0)
    scal.add_argument("--trials", type=int, default=10000)
    scal.add_argument("--seed", type=int, default=0)
    scal.add_argument("--out", help="grid CSV path")

    dom = qsub.add_parser("dominance",
                          help="check the tree-to-line slowdown ladder")
    dom.add_argument("--family", choices=list(FAMILIES),
                     default="binary_tree")
    dom.add_argument("--n", type=int, default=7)
    dom.add_argument("--mu", type=float, default=1.0)
    dom.add_argument("--trials", type=int, default=3000)
    dom.add_argument("--alpha", type=float, default=0.01)
    dom.add_argument("--seed", type=int, default=0)

    trace = qsub.add_parser("trace", help="dump one drain's departures")
    trace.add_argument("--line", type=_int_list, required=True,
                       help="customer counts per queue, root first")
    trace.add_argument("--mu", type=float, default=1.0)
    trace.add_argument("--scheduling", default="work_conserving",
                       choices=["work_conserving", "one_per_level"])
    trace.add_argument("--seed", type=int, default=0)
    trace.add_argument("--out", help="trace CSV path (default stdout)")
    return parser


def _cmd_run(args) -> int:
    config = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
    overrides = dict(
        protocol=args.protocol, family=args.family, n=args.n, k=args.k,
        time_model=args.time_model,
        action=args.action.upper() if args.action else None,
        q=args.q, trials=args.trials, seed=args.seed,
        percentile=args.percentile, graph_seed=args.graph_seed,
        workers=args.workers, engine=args.engine, cap=args.cap,
        out=args.out)
    spec = experiments.ExperimentSpec.from_config(config, **overrides)
    if args.trace:
        return _traced_run(spec)
    report = experiments.run_experiment(spec)
    for row in [experiments.FitReport.CSV_HEADER] + report.csv_rows():
        print(row)
    if report.capped:
        print(f"warning: {report.capped} trial(s) hit the round cap",
              file=sys.stderr)
        return 3
    return 0


def _traced_run(spec) -> int:
    rows = []
    for n in spec.n_list:
        g = generate(spec.family, n, seed=spec.graph_seed)
        k = experiments.resolve_k(spec.k_rule, n)
        for i in range(spec.trials_for(n)):
            seed = experiments.derive_seed(spec.seed, spec.family, n, i)
            if spec.protocol == "uniform_ag":
                rep = run_uniform_ag(g, k, q=spec.q,
                                     time_model=spec.time_model,
                                     action=spec.action, seed=seed,
                                     cap=spec.cap, collect_trace=True,
                                     engine="pure")
            elif spec.protocol == "brr":
                rep = run_brr_broadcast(g, time_model=spec.time_model,
                                        seed=seed, cap=spec.cap,
                                        collect_trace=True, engine="pure")
            else:
                tree = "brr" if spec.protocol == "tag" else "oracle"
                rep = run_tag(g, k, q=spec.q, time_model=spec.time_model,
                              tree=tree, seed=seed, cap=spec.cap,
                              collect_trace=True, engine="pure")
            print(f"# {spec.protocol} {spec.family} n={n} k={k} "
                  f"trial={i} seed={seed}")
            for line in rep.trace_lines:
                print(line)
            rows.append(rep.csv_row())
    if spec.out_csv:
        experiments.write_csv(spec.out_csv, rows)
    return 0


def _cmd_fit(args) -> int:
    reports = experiments.fit_csv(args.in_path, args.out,
                                  percentile=args.percentile,
                                  graph_seed=args.graph_seed,
                                  min_sizes=args.min_sizes)
    print(experiments.FitReport.CSV_HEADER)
    for rep in reports:
        for row in rep.csv_rows():
            print(row)
    return 0


def _cmd_plot(args) -> int:
    written = experiments.emit_plots(args.in_path, args.out,
                                     graph_seed=args.graph_seed)
    for path in written:
        print(path)
    return 0


def _cmd_queue(args) -> int:
    if args.queue_command == "scaling":
        rep = queueing.scaling_report(args.k, args.depths, n=args.n,
                                      mu=args.mu, trials=args.trials,
                                      seed=args.seed)
        rows = rep.csv_rows()
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write("\n".join(rows) + "\n")
        for row in rows:
            print(row)
        print(f"# ratio range [{rep.min_ratio:.4g}, {rep.max_ratio:.4g}]  "
              f"r2(k)={rep.fit_r2_vs_k:.4f}  "
              f"r2(levels)={rep.fit_r2_vs_levels:.4f}")
        return 0

    if args.queue_command == "dominance":
        g = generate(args.family, args.n)
        tree = bfs_tree(g, 0)
        start = queueing.build_tree_from_graph(tree, [1] * args.n,
                                               mu=args.mu)
        line = queueing.collapse_levels(start)
        far = queueing.all_customers_back(line)
        checks = [("tree <= line", start, line),
                  ("line <= far-end line", line, far),
                  ("tree <= far-end line", start, far)]
        failed = False
        for name, a, b in checks:
            rep = queueing.dominance_test(a, b, args.trials,
                                          alpha=args.alpha, seed=args.seed)
            verdict = "consistent" if rep.consistent else "VIOLATED"
            print(f"{name}: {verdict} "
                  f"(max violation {rep.max_violation:.4f}, "
                  f"band {rep.band:.4f})")
            failed = failed or not rep.consistent
        return 3 if failed else 0

    trace = queueing.simulate(
        queueing.line_network(args.line, args.mu,
                              scheduling=args.scheduling), args.seed)
    text = queueing.traces_csv(trace)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text, end="")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "plot":
            return _cmd_plot(args)
        return _cmd_queue(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
