"""Command-line entry point: `msnp discover|predict|trust|gen`."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from msnp.data import (
    TABLE1,
    DataError,
    generate_records,
    load_sequence_dataset,
    load_trust_graph,
    make_sequence_fixture,
    planted_trust_graph,
    save_trust_graph,
    write_sequence_csv,
)
from msnp.harness import ROW_FIELDS, exp_discovery_sweep, exp_prediction_curve, exp_trust_comparison, parse_seeds
from msnp.predictor import PredictionError, load_records, load_rules, save_records
from msnp.simnet import MODELS, SimError, default_sim_config, load_sim_config, save_sim_config, staggered_schedule
from msnp.trust import Scheme, TrustError

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


def _ints(text: str) -> list:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _floats(text: str) -> list:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _names(text: str) -> list:
    return [v.strip() for v in text.split(",") if v.strip()]


def _seeds(text: str) -> tuple:
    try:
        return parse_seeds(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="msnp", description="Service discovery and trust experiments.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    d = sub.add_parser("discover", help="discovery simulator sweep")
    d.add_argument("--n", type=_ints, default=[50, 100, 200, 300, 400, 500],
                   help="provider counts, comma separated")
    d.add_argument("--models", type=_names, default=["pull", "push", "prefpush"])
    d.add_argument("--seeds", type=_seeds, default=tuple(range(10)),
                   help="a count (0..k-1) or an explicit comma list")
    d.add_argument("--config", help="simulation config file (key = value lines)")
    d.add_argument("--schedule", choices=["all-at-once", "staggered"], default="all-at-once",
                   help="staggered: providers join 5 per second for 100 s")
    d.add_argument("--hybrid-fraction", type=float, default=0.5)
    d.add_argument("--summary", help="also write per-cell means to this CSV")
    d.add_argument("--out", required=True, help="per-seed CSV")

    p = sub.add_parser("predict", help="prediction accuracy curves")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--table1", action="store_true", help="synthetic records from the built-in five-query generator")
    src.add_argument("--records", help="qid,contexts CSV")
    src.add_argument("--sequence", help="location,action,object CSV")
    p.add_argument("--n", type=_ints, default=[100], help="record counts for --table1")
    p.add_argument("--fractions", type=_floats, default=[0.6, 0.7, 0.8, 0.9])
    p.add_argument("--seeds", type=_seeds, default=tuple(range(20)))
    p.add_argument("--rules", help="importance/filter/override rules file")
    p.add_argument("--out", required=True)

    t = sub.add_parser("trust", help="trust scheme comparison")
    g = t.add_mutually_exclusive_group(required=True)
    g.add_argument("--graph", help="trust graph (rater ratee level per line)")
    g.add_argument("--planted", action="store_true", help="use a seeded synthetic graph")
    t.add_argument("--users", type=int, default=600)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--schemes", type=_names, default=[s.value for s in Scheme])
    t.add_argument("--min-ratings", type=int, default=10)
    t.add_argument("--out", required=True, help="JSON report")

    gen = sub.add_parser("gen", help="emit synthetic data")
    gen.add_argument("kind", choices=["records", "graph", "sequence", "config"])
    gen.add_argument("--n", type=int, default=100, help="records, users or rows")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    return parser


def _discover(args) -> None:
    unknown = [m for m in args.models if m not in MODELS]
    if unknown:
        raise UsageError(f"unknown model(s) {unknown}; choose from {sorted(MODELS)}")
    config = load_sim_config(args.config) if args.config else default_sim_config()
    if args.schedule == "staggered":
        config = staggered_schedule(config)
    report = exp_discovery_sweep(config, args.n, args.models, args.seeds, args.hybrid_fraction)
    report.write_csv(args.out, report.raw_rows, ROW_FIELDS["discovery_runs"])
    if args.summary:
        report.write_csv(args.summary)
    sys.stdout.write(report.table())


def _predict(args) -> None:
    rules = load_rules(args.rules) if args.rules else None
    kwargs = {}
    if rules is not None:
        kwargs = dict(importance_rules=rules.importance, filter_rules=rules.filters,
                      manual_override=rules.overrides)
    if args.table1:
        source, n_values = TABLE1, args.n
    elif args.records:
        source, n_values = load_records(args.records), None
    else:
        source, n_values = load_sequence_dataset(args.sequence), None
    report = exp_prediction_curve(source, args.fractions, args.seeds, n_values, **kwargs)
    if args.rules:
        report.config_echo["rules"] = args.rules
    report.write_csv(args.out)
    sys.stdout.write(report.table())


def _trust(args) -> None:
    try:
        schemes = [Scheme(s) for s in args.schemes]
    except ValueError:
        raise UsageError(f"unknown scheme in {args.schemes}; choose from {[s.value for s in Scheme]}") from None
    if args.planted:
        graph, _, _ = planted_trust_graph(n_users=args.users, seed=args.seed)
        origin = f"planted(users={args.users}, seed={args.seed})"
    else:
        graph = load_trust_graph(args.graph)
        origin = args.graph
    report = exp_trust_comparison(graph, schemes, min_ratings=args.min_ratings)
    report.config_echo["graph"] = origin
    report.write_json(args.out)
    sys.stdout.write(report.table())


def _gen(args) -> None:
    if args.kind == "records":
        save_records(generate_records(TABLE1, args.n, args.seed), args.out)
    elif args.kind == "graph":
        graph, _, _ = planted_trust_graph(n_users=args.n, seed=args.seed)
        save_trust_graph(graph, args.out)
    elif args.kind == "sequence":
        write_sequence_csv(make_sequence_fixture(args.n, args.seed), args.out)
    else:
        save_sim_config(default_sim_config(), args.out)
    print(json.dumps({"kind": args.kind, "n": args.n, "seed": args.seed, "out": args.out}, sort_keys=True))


COMMANDS = {"discover": _discover, "predict": _predict, "trust": _trust, "gen": _gen}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    except (DataError, PredictionError, TrustError, SimError, OSError, ValueError) as exc:
        print(f"msnp: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


cli_main = main


if __name__ == "__main__":
    sys.exit(main())
