"""Command-line front end.

Thin by design: every subcommand is a couple of library calls, so anything
the CLI can do is equally reachable (and tested) through the library.

    synthaudit run            --config exp.json [--seed N] [--jobs N]
                              [--keep-workdirs]
    synthaudit validate       --config exp.json
    synthaudit select-targets --config exp.json [--count N]
    synthaudit sanitise       --config san.json --data in.csv --schema s.json
                              --out out.csv
    synthaudit synthesize     --config gen.json --data in.csv --schema s.json
                              --out out.csv -m 1000 [--seed N]
                              [--keep-workdirs]

Exit codes: 0 success, 1 configuration or input error, 2 partial cell
failures during a run.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from synthaudit.data import load_csv, load_schema, write_csv
from synthaudit.errors import AuditError
from synthaudit.experiment import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    build_population,
    format_diagnostic,
    load_experiment,
    resolve_targets,
    run_experiment,
    validate_config,
)
from synthaudit.games import select_outlier_targets
from synthaudit.generators import GeneratorSpec, synthesize
from synthaudit.sanitiser import SanitiserConfig, sanitise

logger = logging.getLogger("synthaudit")


def _add_common(p: argparse.ArgumentParser, seed=True, jobs=False, workdirs=False):
    p.add_argument("--config", required=True, help="JSON config file")
    if seed:
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    if jobs:
        p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    if workdirs:
        p.add_argument(
            "--keep-workdirs",
            action="store_true",
            help="keep external-generator scratch directories for inspection",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synthaudit",
        description="privacy games against data publishing mechanisms",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    _add_common(p_run, jobs=True, workdirs=True)

    p_val = sub.add_parser("validate", help="check a config without running it")
    _add_common(p_val, seed=False)

    p_sel = sub.add_parser(
        "select-targets", help="print the target rows a config would audit"
    )
    _add_common(p_sel)
    p_sel.add_argument(
        "--count", type=int, default=None, help="also print the top-N outlier ranking"
    )

    p_san = sub.add_parser("sanitise", help="apply a sanitiser config to a CSV")
    p_san.add_argument("--config", required=True, help="SanitiserConfig JSON")
    p_san.add_argument("--data", required=True, help="input CSV")
    p_san.add_argument("--schema", required=True, help="schema JSON")
    p_san.add_argument("--out", required=True, help="output CSV")

    p_syn = sub.add_parser("synthesize", help="fit a generator and sample to a CSV")
    p_syn.add_argument("--config", required=True, help="GeneratorSpec JSON")
    p_syn.add_argument("--data", required=True, help="training CSV")
    p_syn.add_argument("--schema", required=True, help="schema JSON")
    p_syn.add_argument("--out", required=True, help="output CSV")
    p_syn.add_argument("-m", type=int, required=True, help="records to sample")
    p_syn.add_argument("--seed", type=int, default=0, help="sampling seed (default 0)")
    p_syn.add_argument(
        "--keep-workdirs",
        action="store_true",
        help="keep external-generator scratch directories for inspection",
    )
    return parser


def _cmd_validate(args) -> int:
    diags = validate_config(args.config)
    for d in diags:
        print(format_diagnostic(d))
    if not diags:
        print("ok")
    return EXIT_CONFIG_ERROR if any(d["level"] == "error" for d in diags) else EXIT_OK


def _cmd_select_targets(args) -> int:
    exp = load_experiment(args.config, args.seed)
    population = build_population(exp)
    targets = resolve_targets(exp, population)
    for t in targets:
        row = population.values[t.index]
        decoded = {
            a.name: (a.categories[int(v)] if a.is_categorical else v)
            for a, v in zip(exp.schema.attributes, row)
        }
        print(json.dumps({"index": t.index, "kind": t.kind, "record": decoded}))
    if args.count:
        ranking = select_outlier_targets(population, args.count)
        print(json.dumps({"outlier_ranking": [int(i) for i in ranking]}))
    return EXIT_OK


def _cmd_sanitise(args) -> int:
    config = SanitiserConfig.from_json_dict(json.loads(Path(args.config).read_text()))
    schema = load_schema(args.schema)
    data = load_csv(args.data, schema, policy="reject")
    write_csv(sanitise(data, config), args.out)
    return EXIT_OK


def _cmd_synthesize(args) -> int:
    spec = GeneratorSpec.from_json_dict(json.loads(Path(args.config).read_text()))
    schema = load_schema(args.schema)
    data = load_csv(args.data, schema, policy="reject")
    out = synthesize(
        spec,
        data,
        schema,
        args.m,
        np.random.default_rng(args.seed),
        keep_workdir=args.keep_workdirs,
    )
    write_csv(out, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr
    )
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return run_experiment(
                args.config,
                seed=args.seed,
                jobs=args.jobs,
                keep_workdirs=args.keep_workdirs,
            )
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "select-targets":
            return _cmd_select_targets(args)
        if args.command == "sanitise":
            return _cmd_sanitise(args)
        return _cmd_synthesize(args)
    except (AuditError, OSError, json.JSONDecodeError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main(argv=None))
