"""Command-line entry point.

Subcommands: ``price`` (one experiment config), ``reproduce`` (a manifest of
experiments with tolerance bands), ``oracle`` (1-d CRR and closed-form
reference prices for a config), ``dump-paths`` (binary path/payoff dump).
Exit codes: 0 success, 1 tolerance failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, models, oracles
from .rng import repetition_seeds


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=1, help="worker count for repetitions")
    parser.add_argument("--out-dir", default=None, help="directory for artifacts")
    parser.add_argument("--format", choices=("md", "csv", "json"), default="md")


def build_parser():
    parser = argparse.ArgumentParser(prog="lsmc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_price = sub.add_parser("price", help="run one experiment config")
    p_price.add_argument("config")
    _add_common(p_price)

    p_rep = sub.add_parser("reproduce", help="run a manifest of experiments with bands")
    p_rep.add_argument("manifest")
    _add_common(p_rep)

    p_oracle = sub.add_parser("oracle", help="CRR and closed-form reference prices")
    p_oracle.add_argument("config")
    p_oracle.add_argument("--steps", type=int, default=48_000)
    _add_common(p_oracle)

    p_dump = sub.add_parser("dump-paths", help="simulate one path set and dump it")
    p_dump.add_argument("config")
    p_dump.add_argument("output")
    _add_common(p_dump)
    return parser


def cmd_price(args):
    config = harness.ExperimentConfig.from_json_file(args.config)
    if args.seed is not None:
        config.seed = args.seed
    stats = harness.run_experiment(config, workers=args.threads)
    rows = [(config.name, stats)]
    if args.format == "json":
        print(json.dumps({config.name: stats.to_dict()}, indent=2))
    else:
        print(harness.emit_table(rows)["markdown" if args.format == "md" else "csv"], end="")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / f"{config.name}.json", "w") as fh:
            json.dump(stats.to_dict(), fh, indent=2)
    return 0


def cmd_reproduce(args):
    out_dir = args.out_dir or "reproduction"
    code, results = harness.run_suite(args.manifest, out_dir, workers=args.threads,
                                      seed=args.seed)
    for item in results:
        status = "pass" if item["passed"] else "FAIL"
        print(f"[{status}] {item['name']}: mean={item['stats'].mean:.4f}")
    print(f"artifacts written to {out_dir}/")
    return code


def _one_dimensional_view(config):
    """(spot, vol, dividend, rate, strike) of the config's 1-d equivalent."""
    model = harness.build_model(config)
    payoff = harness.build_payoff(config)
    if isinstance(model, models.HestonSpec):
        raise harness.ConfigError("no 1-d lattice oracle for the Heston model")
    if payoff.kind == "put_1d" and model.dim == 1:
        return model.spot[0], model.vol[0], model.dividend[0], model.rate, payoff.strike
    if payoff.kind == "geometric_put":
        spot, vol, dividend = models.reduce_geometric_to_1d(model)
        return spot, vol, dividend, model.rate, payoff.strike
    raise harness.ConfigError(f"no 1-d oracle for payoff kind {payoff.kind!r}")


def cmd_oracle(args):
    config = harness.ExperimentConfig.from_json_file(args.config)
    spot, vol, dividend, rate, strike = _one_dimensional_view(config)
    grid = harness.build_grid(config)
    tree = oracles.TreeSpec(args.steps, spot, vol, dividend, rate, strike,
                            grid.maturity, grid.dates[1:])
    bermudan = oracles.crr_bermudan_price(tree)
    european = oracles.bs_european_put(spot, strike, vol, dividend, rate, grid.maturity)
    doc = {"config": config.name, "steps": args.steps, "crr_bermudan": bermudan,
           "bs_european_put": european}
    if args.format == "json":
        print(json.dumps(doc, indent=2))
    else:
        for key, value in doc.items():
            print(f"{key}: {value}")
    return 0


def cmd_dump_paths(args):
    config = harness.ExperimentConfig.from_json_file(args.config)
    if args.seed is not None:
        config.seed = args.seed
    path_seed, _ = repetition_seeds(config.seed, 1)[0]
    paths = harness.simulate_paths(config, path_seed)
    models.dump_paths(paths, args.output)
    print(f"wrote {paths.paths_count} paths x {paths.grid.dates_count + 1} dates "
          f"x {paths.state_dim} states to {args.output}")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {"price": cmd_price, "reproduce": cmd_reproduce,
                "oracle": cmd_oracle, "dump-paths": cmd_dump_paths}
    try:
        return handlers[args.command](args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
