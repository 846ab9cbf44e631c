"""Command-line front end.

    powerpart generate --clique-pair 5 --out inst/
    powerpart generate --random 8 0.4 --seed 3 --out inst/
    powerpart tune --vertices inst/vertices.csv --links inst/links.csv --partitions 2
    powerpart solve --clique-pair 5 --solver sa --lambda-oh 10 --lambda-bc 0.1
    powerpart compare --config run.cfg

Exit status: 0 on success, 2 when some cells failed or came back
infeasible, 1 on a configuration error.

A config file holds ``key = value`` lines (optionally under an
``[experiment]`` header); keys are the long flag names.  Flags given on
the command line override the file.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

from .experiment import ConfigError, ExperimentConfig, emit_report, load_instance, run_experiment
from .graph import CliquePairSpec, generate_clique_pair, generate_random_graph, save_network
from .models import PartitionModel
from .solvers import SOLVERS
from .tuning import TuningError, grid_search_two_stage

log = logging.getLogger("powerpart")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _instance_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("instance")
    g.add_argument("--vertices", help="vertices CSV (id,lon,lat[,surplus])")
    g.add_argument("--links", help="links CSV (id,v1,v2[,capacity])")
    g.add_argument("--weight-policy", choices=("surplus", "uniform"), help="take surplus from the file or draw U[0,1) with --seed")
    g.add_argument("--clique-pair", type=int, metavar="N", help="two N-cliques joined by one edge")
    g.add_argument("--random", nargs=2, metavar=("N", "P_EDGE"), help="random connected graph")


def _model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--k", type=float, help="self-sufficiency threshold")
    g.add_argument("--K", type=int, help="slack bits per balancing constraint")
    g.add_argument("--partitions", help="P, a range 2-6 or a list 2,4")
    g.add_argument("--sharing", action="store_const", const="true", help="use the electricity-sharing model")
    g.add_argument("--lambda-oh", type=float)
    g.add_argument("--lambda-bc", type=float)
    g.add_argument("--lambda-aux", type=float)


def _run_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run")
    g.add_argument("--solver", help=f"one or more of {', '.join(SOLVERS)}, comma separated")
    g.add_argument("--time-limit", type=float, help="seconds per cell")
    g.add_argument("--reads", type=int)
    g.add_argument("--sweeps", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="output directory")
    g.add_argument("--config", help="key = value file")
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="powerpart", description="Partition power networks into self-sufficient regions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="write a synthetic instance as vertices/links CSV")
    src = gen.add_mutually_exclusive_group(required=True)
    src.add_argument("--clique-pair", type=int, metavar="N")
    src.add_argument("--random", nargs=2, metavar=("N", "P_EDGE"))
    gen.add_argument("--k", type=float, default=0.5)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default=".")

    for name, text in (
        ("tune", "two-stage grid search for the penalty multipliers"),
        ("solve", "solve one instance with one solver and export the solution"),
        ("compare", "run every (P, solver) cell and write the report"),
    ):
        p = sub.add_parser(name, help=text)
        _instance_flags(p)
        _model_flags(p)
        _run_flags(p)
        if name == "compare":
            p.add_argument("--tune", action="store_const", const="true", help="tune multipliers per P")
            p.add_argument("--no-timing", action="store_true", help="leave wall_time_s empty for reproducible CSVs")
    return parser


_KEYS = {
    "vertices": "vertices",
    "links": "links",
    "weight_policy": "weight_policy",
    "clique_pair": "clique_pair",
    "random": "random",
    "alpha": "alpha",
    "beta": "beta",
    "k": "k",
    "K": "K",
    "partitions": "partitions",
    "sharing": "sharing",
    "lambda_oh": "lambda_oh",
    "lambda_bc": "lambda_bc",
    "lambda_aux": "lambda_aux",
    "solver": "solvers",
    "time_limit": "time_limit",
    "reads": "reads",
    "sweeps": "sweeps",
    "seed": "seed",
    "out": "out",
    "tune": "tune",
}


def read_config_file(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    if not any(line.strip().startswith("[") for line in text.splitlines()):
        text = "[experiment]\n" + text
    cp.read_string(text)
    values = {}
    for section in cp.sections():
        for key, value in cp.items(section):
            key = key.replace("-", "_")
            values[_KEYS.get(key, key)] = value
    return values


def config_from_args(args: argparse.Namespace, **fixed) -> ExperimentConfig:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for flag, key in _KEYS.items():
        v = getattr(args, flag, None)
        if v is None:
            continue
        values[key] = " ".join(v) if isinstance(v, list) else v
    if getattr(args, "no_timing", False):
        values["record_timing"] = "false"
    values.update(fixed)
    return ExperimentConfig.from_mapping({k: (v if isinstance(v, str) or v is None else str(v)) for k, v in values.items()})


def cmd_generate(args) -> int:
    if args.clique_pair is not None:
        graph = generate_clique_pair(CliquePairSpec(args.clique_pair, k=args.k, seed=args.seed))
    else:
        graph = generate_random_graph(int(args.random[0]), float(args.random[1]), seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_network(graph, out / "vertices.csv", out / "links.csv")
    print(f"wrote {graph.num_vertices} vertices and {graph.num_edges} links to {out}")
    return EXIT_OK


def cmd_tune(args) -> int:
    config = config_from_args(args, tune="true")
    graph = load_instance(config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    for P in config.partitions:
        model = PartitionModel(graph, P, alpha=config.alpha, beta=config.beta, k=config.k)
        try:
            res = grid_search_two_stage(model, config.grid_spec(), sharing=config.sharing)
        except TuningError as exc:
            print(f"P={P}: tuning failed ({exc}); least-violating point {exc.best}")
            status = EXIT_PARTIAL
            continue
        res.write_trace(out / f"tune_P{P}.csv")
        w = res.weights
        (out / f"weights_P{P}.json").write_text(
            json.dumps({"lambda_oh": w.lambda_oh, "lambda_bc": w.lambda_bc, "lambda_aux": w.lambda_aux, "K": w.K}, indent=2) + "\n",
            encoding="utf-8",
        )
        aux = f" lambda_aux={w.lambda_aux:g}" if config.sharing else ""
        print(f"P={P}: lambda_oh={w.lambda_oh:g} lambda_bc={w.lambda_bc:g}{aux}")
    return status


def cmd_solve(args) -> int:
    config = config_from_args(args)
    if len(config.solvers) != 1 or len(config.partitions) != 1:
        raise ConfigError("solve takes a single solver and a single partition count; use compare for sweeps")
    result = run_experiment(config, write=False)
    rec = result.records[0]
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = rec.as_dict()
    if result.graph is not None and rec.partition is not None:
        payload["partition"] = {vid: p for vid, p in zip(result.graph.ids, rec.partition)}
    (out / "solution.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if rec.status == "failed":
        print(f"{rec.solver}: failed ({rec.error})")
    else:
        print(f"{rec.solver}: objective {rec.objective:g}, violations {rec.violations}, status {rec.status}")
    return result.exit_code


def cmd_compare(args) -> int:
    config = config_from_args(args)
    result = run_experiment(config, write=False)
    print(emit_report(result), end="")
    for r in result.failed:
        print(f"P={r.P} {r.solver}: {r.status}{' (' + r.error + ')' if r.error else ''}")
    return result.exit_code


COMMANDS = {"generate": cmd_generate, "tune": cmd_tune, "solve": cmd_solve, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, configparser.Error, OSError) as exc:
        print(f"powerpart: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"powerpart: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
