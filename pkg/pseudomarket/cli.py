"""
Command-line front end.

    pseudomarket ideal CONFIG [--oracle] [--simulate H]
    pseudomarket run CONFIG [--trials N] [--seed S] [--out PATH] [--jobs J]
    pseudomarket preset NAME [--horizon T] [--alpha A] ... [--out PATH]

Exit codes: 0 success, 2 configuration error, 3 solver error, 4 I/O error.
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

from pseudomarket import __version__, constants
from pseudomarket.config import load_experiment_file
from pseudomarket.exceptions import ConfigError, NumericalFailure, SolverError
from pseudomarket.helper import (
    default_output_path,
    format_float,
    save_to_json,
    summary_path_for,
    write_trials_csv,
)
from pseudomarket.ideal import (
    build_ideal_lp,
    ideal_cap,
    optimal_request_policy,
    simulate_no_competition,
    vertex_enumeration_oracle,
)
from pseudomarket.model import MarketConfig, agent_stream
from pseudomarket.presets import build_preset
from pseudomarket.simulator import ExperimentSummary, monte_carlo

logger = logging.getLogger(__name__)


def _default_jobs() -> int:
    raw = os.environ.get(constants.JOBS_ENV_VAR, "1")
    try:
        jobs = int(raw)
    except ValueError as err:
        raise ConfigError(
            f"{constants.JOBS_ENV_VAR} must be an integer, got {raw!r}"
        ) from err
    if jobs < 1:
        raise ConfigError(f"{constants.JOBS_ENV_VAR} must be >= 1, got {jobs}")
    return jobs


def ideal_report(
    config: MarketConfig,
    oracle: bool = False,
    simulate: Optional[int] = None,
) -> List[str]:
    """
    Lines of the ideal-utility report, one block per agent.

    Raises
    ------
    NumericalFailure
        When ``oracle`` is set and simplex and vertex enumeration disagree.
    """
    lines = []
    for i, agent in enumerate(config.agents):
        cap = ideal_cap(agent.fair_share, config.units)
        policy = optimal_request_policy(agent.type_space, cap)
        stats = policy.stats
        lines.append(
            f"agent {i}: v_star={format_float(stats.v_star)}"
            f" beta={format_float(stats.beta)} q={format_float(stats.q)}"
            f" kappa={format_float(stats.kappa)}"
        )
        for j, demand in enumerate(agent.type_space.types):
            lines.append(
                f"  type {j} (V={format_float(demand.value)},"
                f" K={demand.duration}, p={format_float(demand.probability)}):"
                f" request_prob={format_float(policy.request_prob[j])}"
            )
        if oracle:
            check = vertex_enumeration_oracle(
                build_ideal_lp(agent.type_space, cap)
            )
            gap = abs(check.objective_value - stats.v_star)
            if gap > constants.ORACLE_TOL:
                raise NumericalFailure(
                    f"agent {i}: simplex v*={stats.v_star} but vertex"
                    f" enumeration gives {check.objective_value}"
                )
            lines.append(
                f"  oracle: objective={format_float(check.objective_value)}"
                f" gap={format_float(gap)}"
            )
        if simulate is not None:
            rng = agent_stream(config.seed, 0, i, constants.TYPE_STREAM)
            rate, held = simulate_no_competition(
                policy, agent.type_space, simulate, rng
            )
            lines.append(
                f"  simulated over {simulate} rounds:"
                f" v_star={format_float(rate)} beta={format_float(held)}"
            )
    return lines


def summary_report(summary: ExperimentSummary) -> List[str]:
    lines = [f"trials={summary.trials} base_seed={summary.base_seed}"]
    for record in summary.to_dict()["agents"]:
        lines.append(
            f"agent {record['agent']}:"
            f" mean_utility={format_float(record['mean_utility'])}"
            f" se={format_float(record['se_utility'])}"
            f" rate={format_float(record['mean_utility_rate'])}"
            f" mean_payment={format_float(record['mean_payment'])}"
            f" utilization={format_float(record['mean_utilization'])}"
            f" blocked={format_float(record['mean_blocked_rounds'])}"
        )
    lines.append(
        "allocated_fraction="
        f"{format_float(summary.mean_allocated_fraction)}"
        f" se={format_float(summary.se_allocated_fraction)}"
    )
    for key, value in summary.references.items():
        if value is not None:
            lines.append(f"{key}={format_float(value)}")
    for key, verdict in summary.checks.items():
        lines.append(f"check {key}: {verdict}")
    return lines


def run_experiment(
    config: MarketConfig,
    trials: int,
    name: str,
    out: Optional[str] = None,
    jobs: int = 1,
    seed: Optional[int] = None,
    preset: Optional[str] = None,
) -> ExperimentSummary:
    """Run the trials, then write the CSV and its summary document."""
    summary = monte_carlo(config, trials, base_seed=seed, jobs=jobs)
    csv_path = out if out is not None else default_output_path(name)
    write_trials_csv(summary.rows, csv_path)
    document = summary.to_dict()
    document["name"] = name
    document["preset"] = preset
    save_to_json(document, summary_path_for(csv_path))
    for line in summary_report(summary):
        print(line)
    return summary


def cmd_ideal(args: argparse.Namespace) -> int:
    experiment = load_experiment_file(args.config)
    for line in ideal_report(experiment.config, args.oracle, args.simulate):
        print(line)
    return constants.EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    experiment = load_experiment_file(args.config)
    if experiment.preset == "ideal":
        for line in ideal_report(experiment.config):
            print(line)
        return constants.EXIT_OK
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    trials = args.trials if args.trials is not None else experiment.trials
    name = os.path.splitext(os.path.basename(args.config))[0]
    run_experiment(
        experiment.config,
        trials,
        name,
        args.out,
        jobs,
        seed=args.seed,
        preset=experiment.preset,
    )
    return constants.EXIT_OK


def cmd_preset(args: argparse.Namespace) -> int:
    config, trials = build_preset(
        args.name,
        horizon=args.horizon,
        trials=args.trials,
        seed=args.seed,
        reserve=args.reserve,
        alpha=args.alpha,
        units=args.units,
        n=args.n,
        kmax=args.kmax,
        strategy=args.strategy,
        blockers=args.blockers,
    )
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    run_experiment(config, trials, args.name, args.out, jobs, preset=args.name)
    return constants.EXIT_OK


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer: {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pseudomarket",
        description="Ideal utilities and Monte-Carlo runs of pseudo-markets.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="-v for INFO, -vv for DEBUG logging",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ideal = sub.add_parser("ideal", help="report each agent's ideal utility")
    ideal.add_argument("config", help="experiment file (JSON)")
    ideal.add_argument(
        "--oracle",
        action="store_true",
        help="cross-check the simplex against vertex enumeration",
    )
    ideal.add_argument(
        "--simulate",
        type=_positive_int,
        metavar="H",
        help="run the no-competition renewal process for H rounds",
    )
    ideal.set_defaults(func=cmd_ideal)

    run = sub.add_parser("run", help="run the trials of an experiment file")
    run.add_argument("config", help="experiment file (JSON)")
    run.add_argument("--trials", type=_positive_int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="CSV path, summary goes next to it")
    run.add_argument("--jobs", type=_positive_int)
    run.set_defaults(func=cmd_run)

    preset = sub.add_parser("preset", help="run a bundled experiment")
    preset.add_argument("name", help="guarantee, impossibility, hardness, ...")
    preset.add_argument("--horizon", type=_positive_int)
    preset.add_argument("--trials", type=_positive_int)
    preset.add_argument("--seed", type=int)
    preset.add_argument("--reserve", type=float)
    preset.add_argument("--alpha", type=float)
    preset.add_argument("--units", type=_positive_int)
    preset.add_argument("--n", type=_positive_int)
    preset.add_argument("--kmax", type=_positive_int)
    preset.add_argument("--strategy")
    preset.add_argument("--blockers", type=_positive_int)
    preset.add_argument("--out", help="CSV path, summary goes next to it")
    preset.add_argument("--jobs", type=_positive_int)
    preset.set_defaults(func=cmd_preset)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(
        level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )
    try:
        return int(args.func(args))
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return constants.EXIT_CONFIG_ERROR
    except SolverError as err:
        print(f"solver error: {err}", file=sys.stderr)
        return constants.EXIT_SOLVER_ERROR
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return constants.EXIT_IO_ERROR
