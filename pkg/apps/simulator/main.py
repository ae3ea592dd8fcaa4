"""
UAV Network Simulator CLI

Batch entry point: simulate one scenario, compare algorithms over seeds,
sweep a scenario parameter, or export the seeded city for replay.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from dotenv import load_dotenv
from pydantic import ValidationError

from apps.simulator.config import Settings, get_settings
from packages.uav_planner.environment import generate_city, save_grid
from packages.uav_planner.harness import (
    SimulationError,
    compare_seeds,
    run,
    sweep,
    write_comparison,
    write_run,
)
from packages.uav_planner.scenario import Algorithm, Scenario, load_scenario, random_streams

logger = logging.getLogger(__name__)

DEFAULT_ALGORITHMS = "proposed,bt,balanced"


def _algorithms(value: str) -> List[str]:
    names = [name.strip() for name in value.split(",") if name.strip()]
    known = {a.value for a in Algorithm}
    unknown = [name for name in names if name not in known]
    if unknown:
        raise argparse.ArgumentTypeError(
            f"unknown algorithm(s) {', '.join(unknown)}; choose from {', '.join(sorted(known))}"
        )
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uav-sim", description="Multi-UAV mmWave network simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, type=Path, help="Scenario JSON file")
        p.add_argument("--out", type=Path, default=None, help="Output directory")
        p.add_argument("--seed", type=int, default=None, help="Override the scenario seed")
        p.add_argument(
            "--dump-assignments",
            action="store_true",
            default=None,
            help="Also write the per-slot user-UAV pairs",
        )

    p_sim = sub.add_parser("simulate", help="Run one scenario")
    common(p_sim)
    p_sim.add_argument(
        "--algorithm", choices=[a.value for a in Algorithm], default=None,
        help="Override the scenario algorithm",
    )

    for name, help_text in (
        ("compare", "Run several algorithms on shared seeds"),
        ("sweep", "Compare algorithms across values of one parameter"),
    ):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--algorithms", type=_algorithms, default=_algorithms(DEFAULT_ALGORITHMS))
        p.add_argument("--seeds", type=int, default=1, help="Number of consecutive seeds")
        p.add_argument("--workers", type=int, default=None, help="Parallel replicas")
        if name == "sweep":
            p.add_argument("--param", required=True, help="Dotted scenario field")
            p.add_argument("--values", required=True, help="Comma-separated values")

    p_city = sub.add_parser("export-city", help="Write the seeded city as a grid file")
    p_city.add_argument("--config", required=True, type=Path, help="Scenario JSON file")
    p_city.add_argument("--out", required=True, type=Path, help="Grid text file")
    p_city.add_argument("--seed", type=int, default=None, help="Override the scenario seed")
    return parser


def _scenario(args: argparse.Namespace) -> Scenario:
    scenario = load_scenario(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if getattr(args, "algorithm", None) is not None:
        updates["algorithm"] = Algorithm(args.algorithm)
    return scenario.model_copy(update=updates) if updates else scenario


def _seeds(scenario: Scenario, count: int) -> List[int]:
    if count < 1:
        raise ValueError(f"--seeds must be at least 1, got {count}")
    return list(range(scenario.seed, scenario.seed + count))


def execute(args: argparse.Namespace, settings: Settings) -> None:
    """Dispatch a parsed command."""
    scenario = _scenario(args)

    if args.command == "export-city":
        grid = generate_city(
            scenario.city,
            scenario.region_width,
            scenario.region_height,
            random_streams(scenario.seed).city,
        )
        save_grid(grid, args.out)
        return

    out_dir = args.out or settings.output_dir
    dump = settings.dump_assignments if args.dump_assignments is None else args.dump_assignments

    if args.command == "simulate":
        result = run(scenario, dump_assignments=dump)
        write_run([result], out_dir, dump)
        return

    workers = args.workers or settings.max_workers
    seeds = _seeds(scenario, args.seeds)
    if args.command == "compare":
        results = compare_seeds(scenario, args.algorithms, seeds, workers, dump)
        write_comparison(results, out_dir, dump)
        return

    values = [v.strip() for v in args.values.split(",") if v.strip()]
    sweep(scenario, args.param, values, args.algorithms, seeds, out_dir, workers, dump)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point; returns the process exit status."""
    load_dotenv()
    settings = get_settings()
    logging.basicConfig(
        level=settings.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    args = build_parser().parse_args(argv)
    try:
        execute(args, settings)
    except (ValidationError, ValueError, SimulationError, OSError) as e:
        logger.error("%s failed: %s", args.command, e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
