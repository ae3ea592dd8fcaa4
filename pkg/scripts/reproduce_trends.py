#!/usr/bin/env python3
"""
Multi-seed trend check at reference scale.

Runs every scheme on the same seeds and counts in how many seeds the
proposed pipeline beats each baseline on mean unserved share, final delay
SD and final energy efficiency. Also checks that the delay SD never falls
from one slot to the next, that every placement and slot assignment
respects both capacity constraints, and that each matched relocation of the
proposed pipeline is the cheapest of all UAV pairings and never dearer than
flying UAV j to centroid j.

Usage:
    python scripts/reproduce_trends.py --seeds 20 --workers 4 --out results/trends
"""

import argparse
import itertools
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from packages.uav_planner.harness import (  # noqa: E402
    RunResult,
    compare_seeds,
    write_comparison,
)
from packages.uav_planner.matching import CostMatrix, build_cost_matrix, hungarian  # noqa: E402
from packages.uav_planner.scenario import load_scenario  # noqa: E402

logger = logging.getLogger("reproduce_trends")

DEFAULT_CONFIG = Path(__file__).parent.parent / "data" / "scenarios" / "reference_scale.json"
BASELINES = ["bt", "balanced"]
# exhaustive pairing check is skipped above this many UAVs
MAX_BRUTE_FORCE_UAVS = 8


def _mean_unserved(result: RunResult) -> float:
    return float(np.mean([r.unserved_pct for r in result.metrics]))


def _final_ee(result: RunResult) -> float:
    ee = result.metrics[-1].energy_efficiency
    return 0.0 if ee is None else ee


def _delay_sd_monotone(result: RunResult) -> bool:
    sd = [r.delay_sd for r in result.metrics]
    return all(b >= a - 1e-12 for a, b in zip(sd, sd[1:]))


def tally(results_by_seed: Dict[int, Dict[str, RunResult]]) -> Dict[str, Dict[str, int]]:
    """Per-baseline count of seeds where the proposed pipeline wins each metric."""
    wins = {b: {"unserved": 0, "delay_sd": 0, "ee": 0} for b in BASELINES}
    for results in results_by_seed.values():
        ours = results["proposed"]
        for baseline in BASELINES:
            theirs = results[baseline]
            if _mean_unserved(ours) < _mean_unserved(theirs):
                wins[baseline]["unserved"] += 1
            if ours.metrics[-1].delay_sd < theirs.metrics[-1].delay_sd:
                wins[baseline]["delay_sd"] += 1
            if _final_ee(ours) > _final_ee(theirs):
                wins[baseline]["ee"] += 1
    return wins


def _brute_force_minimum(costs: CostMatrix) -> float:
    """Cheapest reachable pairing, summed in row order like the solver."""
    best = float("inf")
    for perm in itertools.permutations(range(costs.n)):
        if not all(costs.reachable[i, j] for i, j in enumerate(perm)):
            continue
        total = 0.0
        for i, j in enumerate(perm):
            total += float(costs.cost[i, j])
        best = min(best, total)
    return best


def check_relocations(results_by_seed: Dict[int, Dict[str, RunResult]]) -> bool:
    """Matched relocations of the proposed pipeline against exhaustive search and identity."""
    ok = True
    for seed, results in results_by_seed.items():
        for record in results["proposed"].audits:
            if record.planned_energy > record.identity_energy * (1.0 + 1e-9):
                logger.warning(
                    "Seed %d macro slot %d: matched %.1f J above identity %.1f J",
                    seed,
                    record.macro,
                    record.planned_energy,
                    record.identity_energy,
                )
                ok = False
            if len(record.sources) > MAX_BRUTE_FORCE_UAVS:
                continue
            costs = build_cost_matrix(
                record.sources, record.centroids, record.deadline, record.speeds, record.energies
            )
            matched, best = hungarian(costs).total, _brute_force_minimum(costs)
            if matched != best:
                logger.warning(
                    "Seed %d macro slot %d: matched %.17g J, exhaustive minimum %.17g J",
                    seed,
                    record.macro,
                    matched,
                    best,
                )
                ok = False
    return ok


def check_feasibility(results_by_seed: Dict[int, Dict[str, RunResult]]) -> bool:
    """Every placement and slot assignment of every scheme respects both constraints."""
    ok = True
    for seed, results in results_by_seed.items():
        for name, result in results.items():
            for record in result.audits:
                if not (record.placement_feasible and record.slots_feasible):
                    logger.warning("Seed %d %s macro slot %d infeasible", seed, name, record.macro)
                    ok = False
    return ok


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("--config", type=Path, default=DEFAULT_CONFIG)
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", type=Path, default=None, help="Also write the result CSVs")
    parser.add_argument("--threshold", type=float, default=0.9, help="Required win share")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    scenario = load_scenario(args.config)
    seeds = list(range(scenario.seed, scenario.seed + args.seeds))
    results = compare_seeds(scenario, ["proposed", *BASELINES], seeds, args.workers, audit=True)
    if args.out is not None:
        write_comparison(results, args.out)

    ok = True
    needed = args.threshold * len(seeds)
    for baseline, counts in tally(results).items():
        for metric, count in counts.items():
            passed = count >= needed
            ok &= passed
            print(f"{'✅' if passed else '❌'} proposed beats {baseline} on {metric}: "
                  f"{count}/{len(seeds)} seeds")

    monotone = all(
        _delay_sd_monotone(r) for per_seed in results.values() for r in per_seed.values()
    )
    print(f"{'✅' if monotone else '❌'} delay SD non-decreasing for every scheme and seed")

    feasible = check_feasibility(results)
    print(f"{'✅' if feasible else '❌'} every placement and slot assignment within capacity")

    matched = check_relocations(results)
    print(f"{'✅' if matched else '❌'} matched relocations are the exhaustive minimum "
          f"and no dearer than identity")
    return 0 if ok and monotone and feasible and matched else 1


if __name__ == "__main__":
    sys.exit(main())
