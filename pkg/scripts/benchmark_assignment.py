#!/usr/bin/env python3
"""
Timing check for the per-slot assignment and the relocation solver.

Times assign_by_sacrifice on random data matrices for growing user counts
with M fixed and reports the log-log slope of time against K, which should
stay near 2 or below. Also times the Hungarian solver for a few UAV counts.

Usage:
    python scripts/benchmark_assignment.py --uavs 10 --repeats 5
"""

import argparse
import sys
import time
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from packages.uav_planner.assignment import assign_by_sacrifice  # noqa: E402
from packages.uav_planner.matching import CostMatrix, hungarian  # noqa: E402

USER_COUNTS = [100, 200, 400, 800]
UAV_COUNTS = [10, 20, 40, 80]


def _best_of(fn: Callable[[], object], repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("--uavs", type=int, default=10)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-slope", type=float, default=2.2)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)

    print("⏱️  Per-slot assignment")
    print("=" * 50)
    times = []
    for k in USER_COUNTS:
        data = rng.uniform(0.0, 1e6, size=(args.uavs, k))
        priorities = list(rng.uniform(0.0, 1.0, k))
        # tight capacities so the sacrifice loop actually runs
        capacities = [max(1, k // (2 * args.uavs))] * args.uavs
        elapsed = _best_of(lambda: assign_by_sacrifice(data, priorities, capacities), args.repeats)
        times.append(elapsed)
        print(f"  K={k:4d}  M={args.uavs:3d}  {elapsed * 1e3:9.2f} ms")

    slope = float(np.polyfit(np.log(USER_COUNTS), np.log(times), 1)[0])
    passed = slope <= args.max_slope
    print(f"{'✅' if passed else '❌'} log-log slope {slope:.2f} (limit {args.max_slope})")

    print("\n⏱️  Hungarian relocation matching")
    print("=" * 50)
    for m in UAV_COUNTS:
        cost = CostMatrix.from_array(rng.uniform(0.0, 1e5, size=(m, m)))
        elapsed = _best_of(lambda: hungarian(cost), args.repeats)
        print(f"  M={m:3d}  {elapsed * 1e3:9.2f} ms")

    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
