#!/usr/bin/env python3
"""
Demo script for the UAV network simulator
"""

import sys
from pathlib import Path

# Add the project root to the path for local development
sys.path.insert(0, str(Path(__file__).parent.parent))

from packages.uav_planner.harness import compare, summarize  # noqa: E402
from packages.uav_planner.scenario import Algorithm, load_scenario  # noqa: E402

SCENARIO = Path(__file__).parent.parent / "data" / "scenarios" / "smoke.json"


def main() -> None:
    scenario = load_scenario(SCENARIO)

    print("🚁 UAV Network Simulator Demo")
    print("=" * 50)
    print(
        f"Region {scenario.region_width:.0f} x {scenario.region_height:.0f} m, "
        f"{scenario.num_users} users, {scenario.num_uavs} UAVs of capacity {scenario.capacity}"
    )
    print(
        f"{scenario.num_macro_slots} macro slots of {scenario.slots_per_macro} slots, "
        f"seed {scenario.seed}"
    )

    algorithms = [a.value for a in Algorithm]
    results = compare(scenario, algorithms)

    print("\n" + "=" * 50)
    for name, result in results.items():
        print(f"\n📡 {name}")
        print("-" * 50)
        for record in result.metrics:
            ee = (
                "undefined"
                if record.energy_efficiency is None
                else f"{record.energy_efficiency:.3e} bit/J"
            )
            print(
                f"  slot {record.slot:3d}  unserved {record.unserved_pct:5.1f}%  "
                f"delay SD {record.delay_sd:5.2f} s  EE {ee}"
            )

    print("\n📊 Summary (seed, algorithm, mean unserved %, final delay SD, final EE)")
    for row in summarize({scenario.seed: results}):
        print("  " + ", ".join(row))


if __name__ == "__main__":
    main()
