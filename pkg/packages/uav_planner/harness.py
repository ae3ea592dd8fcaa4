"""
Simulation loop, metrics and result files.

One run walks ``num_macro_slots`` macro slots. At each macro-slot boundary
the UAVs are re-placed and relocated; inside it every slot assigns users,
records metrics and advances wait clocks. User motion comes from a shared
trajectory tape so compared algorithms see identical users.
"""

import copy
import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from .assignment import (
    assign_by_sacrifice,
    balanced_assign,
    baseline_balanced_kmeans,
    best_metric_from_scores,
)
from .clustering import (
    AssignmentMatrix,
    ClusterState,
    bump_priorities,
    cluster,
    metric_kmeans,
)
from .energy import EnergyParams
from .environment import BuildingGrid, Point3, generate_city, load_grid
from .matching import RelocationInfeasibleError, RelocationPlan, identity_plan, plan_relocation
from .mobility import LinkModel, TrajectoryTape, UavState, UserState, build_trajectory_tape
from .scenario import (
    Algorithm,
    Scenario,
    random_streams,
    spawn_uavs,
    spawn_users,
    with_override,
)

logger = logging.getLogger(__name__)

METRICS_HEADER = [
    "slot",
    "algorithm",
    "unserved_pct",
    "delay_sd_s",
    "total_bits",
    "energy_j",
    "ee_bits_per_j",
]
RELOCATION_HEADER = [
    "macro_slot",
    "algorithm",
    "uav",
    "from_x",
    "from_y",
    "from_z",
    "to_x",
    "to_y",
    "to_z",
    "distance_m",
    "energy_j",
]
ASSIGNMENT_HEADER = ["slot", "algorithm", "user", "uav"]
SUMMARY_HEADER = [
    "seed",
    "algorithm",
    "mean_unserved_pct",
    "final_delay_sd_s",
    "final_ee_bits_per_j",
]
UNDEFINED = "undefined"


class SimulationError(RuntimeError):
    """A run could not continue."""


class MetricsRecord(BaseModel):
    """Metrics of one slot."""

    slot: int = Field(..., ge=0)
    algorithm: str
    unserved_pct: float = Field(..., ge=0.0, le=100.0)
    delay_sd: float = Field(..., ge=0.0, description="Population SD of cumulative delay, s")
    total_bits: float = Field(..., ge=0.0, description="Data delivered in this slot")
    movement_energy: float = Field(..., ge=0.0, description="Cumulative relocation energy, J")
    energy_efficiency: Optional[float] = Field(
        default=None, description="Cumulative bits per joule; None while no energy is spent"
    )

    def csv_row(self) -> List[str]:
        ee = UNDEFINED if self.energy_efficiency is None else repr(self.energy_efficiency)
        return [
            str(self.slot),
            self.algorithm,
            repr(self.unserved_pct),
            repr(self.delay_sd),
            repr(self.total_bits),
            repr(self.movement_energy),
            ee,
        ]


@dataclass
class World:
    """Everything the compared algorithms share: city, initial state, motion."""

    grid: BuildingGrid
    users: List[UserState]
    uavs: List[UavState]
    tape: TrajectoryTape
    fading_seed: np.random.SeedSequence


@dataclass
class MacroSlotAudit:
    """Inputs and outcomes of one macro slot, kept for offline verification."""

    macro: int
    sources: List[Point3]
    centroids: List[Point3]
    deadline: float
    speeds: List[float]
    energies: List[EnergyParams]
    planned_energy: float
    identity_energy: float
    applied_energy: float
    placement_feasible: bool
    slots_feasible: bool = True


@dataclass
class RunResult:
    """Output of one run."""

    algorithm: str
    seed: int
    metrics: List[MetricsRecord] = field(default_factory=list)
    relocations: List[List[str]] = field(default_factory=list)
    assignments: List[List[str]] = field(default_factory=list)
    audits: List[MacroSlotAudit] = field(default_factory=list)


def build_world(scenario: Scenario) -> World:
    """Generate (or replay) the city, the initial population and the user motion."""
    streams = random_streams(scenario.seed)
    if scenario.city.grid_file is not None:
        grid = load_grid(scenario.city.grid_file)
        if (grid.region_width, grid.region_height) != scenario.region:
            raise ValueError(
                f"grid file covers {grid.region_width}x{grid.region_height}, "
                f"scenario region is {scenario.region_width}x{scenario.region_height}"
            )
    else:
        grid = generate_city(
            scenario.city, scenario.region_width, scenario.region_height, streams.city
        )
    users = spawn_users(scenario, streams.users)
    uavs = spawn_uavs(scenario, streams.uavs)
    mob = scenario.mobility
    tape = build_trajectory_tape(
        users,
        scenario.region,
        scenario.total_slots,
        scenario.slot_s,
        mob.theta,
        mob.step,
        streams.motion,
        mob.motion_mode,
    )
    return World(grid, users, uavs, tape, streams.fading)


def link_model(scenario: Scenario, grid: BuildingGrid) -> LinkModel:
    return LinkModel(
        grid=grid,
        budget=scenario.channel.budget(),
        slot=scenario.slot_s,
        handover=scenario.handover_s,
        theta=scenario.mobility.theta,
        step=scenario.mobility.step,
        rician_k=scenario.channel.rician_k,
    )


def compute_metrics(
    slot: int,
    algorithm: str,
    assignment: AssignmentMatrix,
    users: Sequence[UserState],
    slot_bits: float,
    cumulative_bits: float,
    cumulative_energy: float,
) -> MetricsRecord:
    """
    Metrics of one slot.

    Args:
        slot: Global slot index
        algorithm: Scheme name
        assignment: The slot's assignment
        users: Users after their wait clocks were advanced for the slot
        slot_bits: Data delivered in the slot
        cumulative_bits: Data delivered so far, this slot included
        cumulative_energy: Relocation energy spent so far

    Returns:
        MetricsRecord; energy efficiency is None while no energy is spent
    """
    k = assignment.num_users
    unserved_pct = 100.0 * assignment.unserved_count() / k if k else 0.0
    delays = np.array([u.delay for u in users], dtype=float)
    delay_sd = float(np.std(delays)) if delays.size else 0.0
    efficiency = cumulative_bits / cumulative_energy if cumulative_energy > 0.0 else None
    return MetricsRecord(
        slot=slot,
        algorithm=algorithm,
        unserved_pct=unserved_pct,
        delay_sd=delay_sd,
        total_bits=slot_bits,
        movement_energy=cumulative_energy,
        energy_efficiency=efficiency,
    )


def _placement(
    algorithm: Algorithm,
    scenario: Scenario,
    users: List[UserState],
    uavs: List[UavState],
    link: LinkModel,
    reach: Optional[List[float]],
) -> ClusterState:
    """New UAV centroids and their assignment for the coming macro slot."""
    cfg = scenario.clustering
    if algorithm is Algorithm.PROPOSED:
        state = cluster(users, uavs, link, cfg, reach)
        logger.info(
            "Clustering finished in %d iterations (converged: %s)",
            state.iterations,
            state.converged,
        )
        return state
    if algorithm is Algorithm.BALANCED:
        centroids, assignment = baseline_balanced_kmeans(users, uavs, cfg.max_iter, cfg.tol, reach)
        return ClusterState(centroids, assignment, cfg.max_iter, True)
    metric = "pathloss" if algorithm is Algorithm.BT else "throughput"
    return metric_kmeans(users, uavs, link, metric, cfg.max_iter, cfg.tol, reach)


def relocation_pays_off(
    gain_bits: float, energy: float, bits_if_staying: float, energy_so_far: float
) -> bool:
    """
    Whether a relocation raises cumulative bits per joule over staying put.

    Moving wins when (B + G) / (E + e) >= B / E, i.e. G / e >= B / E, with B
    the bits expected by the end of the macro slot without moving, G the
    extra bits the move is expected to bring, E the energy spent so far and
    e the energy of the move.

    Args:
        gain_bits: Expected extra bits over the macro slot
        energy: Energy of the relocation, J
        bits_if_staying: Bits delivered so far plus those expected without moving
        energy_so_far: Relocation energy spent so far, J
    """
    if energy <= 0.0:
        return True
    if gain_bits <= 0.0:
        return False
    if energy_so_far <= 0.0:
        return True
    return gain_bits * energy_so_far >= bits_if_staying * energy


def _assign(
    algorithm: Algorithm,
    users: List[UserState],
    uavs: List[UavState],
    data: np.ndarray,
) -> AssignmentMatrix:
    """Per-slot assignment of the scheme on a precomputed data matrix."""
    capacities = [uav.capacity for uav in uavs]
    if algorithm is Algorithm.PROPOSED:
        return assign_by_sacrifice(
            data,
            [u.priority for u in users],
            capacities,
            [u.id for u in users],
            [uav.id for uav in uavs],
        )
    if algorithm is Algorithm.BALANCED:
        return balanced_assign(users, uavs, data)
    if algorithm is Algorithm.BT:
        uav_xyz = np.array([uav.position for uav in uavs], dtype=float)
        user_xyz = np.array([u.position for u in users], dtype=float)
        scores = -np.linalg.norm(uav_xyz[:, None, :] - user_xyz[None, :, :], axis=2)
    else:
        scores = data
    return best_metric_from_scores(scores, data, capacities, "truncate", user_ids=[u.id for u in users])


def _relocate(
    algorithm: Algorithm,
    uavs: List[UavState],
    centroids: List[Point3],
    deadline: float,
) -> RelocationPlan:
    old = [uav.position for uav in uavs]
    speeds = [uav.cruise_speed for uav in uavs]
    energies = [uav.energy for uav in uavs]
    if algorithm is Algorithm.PROPOSED:
        return plan_relocation(old, centroids, deadline, speeds, energies)
    return identity_plan(old, centroids, speeds, energies)


def _stay_plan(uavs: List[UavState]) -> RelocationPlan:
    old = [uav.position for uav in uavs]
    return identity_plan(old, old, [u.cruise_speed for u in uavs], [u.energy for u in uavs])


def _audit_record(
    macro: int,
    uavs: List[UavState],
    placement: ClusterState,
    deadline: float,
    planned: RelocationPlan,
    applied: RelocationPlan,
) -> MacroSlotAudit:
    sources = [uav.position for uav in uavs]
    speeds = [uav.cruise_speed for uav in uavs]
    energies = [uav.energy for uav in uavs]
    identity = identity_plan(sources, placement.centroids, speeds, energies)
    return MacroSlotAudit(
        macro=macro,
        sources=sources,
        centroids=list(placement.centroids),
        deadline=deadline,
        speeds=speeds,
        energies=energies,
        planned_energy=planned.total_energy,
        identity_energy=identity.total_energy,
        applied_energy=applied.total_energy,
        placement_feasible=placement.assignment.is_feasible(),
    )


def run(
    scenario: Scenario,
    world: Optional[World] = None,
    dump_assignments: bool = False,
    audit: bool = False,
) -> RunResult:
    """
    Simulate one scenario with its configured algorithm.

    Args:
        scenario: Validated scenario
        world: Shared city, population and motion; built from the seed if omitted
        dump_assignments: Record the per-slot user-UAV pairs
        audit: Keep a MacroSlotAudit per macro slot

    Returns:
        RunResult with one MetricsRecord per slot

    Raises:
        SimulationError: Relocation infeasible at some macro slot
    """
    if world is None:
        world = build_world(scenario)
    algorithm = Algorithm(scenario.algorithm)
    name = algorithm.value
    users = copy.deepcopy(world.users)
    uavs = copy.deepcopy(world.uavs)
    link = link_model(scenario, world.grid)
    fading_rng = np.random.default_rng(world.fading_seed)
    reset = scenario.clustering.reset_wait_on_service
    result = RunResult(algorithm=name, seed=scenario.seed)

    cumulative_energy = 0.0
    cumulative_bits = 0.0
    logger.info("Run started: %s, seed %d", name, scenario.seed)

    for macro in range(scenario.num_macro_slots):
        first_slot = macro * scenario.slots_per_macro
        world.tape.apply(users, first_slot)

        # macro slot 0 is the initial deployment and has no deadline
        if macro == 0:
            deadline = math.inf
            reach = None
        else:
            deadline = scenario.relocation_deadline_s
            reach = [uav.cruise_speed * deadline for uav in uavs]

        placement = _placement(algorithm, scenario, users, uavs, link, reach)
        try:
            planned = _relocate(algorithm, uavs, placement.centroids, deadline)
        except RelocationInfeasibleError as e:
            raise SimulationError(f"macro slot {macro}: {e}") from e

        plan = planned
        if algorithm is Algorithm.PROPOSED and macro > 0 and scenario.relocation_gate:
            gain = scenario.slots_per_macro * (placement.expected_data - placement.stay_data)
            bits_if_staying = cumulative_bits + scenario.slots_per_macro * placement.stay_data
            paid = relocation_pays_off(
                gain, planned.total_energy, bits_if_staying, cumulative_energy
            )
            if not paid:
                logger.info(
                    "Macro slot %d: staying put, %.4g extra bits do not pay for %.1f J",
                    macro,
                    gain,
                    planned.total_energy,
                )
                plan = _stay_plan(uavs)
        macro_audit = (
            _audit_record(macro, uavs, placement, deadline, planned, plan) if audit else None
        )

        for uav, target in zip(uavs, plan.targets):
            uav.position = target
        cumulative_energy += plan.total_energy
        for move in plan.moves:
            result.relocations.append(
                [str(macro), name, str(uavs[move.uav].id)]
                + [repr(float(v)) for v in (*move.source, *move.target)]
                + [repr(move.distance), repr(move.energy)]
            )
        logger.info(
            "Macro slot %d: relocation %.1f J, cumulative %.1f J",
            macro,
            plan.total_energy,
            cumulative_energy,
        )

        for n in range(scenario.slots_per_macro):
            slot = first_slot + n
            world.tape.apply(users, slot)
            data = link.data_matrix(uavs, users)
            assignment = _assign(algorithm, users, uavs, data)
            if macro_audit is not None and not assignment.is_feasible():
                macro_audit.slots_feasible = False

            serving = assignment.serving_indices()
            if scenario.sample_fading:
                slot_bits = float(np.sum(link.sampled_data(uavs, users, serving, fading_rng)))
            else:
                slot_bits = assignment.total_data(data)
            cumulative_bits += slot_bits

            bump_priorities(users, assignment, scenario.slot_s, reset)
            for user, m in zip(users, serving):
                user.prev_uav = None if m is None else uavs[m].id

            record = compute_metrics(
                slot, name, assignment, users, slot_bits, cumulative_bits, cumulative_energy
            )
            result.metrics.append(record)
            logger.debug(
                "Slot %d: %d of %d users unserved",
                slot,
                assignment.unserved_count(),
                len(users),
            )
            if dump_assignments:
                for user, m in zip(users, serving):
                    result.assignments.append(
                        [str(slot), name, str(user.id), "" if m is None else str(uavs[m].id)]
                    )
        if macro_audit is not None:
            result.audits.append(macro_audit)

    logger.info("Run finished: %s, seed %d", name, scenario.seed)
    return result


def compare(
    scenario: Scenario,
    algorithms: Sequence[str],
    dump_assignments: bool = False,
    audit: bool = False,
) -> Dict[str, RunResult]:
    """
    Run several algorithms on one shared world.

    Args:
        scenario: Base scenario; its algorithm field is overridden
        algorithms: Scheme names, at least two
        dump_assignments: Record per-slot assignments
        audit: Keep per-macro-slot audit records

    Returns:
        Results keyed by algorithm name, in the order given
    """
    if len(algorithms) < 2:
        raise ValueError("compare needs at least two algorithms")
    world = build_world(scenario)
    results: Dict[str, RunResult] = {}
    for name in algorithms:
        algorithm = Algorithm(name)
        variant = scenario.model_copy(update={"algorithm": algorithm})
        # repeated names get their own key so aligned columns can be checked
        key = name if name not in results else f"{name}#{len(results)}"
        results[key] = run(variant, world, dump_assignments, audit)
    return results


def _compare_seed(
    scenario: Scenario,
    algorithms: Sequence[str],
    seed: int,
    dump_assignments: bool,
    audit: bool = False,
) -> Dict[str, RunResult]:
    variant = scenario.model_copy(update={"seed": seed})
    return compare(variant, algorithms, dump_assignments, audit)


def compare_seeds(
    scenario: Scenario,
    algorithms: Sequence[str],
    seeds: Sequence[int],
    max_workers: int = 1,
    dump_assignments: bool = False,
    audit: bool = False,
) -> Dict[int, Dict[str, RunResult]]:
    """Run ``compare`` for every seed, in worker processes when ``max_workers`` > 1."""
    if max_workers <= 1 or len(seeds) <= 1:
        return {s: _compare_seed(scenario, algorithms, s, dump_assignments, audit) for s in seeds}

    with ProcessPoolExecutor(max_workers=max_workers) as executor:
        futures = {
            s: executor.submit(_compare_seed, scenario, algorithms, s, dump_assignments, audit)
            for s in seeds
        }
        return {s: futures[s].result() for s in seeds}


def summarize(results_by_seed: Dict[int, Dict[str, RunResult]]) -> List[List[str]]:
    """
    One summary row per seed and algorithm.

    Columns: mean unserved % over all slots, final-slot delay SD and
    final-slot energy efficiency.
    """
    rows: List[List[str]] = []
    for seed in sorted(results_by_seed):
        for name, result in results_by_seed[seed].items():
            if not result.metrics:
                continue
            mean_unserved = float(np.mean([r.unserved_pct for r in result.metrics]))
            last = result.metrics[-1]
            ee = UNDEFINED if last.energy_efficiency is None else repr(last.energy_efficiency)
            rows.append([str(seed), name, repr(mean_unserved), repr(last.delay_sd), ee])
    return rows


def _write_rows(path: Path, header: List[str], rows: Sequence[Sequence[str]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    logger.info("Wrote %s", path)


def write_metrics_csv(records: Sequence[MetricsRecord], path: Path) -> None:
    _write_rows(Path(path), METRICS_HEADER, [r.csv_row() for r in records])


def write_relocations_csv(rows: Sequence[Sequence[str]], path: Path) -> None:
    _write_rows(Path(path), RELOCATION_HEADER, rows)


def write_assignments_csv(rows: Sequence[Sequence[str]], path: Path) -> None:
    _write_rows(Path(path), ASSIGNMENT_HEADER, rows)


def write_summary_csv(rows: Sequence[Sequence[str]], path: Path) -> None:
    _write_rows(Path(path), SUMMARY_HEADER, rows)


def write_run(results: Sequence[RunResult], out_dir: Path, dump_assignments: bool = False) -> None:
    """Write metrics, relocations and optionally assignments of aligned runs."""
    out_dir = Path(out_dir)
    write_metrics_csv([r for res in results for r in res.metrics], out_dir / "metrics.csv")
    write_relocations_csv([r for res in results for r in res.relocations], out_dir / "relocations.csv")
    if dump_assignments:
        write_assignments_csv(
            [r for res in results for r in res.assignments], out_dir / "assignments.csv"
        )


def write_comparison(
    results_by_seed: Dict[int, Dict[str, RunResult]],
    out_dir: Path,
    dump_assignments: bool = False,
) -> None:
    """Per-seed result directories plus ``summary.csv``."""
    out_dir = Path(out_dir)
    for seed, results in results_by_seed.items():
        write_run(list(results.values()), out_dir / f"seed={seed}", dump_assignments)
    write_summary_csv(summarize(results_by_seed), out_dir / "summary.csv")


def sweep(
    scenario: Scenario,
    param: str,
    values: Sequence[str],
    algorithms: Sequence[str],
    seeds: Sequence[int],
    out_dir: Path,
    max_workers: int = 1,
    dump_assignments: bool = False,
) -> Dict[str, Dict[int, Dict[str, RunResult]]]:
    """
    One comparison per value of a dotted scenario parameter.

    Outputs go to ``<out_dir>/<param>=<value>/``.
    """
    outcome: Dict[str, Dict[int, Dict[str, RunResult]]] = {}
    for value in values:
        variant = with_override(scenario, param, value)
        logger.info("Sweep %s=%s", param, value)
        results = compare_seeds(variant, algorithms, seeds, max_workers, dump_assignments)
        write_comparison(results, Path(out_dir) / f"{param}={value}", dump_assignments)
        outcome[value] = results
    return outcome
