"""Agent step-cost estimators.

Robot costs come from seeded Monte-Carlo rollouts aggregated into a table
keyed by (state digest, primitive); human costs are a stationary time plus
walking time at a fixed speed. Both are expressed as negative expected
timesteps so the allocator can compare them directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import MissingEntry, ParseError, UnknownEntity
from .scenarios import TaskScenario
from .world import (
    TIMEOUT_STEPS,
    GridWorld,
    PhysicalPrimitive,
    SymbolicState,
    apply_effect,
    rollout_primitive,
    state_key,
    travel_distance,
)

WALKING_SPEED_MPS = 1.4

# Fallback stationary seconds per primitive kind; scenarios normally override.
DEFAULT_STATIONARY_SECONDS = {
    "pickplace": 8.0,
    "pick_open_place": 15.0,
    "pick_pour_place": 10.0,
    "put_on": 20.0,
    "switch": 12.0,
    "fold": 6.0,
    "cover": 8.0,
    "wrap": 20.0,
    "cut_put": 15.0,
}


@dataclass(frozen=True)
class SampleRecord:
    """One observed execution: state digest, primitive, elapsed timesteps."""

    state_key: str
    primitive: PhysicalPrimitive
    elapsed: int

    def __post_init__(self):
        if not (1 <= self.elapsed <= TIMEOUT_STEPS):
            raise ValueError(f"elapsed {self.elapsed} outside [1, {TIMEOUT_STEPS}]")


class RobotQTable:
    """Mean of -elapsed per (state digest, primitive), with sample counts."""

    def __init__(self, min_count: int = 1):
        self.min_count = min_count
        self._sums: dict[tuple[str, str], float] = {}
        self._counts: dict[tuple[str, str], int] = {}

    def add(self, record: SampleRecord) -> None:
        key = (record.state_key, str(record.primitive))
        self._sums[key] = self._sums.get(key, 0.0) + (-record.elapsed)
        self._counts[key] = self._counts.get(key, 0) + 1

    def add_all(self, records: list[SampleRecord]) -> None:
        for r in records:
            self.add(r)

    def entries(self) -> list[tuple[str, str, float, int]]:
        out = []
        for key in sorted(self._sums):
            out.append((key[0], key[1], self._sums[key] / self._counts[key], self._counts[key]))
        return out

    def lookup(self, key: str, primitive: PhysicalPrimitive) -> float:
        k = (key, str(primitive))
        if k not in self._counts or self._counts[k] < self.min_count:
            raise MissingEntry(f"no table entry for {primitive} at {key}")
        return self._sums[k] / self._counts[k]

    def count(self, key: str, primitive: PhysicalPrimitive) -> int:
        return self._counts.get((key, str(primitive)), 0)


def robot_q(table: RobotQTable, state: SymbolicState, primitive: PhysicalPrimitive) -> float:
    """Stored mean of -elapsed; raises MissingEntry when the pair is unseen."""
    return table.lookup(state_key(state), primitive)


def robot_q_or_floor(
    table: RobotQTable, state: SymbolicState, primitive: PhysicalPrimitive
) -> float:
    """Like robot_q, but unseen pairs pessimistically cost the full timeout."""
    try:
        return robot_q(table, state, primitive)
    except MissingEntry:
        return float(-TIMEOUT_STEPS)


def collect_samples(
    scenario: TaskScenario,
    primitive: PhysicalPrimitive,
    n: int,
    rng: np.random.Generator,
    state: SymbolicState | None = None,
) -> list[SampleRecord]:
    """n seeded rollouts of `primitive` from `state` (default: initial state)."""
    if state is None:
        state = scenario.initial_state
    key = state_key(state)
    records = []
    for _ in range(n):
        outcome = rollout_primitive(state, primitive, scenario.robot_profile, rng)
        elapsed = outcome.duration if outcome.succeeded else TIMEOUT_STEPS
        records.append(SampleRecord(state_key=key, primitive=primitive, elapsed=elapsed))
    return records


def build_robot_table(
    scenario: TaskScenario, samples_per_step: int, rng: np.random.Generator
) -> RobotQTable:
    """Collect along the plan: each step sampled at its projected state."""
    table = RobotQTable()
    state = scenario.initial_state
    for prim in scenario.plan.steps:
        table.add_all(collect_samples(scenario, prim, samples_per_step, rng, state=state))
        state = apply_effect(state, prim)
    return table


@dataclass(frozen=True)
class HumanCostModel:
    """Stationary seconds per primitive context plus travel at walking speed."""

    stationary: Mapping[str, float]
    world: GridWorld
    walking_speed: float = WALKING_SPEED_MPS
    seconds_per_timestep: float = 1.0

    def __post_init__(self):
        if self.walking_speed != WALKING_SPEED_MPS:
            raise ValueError(f"walking speed is fixed at {WALKING_SPEED_MPS} m/s")
        for ctx, cost in self.stationary.items():
            if cost <= 0:
                raise ValueError(f"stationary cost for {ctx!r} must be positive")

    @classmethod
    def for_scenario(cls, scenario: TaskScenario) -> "HumanCostModel":
        merged = dict(DEFAULT_STATIONARY_SECONDS)
        merged.update(scenario.human_durations)
        return cls(stationary=merged, world=scenario.world)

    def stationary_seconds(self, prim: PhysicalPrimitive) -> float:
        key = str(prim)
        if key in self.stationary:
            return float(self.stationary[key])
        if prim.kind in self.stationary:
            return float(self.stationary[prim.kind])
        raise MissingEntry(f"no stationary cost for {prim}")


def _containing_furniture(state: SymbolicState, obj: str) -> str:
    """Follow the containment chain up to a furniture or agent name."""
    seen = set()
    holder = state.location_of(obj)
    while holder in state.object_locations:
        if holder in seen:
            raise UnknownEntity(f"containment cycle at {holder!r}")
        seen.add(holder)
        holder = state.object_locations[holder]
    return holder


def human_q(
    model: HumanCostModel,
    state: SymbolicState,
    primitive: PhysicalPrimitive,
    human_agent: str = "human",
) -> float:
    """-(stationary + travel) in timesteps; humans are assumed never to fail."""
    if human_agent not in state.agent_poses:
        raise UnknownEntity(f"unknown agent {human_agent!r}")
    target = _containing_furniture(state, primitive.params[0])
    if target in state.agent_poses:
        ax, ay = state.agent_poses[human_agent]
        bx, by = state.agent_poses[target]
        meters = ((ax - bx) ** 2 + (ay - by) ** 2) ** 0.5 * model.world.meters_per_cell
    else:
        meters = travel_distance(model.world, state, human_agent, target)
    travel_seconds = meters / model.walking_speed
    seconds = model.stationary_seconds(primitive) + travel_seconds
    return -(seconds / model.seconds_per_timestep)


# --- persistence ----------------------------------------------------------------

TABLE_FORMAT_VERSION = 1


def save_table(table: RobotQTable, path: str) -> None:
    lines = [f"qtable v{TABLE_FORMAT_VERSION}"]
    for key, prim, mean, count in table.entries():
        lines.append(f"{key}\t{prim}\t{mean!r}\t{count}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_table(path: str, min_count: int = 1) -> RobotQTable:
    table = RobotQTable(min_count=min_count)
    with open(path) as fh:
        header = fh.readline().strip()
        if header != f"qtable v{TABLE_FORMAT_VERSION}":
            raise ParseError(f"unsupported table header {header!r}", line=1)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                key, prim, mean, count = line.rstrip("\n").split("\t")
                table._sums[(key, prim)] = float(mean) * int(count)
                table._counts[(key, prim)] = int(count)
            except ValueError:
                raise ParseError("bad table row", line=lineno) from None
    return table
