import math

import numpy as np
import pytest

from mixtask.costs import (
    HumanCostModel,
    RobotQTable,
    SampleRecord,
    build_robot_table,
    collect_samples,
    human_q,
    load_table,
    robot_q,
    robot_q_or_floor,
    save_table,
)
from mixtask.errors import MissingEntry
from mixtask.scenarios import load_scenario
from mixtask.world import TIMEOUT_STEPS, PhysicalPrimitive, apply_effect, state_key

SCENARIO_TEMPLATE = """
[world]
size = 8 x 8
meters_per_cell = 1.0
furniture shelf = (0,0)
furniture table = (4,4)
human @ (4,5)
robot @ (2,2)

[objects]
cup @ shelf

[plan]
pickplace(cup, table)

[hierarchy]
Move the cup : 0..1

[capabilities]
robot 0 = {p}

[durations]
robot pickplace = {d}
human pickplace = 3
"""


def scenario_with(p, d):
    return load_scenario(SCENARIO_TEMPLATE.format(p=p, d=d), name="probe")


def test_collect_all_success_constant():
    s = scenario_with(1.0, 7)
    records = collect_samples(s, s.plan.steps[0], 100, np.random.default_rng(0))
    assert len(records) == 100
    assert all(r.elapsed == 7 for r in records)


def test_collect_all_failure_records_timeout():
    s = scenario_with(0.0, 7)
    records = collect_samples(s, s.plan.steps[0], 100, np.random.default_rng(0))
    assert all(r.elapsed == TIMEOUT_STEPS for r in records)


def test_collect_mean_matches_expectation_oracle():
    # oracle: E = p*d + (1-p)*L = 0.5*10 + 0.5*60 = 35
    s = scenario_with(0.5, 10)
    records = collect_samples(s, s.plan.steps[0], 10_000, np.random.default_rng(9))
    assert abs(np.mean([r.elapsed for r in records]) - 35.0) < 1.0


def test_robot_q_examples():
    s = scenario_with(1.0, 7)
    table = build_robot_table(s, 50, np.random.default_rng(1))
    assert robot_q(table, s.initial_state, s.plan.steps[0]) == -7.0

    s0 = scenario_with(0.0, 7)
    table0 = build_robot_table(s0, 50, np.random.default_rng(1))
    assert robot_q(table0, s0.initial_state, s0.plan.steps[0]) == -TIMEOUT_STEPS


def test_robot_q_point_eight_expectation():
    # oracle: -(0.8*10 + 0.2*60) = -20
    s = scenario_with(0.8, 10)
    table = build_robot_table(s, 20_000, np.random.default_rng(5))
    assert robot_q(table, s.initial_state, s.plan.steps[0]) == pytest.approx(-20.0, abs=0.5)


def test_missing_entry_raises_and_floor_applies():
    table = RobotQTable()
    s = scenario_with(1.0, 7)
    with pytest.raises(MissingEntry):
        robot_q(table, s.initial_state, s.plan.steps[0])
    assert robot_q_or_floor(table, s.initial_state, s.plan.steps[0]) == -60.0


def test_min_count_gate():
    table = RobotQTable(min_count=3)
    s = scenario_with(1.0, 7)
    key = state_key(s.initial_state)
    prim = s.plan.steps[0]
    table.add(SampleRecord(state_key=key, primitive=prim, elapsed=7))
    with pytest.raises(MissingEntry):
        table.lookup(key, prim)
    table.add(SampleRecord(state_key=key, primitive=prim, elapsed=7))
    table.add(SampleRecord(state_key=key, primitive=prim, elapsed=7))
    assert table.lookup(key, prim) == -7.0


def test_q_monotone_in_success_probability():
    values = []
    for p in (0.1, 0.4, 0.7, 1.0):
        s = scenario_with(p, 10)
        table = build_robot_table(s, 20_000, np.random.default_rng(3))
        values.append(robot_q(table, s.initial_state, s.plan.steps[0]))
    assert values == sorted(values)


def test_human_q_stationary_plus_travel():
    # human at (4,5), cup on the shelf at (0,0): distance = sqrt(41) meters
    s = scenario_with(1.0, 7)
    model = HumanCostModel.for_scenario(s)
    q = human_q(model, s.initial_state, s.plan.steps[0])
    oracle = -(3.0 + math.sqrt(4**2 + 5**2) / 1.4)
    assert q == pytest.approx(oracle)


def test_human_q_zero_travel_is_stationary_only():
    s = scenario_with(1.0, 7)
    moved = s.initial_state.with_location("cup", "table").with_pose("human", (4, 4))
    model = HumanCostModel.for_scenario(s)
    assert human_q(model, moved, s.plan.steps[0]) == pytest.approx(-3.0)


def test_human_q_translation_invariance_in_stationary_cost():
    s = scenario_with(1.0, 7)
    base = HumanCostModel.for_scenario(s)
    shifted = HumanCostModel(
        stationary={**base.stationary, "pickplace": base.stationary["pickplace"] + 4.0},
        world=base.world,
    )
    q0 = human_q(base, s.initial_state, s.plan.steps[0])
    q1 = human_q(shifted, s.initial_state, s.plan.steps[0])
    assert q1 - q0 == pytest.approx(-4.0)


def test_walking_speed_is_pinned():
    s = scenario_with(1.0, 7)
    with pytest.raises(ValueError):
        HumanCostModel(stationary={"pickplace": 3.0}, world=s.world, walking_speed=2.0)


def test_pour_package_per_step_costs_match_geometry_oracle(pour_package):
    # independent recomputation: stationary (scenario data) + distance/1.4,
    # walking the plan's projected states
    model = HumanCostModel.for_scenario(pour_package)
    world = pour_package.world
    state = pour_package.initial_state
    expected = []
    for prim in pour_package.plan.steps:
        holder = state.object_locations[prim.params[0]]
        while holder in state.object_locations:
            holder = state.object_locations[holder]
        hx, hy = state.agent_poses["human"]
        meters = min(
            math.hypot(hx - x, hy - y) for x, y in world.furniture[holder]
        ) * world.meters_per_cell
        stationary = pour_package.human_stationary_seconds(prim)
        expected.append(-(stationary + meters / 1.4))
        state = apply_effect(state, prim)

    state = pour_package.initial_state
    for prim, want in zip(pour_package.plan.steps, expected):
        assert human_q(model, state, prim) == pytest.approx(want)
        state = apply_effect(state, prim)
    # calibrated values: the bundled task's per-step human costs
    assert [round(v, 3) for v in expected] == [-9.6, -7.2, -13.2, -2.4, -2.4]


def test_table_persistence_roundtrip(tmp_path, pour_package):
    table = build_robot_table(pour_package, 100, np.random.default_rng(0))
    path = tmp_path / "q.tsv"
    save_table(table, str(path))
    loaded = load_table(str(path))
    assert loaded.entries() == table.entries()


def test_default_stationary_fallback():
    s = scenario_with(1.0, 7)
    model = HumanCostModel.for_scenario(s)
    # a kind the scenario does not override falls back to the model default
    assert model.stationary_seconds(PhysicalPrimitive.parse("fold(cup)")) == 6.0


def test_human_q_ten_second_stationary_at_two_point_eight_meters():
    # -(10 + 2.8/1.4) = -(10 + 2.0) = -12.0
    from mixtask.world import GridWorld, SymbolicState

    world = GridWorld(width=8, height=8, furniture={"table": ((4, 0),)}, meters_per_cell=0.7)
    state = SymbolicState(
        object_locations={"cup": "table"},
        agent_poses={"human": (0, 0)},
        furniture_names=frozenset({"table"}),
    )
    model = HumanCostModel(stationary={"pickplace": 10.0}, world=world)
    q = human_q(model, state, PhysicalPrimitive.parse("pickplace(cup, table)"))
    assert q == pytest.approx(-12.0)
