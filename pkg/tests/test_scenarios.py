import pytest

from mixtask.errors import ParseError, ValidationError
from mixtask.scenarios import (
    PlanSpec,
    builtin_scenario,
    builtin_scenarios,
    load_scenario,
    serialize_scenario,
)
from mixtask.world import PhysicalPrimitive, apply_effect

MINIMAL = """
[world]
size = 6 x 6
meters_per_cell = 1.0
furniture shelf = (0,0)
furniture table = (3,3)
human @ (1,1)
robot @ (2,2)

[objects]
cup @ shelf

[plan]
pickplace(cup, table)

[hierarchy]
Move the cup : 0..1

[capabilities]
robot 0 = 0.9

[durations]
robot pickplace = 5
human pickplace = 3
"""


def test_minimal_document_loads():
    s = load_scenario(MINIMAL, name="mini")
    assert len(s.plan) == 1
    assert s.plan.robot_capability[0] == 0.9
    assert s.initial_state.object_locations["cup"] == "shelf"


def test_roundtrip_serialize_then_load_equal():
    for scenario in builtin_scenarios():
        again = load_scenario(serialize_scenario(scenario), name=scenario.name)
        assert again == scenario


def test_hierarchy_gap_is_rejected():
    bad = MINIMAL.replace("Move the cup : 0..1", "Move the cup : 0..0")
    with pytest.raises((ValidationError, ValueError)):
        load_scenario(bad)


def test_hierarchy_partition_gap_named_index():
    steps = tuple(
        PhysicalPrimitive.parse(s)
        for s in (
            "pickplace(a, t)",
            "pickplace(b, t)",
            "pickplace(c, t)",
            "pickplace(d, t)",
            "pickplace(e, t)",
        )
    )
    with pytest.raises(ValidationError, match="index 2"):
        PlanSpec(
            steps=steps,
            abstract_steps=(("one", (0, 2)), ("two", (3, 5))),
            robot_capability={i: 1.0 for i in range(5)},
        )


def test_unknown_plan_param_rejected():
    bad = MINIMAL.replace("pickplace(cup, table)", "pickplace(plate, table)")
    with pytest.raises(ValidationError, match="plate"):
        load_scenario(bad)


def test_unknown_section_rejected_with_line():
    with pytest.raises(ParseError, match="line"):
        load_scenario("[wat]\nx = 1\n")


def test_builtin_pour_package_matches_listing(pour_package):
    plan = pour_package.plan
    assert len(plan) == 5
    assert [str(p) for p in plan.steps] == [
        "pickplace(bowl, coffee_table)",
        "pickplace(package, coffee_table)",
        "pickplace(scissors, coffee_table)",
        "pick_open_place(scissors, package, coffee_table)",
        "pick_pour_place(package, bowl, coffee_table)",
    ]
    assert len(plan.abstract_steps) == 3
    # the open step is the one the robot cannot perform
    assert plan.robot_capability[3] == 0.0
    assert all(plan.robot_capability[i] > 0 for i in (0, 1, 2, 4))


def test_builtin_toy_car_matches_listing(toy_car):
    plan = toy_car.plan
    assert len(plan) == 8
    assert len(plan.abstract_steps) == 4
    assert plan.infeasible_steps() == frozenset({3, 5, 6, 7})
    assert plan.robot_capability[4] == 0.5  # low-success bit swap fetch
    assert str(plan.steps[4]) == "pickplace(hex_drill_bit, coffee_table)"


def test_builtin_gift_box_matches_listing(gift_box):
    plan = gift_box.plan
    assert len(plan) == 8
    assert str(plan.steps[6]) == "cut_put(tape, scissors, box)"
    assert plan.infeasible_steps() == frozenset({3, 5, 6})
    assert plan.robot_capability[1] == 0.5
    assert plan.robot_capability[4] == 0.5


def test_every_builtin_plan_is_oracle_executable():
    # an all-capable agent must walk each plan start to finish with no dead ends
    for scenario in builtin_scenarios():
        state = scenario.initial_state
        for prim in scenario.plan.steps:
            state = apply_effect(state, prim)


def test_bundle_lookup(pour_package):
    plan = pour_package.plan
    label, (start, end) = plan.bundle_of(3)
    assert label == "Open the package"
    assert (start, end) == (2, 4)
    assert plan.bundle_steps(0) == (0, 1)
    with pytest.raises(ValidationError):
        plan.bundle_of(99)


def test_unknown_builtin_name():
    with pytest.raises(ValidationError, match="unknown scenario"):
        builtin_scenario("nope")
