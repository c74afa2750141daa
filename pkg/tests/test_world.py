import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixtask.errors import PreconditionViolated, UnknownEntity
from mixtask.world import (
    PRIMITIVE_ARITY,
    TIMEOUT_STEPS,
    AgentProfile,
    GridWorld,
    PhysicalPrimitive,
    PrimitiveOutcome,
    SymbolicState,
    apply_effect,
    rollout_primitive,
    state_key,
    travel_distance,
)


def small_state(**extra_objects):
    objects = {"bowl": "kitchen", "package": "kitchen", "scissors": "kitchen"}
    objects.update(extra_objects)
    return SymbolicState(
        object_locations=objects,
        object_flags={"package": frozenset({"closed"})},
        agent_poses={"robot": (0, 0), "human": (5, 5)},
        furniture_names=frozenset({"kitchen", "coffee_table", "couch"}),
    )


def test_primitive_parse_and_arity():
    prim = PhysicalPrimitive.parse("pickplace(bowl, coffee_table)")
    assert prim.kind == "pickplace" and prim.params == ("bowl", "coffee_table")
    assert str(prim) == "pickplace(bowl, coffee_table)"
    with pytest.raises(ValueError):
        PhysicalPrimitive("pickplace", ("bowl",))
    with pytest.raises(ValueError):
        PhysicalPrimitive("teleport", ("bowl",))


def test_pickplace_moves_object_only():
    state = small_state()
    out = apply_effect(state, PhysicalPrimitive.parse("pickplace(bowl, coffee_table)"))
    assert out.object_locations["bowl"] == "coffee_table"
    assert out.object_locations["package"] == "kitchen"
    assert state.object_locations["bowl"] == "kitchen"  # input unmodified


def test_pickplace_idempotent_fixed_point():
    state = small_state()
    prim = PhysicalPrimitive.parse("pickplace(bowl, coffee_table)")
    once = apply_effect(state, prim)
    twice = apply_effect(once, prim)
    assert once == twice


def test_open_sets_flag_and_clears_closed():
    state = small_state()
    out = apply_effect(
        state, PhysicalPrimitive.parse("pick_open_place(scissors, package, coffee_table)")
    )
    assert "open" in out.flags("package")
    assert "closed" not in out.flags("package")
    assert out.object_locations["scissors"] == "coffee_table"


def test_pour_requires_open_flag():
    state = small_state()
    pour = PhysicalPrimitive.parse("pick_pour_place(package, bowl, coffee_table)")
    with pytest.raises(PreconditionViolated):
        apply_effect(state, pour)
    opened = apply_effect(
        state, PhysicalPrimitive.parse("pick_open_place(scissors, package, coffee_table)")
    )
    poured = apply_effect(opened, pour)
    assert poured.object_locations["package"] == "coffee_table"


def test_every_kind_gate_rejects_missing_entities():
    # enumerate the effect table and verify each kind raises on unknown params
    state = small_state()
    samples = {
        "pickplace": ("ghost", "coffee_table"),
        "pick_open_place": ("scissors", "ghost", "coffee_table"),
        "pick_pour_place": ("ghost", "bowl", "coffee_table"),
        "put_on": ("ghost", "bowl", "scissors"),
        "switch": ("ghost", "bowl"),
        "fold": ("ghost",),
        "cover": ("ghost", "bowl"),
        "wrap": ("ghost", "bowl"),
        "cut_put": ("ghost", "scissors", "bowl"),
    }
    assert set(samples) == set(PRIMITIVE_ARITY)
    for kind, params in samples.items():
        with pytest.raises(UnknownEntity):
            apply_effect(state, PhysicalPrimitive(kind, params))


def test_held_object_blocks_other_agent():
    state = small_state(mug="human")  # human is holding the mug
    with pytest.raises(PreconditionViolated):
        apply_effect(state, PhysicalPrimitive.parse("pickplace(mug, coffee_table)"), actor="robot")
    # the holder themselves can place it
    out = apply_effect(state, PhysicalPrimitive.parse("pickplace(mug, coffee_table)"), actor="human")
    assert out.object_locations["mug"] == "coffee_table"


@st.composite
def random_states_and_prims(draw):
    furniture = ("kitchen", "coffee_table", "couch")
    objects = ("bowl", "package", "scissors", "tape", "box")
    locations = {o: draw(st.sampled_from(furniture)) for o in objects}
    flags = {}
    if draw(st.booleans()):
        flags["package"] = frozenset({"open"})
    state = SymbolicState(
        object_locations=locations,
        object_flags=flags,
        agent_poses={"robot": (0, 0), "human": (3, 3)},
        furniture_names=frozenset(furniture),
    )
    kind = draw(st.sampled_from(sorted(PRIMITIVE_ARITY)))
    arity = PRIMITIVE_ARITY[kind]
    if arity == 1:
        prim = PhysicalPrimitive(kind, (draw(st.sampled_from(objects)),))
    else:
        params = tuple(draw(st.sampled_from(objects)) for _ in range(arity - 1))
        dest = draw(st.sampled_from(furniture + objects))
        prim = PhysicalPrimitive(kind, params + (dest,))
    return state, prim


@given(random_states_and_prims())
@settings(max_examples=300, deadline=None)
def test_apply_effect_preserves_one_location_per_object(case):
    state, prim = case
    try:
        out = apply_effect(state, prim)
    except (PreconditionViolated, UnknownEntity):
        return
    assert set(out.object_locations) == set(state.object_locations)
    for obj, holder in out.object_locations.items():
        assert isinstance(holder, str) and holder
        assert holder != obj


def test_outcome_invariants():
    with pytest.raises(ValueError):
        PrimitiveOutcome(succeeded=True, duration=0)
    with pytest.raises(ValueError):
        PrimitiveOutcome(succeeded=True, duration=TIMEOUT_STEPS + 1)
    with pytest.raises(ValueError):
        PrimitiveOutcome(succeeded=True, duration=5, terminal_failure=True)


def test_rollout_zero_capability_always_times_out(rng):
    state = small_state()
    prim = PhysicalPrimitive.parse("pick_open_place(scissors, package, coffee_table)")
    profile = AgentProfile(name="robot", success={"pick_open_place": 0.0})
    for _ in range(50):
        outcome = rollout_primitive(state, prim, profile, rng)
        assert not outcome.succeeded and outcome.duration == TIMEOUT_STEPS


def test_rollout_certain_constant_duration(rng):
    state = small_state()
    prim = PhysicalPrimitive.parse("pickplace(bowl, coffee_table)")
    profile = AgentProfile(name="robot", success={"pickplace": 1.0}, durations={"pickplace": 7})
    for _ in range(50):
        outcome = rollout_primitive(state, prim, profile, rng)
        assert outcome.succeeded and outcome.duration == 7


def test_rollout_mean_matches_expectation_oracle():
    # oracle: E[duration] = p*d + (1-p)*L = 0.8*10 + 0.2*60 = 20
    p, d = 0.8, 10
    expected = 20.0
    assert p * d + (1 - p) * TIMEOUT_STEPS == pytest.approx(expected)
    state = small_state()
    prim = PhysicalPrimitive.parse("pickplace(bowl, coffee_table)")
    profile = AgentProfile(name="robot", success={"pickplace": p}, durations={"pickplace": d})
    rng = np.random.default_rng(77)
    draws = [rollout_primitive(state, prim, profile, rng).duration for _ in range(10_000)]
    assert abs(np.mean(draws) - expected) < 0.5


def test_rollout_failure_frequency_within_3_sigma():
    state = small_state()
    prim = PhysicalPrimitive.parse("pickplace(bowl, coffee_table)")
    n = 10_000
    for p in (0.2, 0.5, 0.9):
        profile = AgentProfile(name="robot", success={"pickplace": p})
        rng = np.random.default_rng(int(p * 1000))
        failures = sum(
            not rollout_primitive(state, prim, profile, rng).succeeded for _ in range(n)
        )
        sigma = math.sqrt(p * (1 - p) / n)
        assert abs(failures / n - (1 - p)) < 3 * sigma


def test_rollout_streams_are_bit_identical_for_same_seed():
    state = small_state()
    prim = PhysicalPrimitive.parse("pickplace(bowl, coffee_table)")
    profile = AgentProfile(name="robot", success={"pickplace": 0.5}, durations={"pickplace": (9, 2)})

    def stream(seed):
        rng = np.random.default_rng(seed)
        return [
            (o.succeeded, o.duration, o.terminal_failure)
            for o in (rollout_primitive(state, prim, profile, rng) for _ in range(200))
        ]

    assert stream(42) == stream(42)
    assert stream(42) != stream(43)


def test_travel_distance_examples():
    world = GridWorld(
        width=10, height=10, furniture={"table": ((3, 4),)}, meters_per_cell=1.0
    )
    state = SymbolicState(
        object_locations={},
        agent_poses={"human": (0, 0), "robot": (3, 3)},
        furniture_names=frozenset({"table"}),
    )
    assert travel_distance(world, state, "human", "table") == pytest.approx(5.0)
    assert travel_distance(world, state, "robot", "table") == pytest.approx(1.0)
    with pytest.raises(UnknownEntity):
        travel_distance(world, state, "human", "nowhere")


def test_travel_distance_matches_brute_force_oracle(rng):
    # oracle: min over every footprint cell of the scaled hypotenuse
    for _ in range(50):
        cells = {(int(rng.integers(0, 12)), int(rng.integers(0, 12))) for _ in range(5)}
        scale = float(rng.uniform(0.2, 2.0))
        world = GridWorld(width=12, height=12, furniture={"f": tuple(cells)}, meters_per_cell=scale)
        pose = (int(rng.integers(0, 12)), int(rng.integers(0, 12)))
        state = SymbolicState(
            object_locations={}, agent_poses={"a": pose}, furniture_names=frozenset({"f"})
        )
        oracle = min(
            math.sqrt((pose[0] - x) ** 2 + (pose[1] - y) ** 2) * scale for x, y in cells
        )
        assert travel_distance(world, state, "a", "f") == pytest.approx(oracle)


def test_gridworld_validation():
    with pytest.raises(ValueError):
        GridWorld(width=4, height=4, furniture={"a": ((5, 5),)})
    with pytest.raises(ValueError):
        GridWorld(width=4, height=4, furniture={"a": ((1, 1),), "b": ((1, 1),)})


def test_state_key_ignores_poses_but_not_flags():
    a = small_state()
    b = a.with_pose("robot", (9, 9))
    c = a.with_flags("package", add=frozenset({"open"}), clear=frozenset({"closed"}))
    assert state_key(a) == state_key(b)
    assert state_key(a) != state_key(c)


def test_mutex_flags_rejected():
    with pytest.raises(ValueError):
        SymbolicState(
            object_locations={"x": "kitchen"},
            object_flags={"x": frozenset({"open", "closed"})},
            furniture_names=frozenset({"kitchen"}),
        )


def test_blocked_cells_are_not_walkable():
    world = GridWorld(
        width=4, height=4, furniture={"a": ((0, 0),)}, blocked=frozenset({(2, 2)})
    )
    assert world.walkable((1, 1))
    assert not world.walkable((2, 2))
    assert not world.walkable((9, 9))
    with pytest.raises(ValueError):
        GridWorld(width=4, height=4, furniture={}, blocked=frozenset({(9, 9)}))
