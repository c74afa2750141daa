"""Gridworld, symbolic state, physical primitives, and the forward effect model.

The world is deliberately coarse: furniture occupies footprint cells on a
grid, objects live on furniture / inside container objects / in an agent's
hand, and each primitive has a declarative symbolic effect (location moves
plus flag deltas). Execution is stochastic only in duration and success;
effects themselves are deterministic.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import PreconditionViolated, UnknownEntity

# Timeout constant L: low-level timesteps charged to a failed execution.
# Dominates every success duration in the bundled scenarios.
TIMEOUT_STEPS = 60

# kind -> parameter arity
PRIMITIVE_ARITY = {
    "pickplace": 2,
    "pick_open_place": 3,
    "pick_pour_place": 3,
    "put_on": 3,
    "switch": 2,
    "fold": 1,
    "cover": 2,
    "wrap": 2,
    "cut_put": 3,
}

# Flag pairs that may never co-occur on one object.
MUTEX_FLAGS = (("open", "closed"),)


@dataclass(frozen=True)
class PhysicalPrimitive:
    """A parameterized manipulation skill, e.g. pickplace(bowl, coffee_table)."""

    kind: str
    params: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in PRIMITIVE_ARITY:
            raise ValueError(f"unknown primitive kind: {self.kind!r}")
        arity = PRIMITIVE_ARITY[self.kind]
        if len(self.params) != arity:
            raise ValueError(
                f"{self.kind} takes {arity} params, got {len(self.params)}"
            )

    def __str__(self) -> str:
        return f"{self.kind}({', '.join(self.params)})"

    @classmethod
    def parse(cls, text: str) -> "PhysicalPrimitive":
        text = text.strip()
        if not text.endswith(")") or "(" not in text:
            raise ValueError(f"not a primitive string: {text!r}")
        kind, rest = text.split("(", 1)
        params = tuple(p.strip() for p in rest[:-1].split(",") if p.strip())
        return cls(kind.strip(), params)


@dataclass(frozen=True)
class GridWorld:
    """Static layout: grid extent, furniture footprints, walkability, scale."""

    width: int
    height: int
    furniture: Mapping[str, tuple[tuple[int, int], ...]]
    meters_per_cell: float = 1.0
    seed: int = 0
    blocked: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        seen: set[tuple[int, int]] = set()
        for name, cells in self.furniture.items():
            if not cells:
                raise ValueError(f"furniture {name!r} has an empty footprint")
            for c in cells:
                if not (0 <= c[0] < self.width and 0 <= c[1] < self.height):
                    raise ValueError(f"furniture {name!r} cell {c} out of bounds")
                if c in seen:
                    raise ValueError(f"furniture footprints overlap at {c}")
                seen.add(c)
        for c in self.blocked:
            if not (0 <= c[0] < self.width and 0 <= c[1] < self.height):
                raise ValueError(f"blocked cell {c} out of bounds")

    def walkable(self, cell: tuple[int, int]) -> bool:
        in_bounds = 0 <= cell[0] < self.width and 0 <= cell[1] < self.height
        return in_bounds and cell not in self.blocked


@dataclass(frozen=True)
class SymbolicState:
    """Locations, flags, and agent poses; the s over which costs are defined.

    ``object_locations`` maps each object to exactly one holder: a furniture
    name, a container object name, or an agent name (held). ``furniture_names``
    carries the world's furniture inventory so target resolution does not need
    the GridWorld itself.
    """

    object_locations: Mapping[str, str]
    object_flags: Mapping[str, frozenset[str]] = field(default_factory=dict)
    agent_poses: Mapping[str, tuple[int, int]] = field(default_factory=dict)
    furniture_names: frozenset[str] = frozenset()

    def __post_init__(self):
        for obj, flags in self.object_flags.items():
            if obj not in self.object_locations:
                raise ValueError(f"flags for unknown object {obj!r}")
            for a, b in MUTEX_FLAGS:
                if a in flags and b in flags:
                    raise ValueError(f"{obj!r} carries mutually exclusive flags {a}/{b}")

    def flags(self, obj: str) -> frozenset[str]:
        return self.object_flags.get(obj, frozenset())

    def location_of(self, obj: str) -> str:
        try:
            return self.object_locations[obj]
        except KeyError:
            raise UnknownEntity(f"unknown object {obj!r}") from None

    def is_entity(self, name: str) -> bool:
        return (
            name in self.object_locations
            or name in self.furniture_names
            or name in self.agent_poses
        )

    def with_location(self, obj: str, dest: str) -> "SymbolicState":
        locs = dict(self.object_locations)
        locs[obj] = dest
        return replace(self, object_locations=locs)

    def with_flags(
        self, obj: str, add: frozenset[str] = frozenset(), clear: frozenset[str] = frozenset()
    ) -> "SymbolicState":
        flags = dict(self.object_flags)
        flags[obj] = (self.flags(obj) - clear) | add
        return replace(self, object_flags=flags)

    def with_pose(self, agent: str, cell: tuple[int, int]) -> "SymbolicState":
        poses = dict(self.agent_poses)
        poses[agent] = cell
        return replace(self, agent_poses=poses)


@dataclass(frozen=True)
class PrimitiveOutcome:
    """Result of one stochastic primitive execution."""

    succeeded: bool
    duration: int
    terminal_failure: bool = False

    def __post_init__(self):
        if self.duration < 1 or self.duration > TIMEOUT_STEPS:
            raise ValueError(f"duration {self.duration} outside [1, {TIMEOUT_STEPS}]")
        if self.succeeded and self.terminal_failure:
            raise ValueError("a successful outcome cannot be a terminal failure")


# --- declarative effect table -------------------------------------------------
#
# Each rule names, by parameter position: which objects must resolve as
# objects, which flags must already hold, which flags get added/cleared, and
# which object moves where. `dest` is a parameter position whose value may be
# furniture, container object, or agent.


@dataclass(frozen=True)
class EffectRule:
    object_params: tuple[int, ...]
    dest_params: tuple[int, ...] = ()
    requires_flags: tuple[tuple[int, str], ...] = ()
    adds_flags: tuple[tuple[int, str], ...] = ()
    clears_flags: tuple[tuple[int, str], ...] = ()
    moves: tuple[tuple[int, int], ...] = ()  # (object param, dest param)


EFFECT_TABLE: dict[str, EffectRule] = {
    "pickplace": EffectRule(object_params=(0,), dest_params=(1,), moves=((0, 1),)),
    "pick_open_place": EffectRule(
        object_params=(0, 1),
        dest_params=(2,),
        adds_flags=((1, "open"),),
        clears_flags=((1, "closed"),),
        moves=((0, 2), (1, 2)),
    ),
    "pick_pour_place": EffectRule(
        object_params=(0, 1),
        dest_params=(2,),
        requires_flags=((0, "open"),),
        moves=((0, 2),),
    ),
    "put_on": EffectRule(
        object_params=(0, 1, 2),
        adds_flags=((0, "assembled-on:{1}"),),
        moves=((0, 1),),
    ),
    "switch": EffectRule(
        object_params=(0, 1),
        adds_flags=((0, "assembled-on:{1}"),),
        moves=((0, 1),),
    ),
    "fold": EffectRule(object_params=(0,), adds_flags=((0, "folded"),)),
    "cover": EffectRule(
        object_params=(0, 1), adds_flags=((1, "covered"),), moves=((0, 1),)
    ),
    "wrap": EffectRule(
        object_params=(0, 1), adds_flags=((1, "wrapped"),), moves=((0, 1),)
    ),
    "cut_put": EffectRule(object_params=(0, 1), dest_params=(2,), moves=((0, 2),)),
}


def _flag_value(template: str, prim: PhysicalPrimitive) -> str:
    # templates may embed a parameter, e.g. "assembled-on:{1}"
    if "{" in template:
        idx = int(template[template.index("{") + 1 : template.index("}")])
        return template[: template.index("{")] + prim.params[idx]
    return template


def check_preconditions(state: SymbolicState, prim: PhysicalPrimitive, actor: str | None = None) -> None:
    """Raise UnknownEntity / PreconditionViolated if `prim` cannot apply."""
    rule = EFFECT_TABLE[prim.kind]
    for i in rule.object_params:
        name = prim.params[i]
        if name not in state.object_locations:
            raise UnknownEntity(f"{prim}: {name!r} is not an object in this state")
    for i in rule.dest_params:
        name = prim.params[i]
        if not state.is_entity(name):
            raise UnknownEntity(f"{prim}: unknown destination {name!r}")
    for i, flag in rule.requires_flags:
        if flag not in state.flags(prim.params[i]):
            raise PreconditionViolated(
                f"{prim}: {prim.params[i]!r} lacks required flag {flag!r}"
            )
    for i, j in rule.moves:
        moved = prim.params[i]
        holder = state.object_locations[moved]
        if holder in state.agent_poses and holder != actor:
            raise PreconditionViolated(f"{prim}: {moved!r} is held by {holder!r}")
        # placing an object inside itself (directly or through a container
        # chain) would break the one-location-per-object invariant
        dest = prim.params[j]
        seen = set()
        while dest in state.object_locations and dest not in seen:
            if dest == moved:
                raise PreconditionViolated(f"{prim}: {moved!r} cannot contain itself")
            seen.add(dest)
            dest = state.object_locations[dest]
        if dest == moved:
            raise PreconditionViolated(f"{prim}: {moved!r} cannot contain itself")


def apply_effect(
    state: SymbolicState, prim: PhysicalPrimitive, actor: str | None = None
) -> SymbolicState:
    """Successor state under the primitive's declared effect; input unmodified."""
    check_preconditions(state, prim, actor)
    rule = EFFECT_TABLE[prim.kind]
    out = state
    for i, flag in rule.clears_flags:
        out = out.with_flags(prim.params[i], clear=frozenset({_flag_value(flag, prim)}))
    for i, flag in rule.adds_flags:
        value = _flag_value(flag, prim)
        clear = frozenset()
        for a, b in MUTEX_FLAGS:
            if value == a:
                clear = frozenset({b})
            elif value == b:
                clear = frozenset({a})
        out = out.with_flags(prim.params[i], add=frozenset({value}), clear=clear)
    for i, j in rule.moves:
        out = out.with_location(prim.params[i], prim.params[j])
    return out


def state_key(state: SymbolicState) -> str:
    """Canonical digest of the task-symbolic part of a state.

    Agent poses are excluded on purpose: cost tables are keyed by what the
    world looks like, not where the agents happen to stand, so lookups built
    from projected plan states still hit during execution.
    """
    parts = []
    for obj in sorted(state.object_locations):
        flags = ",".join(sorted(state.flags(obj)))
        parts.append(f"{obj}@{state.object_locations[obj]}[{flags}]")
    return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]


# --- stochastic execution -----------------------------------------------------


@dataclass(frozen=True)
class AgentProfile:
    """Per-agent success probabilities and duration models.

    Keys in `success` / `durations` / `terminal_failure` are either a full
    primitive string ("pickplace(bowl, coffee_table)") or a bare kind
    ("pickplace"); the most specific key wins. Durations are constants by
    default; a (mean, sd) tuple draws a truncated rounded normal.
    """

    name: str
    success: Mapping[str, float] = field(default_factory=dict)
    durations: Mapping[str, float | tuple[float, float]] = field(default_factory=dict)
    terminal_failure: Mapping[str, float] = field(default_factory=dict)
    default_success: float = 1.0
    default_duration: float = 10.0
    default_terminal_failure: float = 0.0

    def _lookup(self, table: Mapping, prim: PhysicalPrimitive, default):
        key = str(prim)
        if key in table:
            return table[key]
        return table.get(prim.kind, default)

    def success_prob(self, prim: PhysicalPrimitive) -> float:
        return float(self._lookup(self.success, prim, self.default_success))

    def duration_model(self, prim: PhysicalPrimitive):
        return self._lookup(self.durations, prim, self.default_duration)

    def terminal_failure_prob(self, prim: PhysicalPrimitive) -> float:
        return float(
            self._lookup(self.terminal_failure, prim, self.default_terminal_failure)
        )


def rollout_primitive(
    state: SymbolicState,
    prim: PhysicalPrimitive,
    profile: AgentProfile,
    rng: np.random.Generator,
) -> PrimitiveOutcome:
    """One stochastic execution: Bernoulli success, duration draw, timeout on failure."""
    check_preconditions(state, prim, profile.name)
    p = profile.success_prob(prim)
    succeeded = bool(rng.random() < p)
    if not succeeded:
        tf = profile.terminal_failure_prob(prim)
        terminal = bool(tf > 0.0 and rng.random() < tf)
        return PrimitiveOutcome(succeeded=False, duration=TIMEOUT_STEPS, terminal_failure=terminal)
    model = profile.duration_model(prim)
    if isinstance(model, tuple):
        mean, sd = model
        duration = int(round(rng.normal(mean, sd)))
    else:
        duration = int(round(float(model)))
    duration = max(1, min(TIMEOUT_STEPS, duration))
    return PrimitiveOutcome(succeeded=True, duration=duration)


def travel_distance(
    world: GridWorld, state: SymbolicState, agent: str, target_furniture: str
) -> float:
    """Euclidean meters from the agent's pose to the nearest footprint cell."""
    if agent not in state.agent_poses:
        raise UnknownEntity(f"unknown agent {agent!r}")
    if target_furniture not in world.furniture:
        raise UnknownEntity(f"unknown furniture {target_furniture!r}")
    ax, ay = state.agent_poses[agent]
    best = min(
        math.hypot(ax - cx, ay - cy) for cx, cy in world.furniture[target_furniture]
    )
    return best * world.meters_per_cell
