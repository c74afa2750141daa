"""Scenario definitions: plans, hierarchies, capability/duration profiles, layouts.

Scenario documents are a line-oriented text format with bracketed sections;
see docs/scenario-format.md for the grammar. Three household tasks ship as
package data and are returned by :func:`builtin_scenarios`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping

from .errors import ParseError, ValidationError
from .world import (
    AgentProfile,
    GridWorld,
    PhysicalPrimitive,
    SymbolicState,
    apply_effect,
)

ROBOT = "robot"
HUMAN = "human"

SECTIONS = ("world", "objects", "plan", "hierarchy", "capabilities", "durations")


@dataclass(frozen=True)
class PlanSpec:
    """Ordered low-level steps grouped into labeled abstract steps."""

    steps: tuple[PhysicalPrimitive, ...]
    abstract_steps: tuple[tuple[str, tuple[int, int]], ...]  # (label, [start, end))
    robot_capability: Mapping[int, float]

    def __post_init__(self):
        t = len(self.steps)
        if t < 1:
            raise ValidationError("plan must have at least one step")
        cursor = 0
        for label, (start, end) in self.abstract_steps:
            if start != cursor:
                raise ValidationError(
                    f"hierarchy: index {cursor} unassigned (next range starts at {start})"
                )
            if end <= start:
                raise ValidationError(f"hierarchy: empty range for {label!r}")
            cursor = end
        if cursor != t:
            raise ValidationError(f"hierarchy: index {cursor} unassigned (plan length {t})")
        for idx in range(t):
            if idx not in self.robot_capability:
                raise ValidationError(f"capabilities: step {idx} has no entry")
            p = self.robot_capability[idx]
            if not (0.0 <= p <= 1.0):
                raise ValidationError(f"capabilities: step {idx} probability {p} outside [0,1]")

    def __len__(self) -> int:
        return len(self.steps)

    def bundle_of(self, step: int) -> tuple[str, tuple[int, int]]:
        for label, (start, end) in self.abstract_steps:
            if start <= step < end:
                return label, (start, end)
        raise ValidationError(f"step {step} outside plan")

    def bundle_steps(self, step: int) -> tuple[int, ...]:
        _, (start, end) = self.bundle_of(step)
        return tuple(range(start, end))

    def infeasible_steps(self) -> frozenset[int]:
        return frozenset(i for i, p in self.robot_capability.items() if p == 0.0)


@dataclass(frozen=True)
class TaskScenario:
    name: str
    world: GridWorld
    initial_state: SymbolicState
    plan: PlanSpec
    robot_profile: AgentProfile
    human_durations: Mapping[str, float]  # stationary seconds by context key
    source_text: str = field(default="", compare=False)

    def human_stationary_seconds(self, prim: PhysicalPrimitive) -> float | None:
        key = str(prim)
        if key in self.human_durations:
            return float(self.human_durations[key])
        if prim.kind in self.human_durations:
            return float(self.human_durations[prim.kind])
        return None


def _parse_cell(token: str, lineno: int) -> tuple[int, int]:
    token = token.strip()
    if not (token.startswith("(") and token.endswith(")")):
        raise ParseError(f"expected (x,y) cell, got {token!r}", lineno)
    try:
        x, y = (int(v) for v in token[1:-1].split(","))
    except Exception:
        raise ParseError(f"bad cell {token!r}", lineno) from None
    return (x, y)


def _split_sections(text: str) -> dict[str, list[tuple[int, str]]]:
    sections: dict[str, list[tuple[int, str]]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in SECTIONS:
                raise ParseError(f"unknown section [{current}]", lineno)
            sections.setdefault(current, [])
            continue
        if current is None:
            raise ParseError(f"content before first section: {line!r}", lineno)
        sections[current].append((lineno, line.strip()))
    missing = [s for s in SECTIONS if s not in sections]
    if missing:
        raise ParseError(f"missing sections: {', '.join(missing)}")
    return sections


def load_scenario(text: str, name: str = "scenario") -> TaskScenario:
    """Parse and fully validate a scenario document."""
    sections = _split_sections(text)

    # [world]
    width = height = None
    meters_per_cell = 1.0
    seed = 0
    furniture: dict[str, tuple[tuple[int, int], ...]] = {}
    poses: dict[str, tuple[int, int] | str] = {}
    scenario_name = name
    for lineno, line in sections["world"]:
        if line.startswith("furniture "):
            head, _, cells = line[len("furniture "):].partition("=")
            fname = head.strip()
            if fname in furniture:
                raise ValidationError(f"duplicate furniture {fname!r}")
            furniture[fname] = tuple(
                _parse_cell(tok + ")", lineno) for tok in cells.split(")") if tok.strip()
            )
        elif "@" in line and "=" not in line:
            agent, _, where = line.partition("@")
            where = where.strip()
            poses[agent.strip()] = (
                _parse_cell(where, lineno) if where.startswith("(") else where
            )
        else:
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "size":
                try:
                    width, height = (int(v) for v in value.split("x"))
                except Exception:
                    raise ParseError(f"bad size {value!r}", lineno) from None
            elif key == "meters_per_cell":
                meters_per_cell = float(value)
            elif key == "seed":
                seed = int(value)
            elif key == "name":
                scenario_name = value
            else:
                raise ParseError(f"unknown world key {key!r}", lineno)
    if width is None or height is None:
        raise ParseError("world section is missing `size`")
    world = GridWorld(
        width=width,
        height=height,
        furniture=furniture,
        meters_per_cell=meters_per_cell,
        seed=seed,
    )

    # [objects]
    locations: dict[str, str] = {}
    flags: dict[str, frozenset[str]] = {}
    for lineno, line in sections["objects"]:
        head, _, flagpart = line.partition("flags:")
        if "@" not in head:
            raise ParseError(f"object line needs `name @ holder`: {line!r}", lineno)
        obj, _, holder = head.partition("@")
        obj, holder = obj.strip(), holder.strip()
        if obj in locations:
            raise ValidationError(f"object {obj!r} declared twice")
        locations[obj] = holder
        if flagpart.strip():
            flags[obj] = frozenset(flagpart.split())
    for obj, holder in locations.items():
        if holder not in furniture and holder not in locations and holder not in poses:
            raise ValidationError(f"object {obj!r} placed on unknown holder {holder!r}")

    agent_poses: dict[str, tuple[int, int]] = {}
    for agent, where in poses.items():
        if isinstance(where, str):
            if where not in furniture:
                raise ValidationError(f"agent {agent!r} anchored to unknown furniture {where!r}")
            agent_poses[agent] = furniture[where][0]
        else:
            agent_poses[agent] = where
    if HUMAN not in agent_poses or ROBOT not in agent_poses:
        raise ValidationError("world must place both `human` and `robot`")

    initial_state = SymbolicState(
        object_locations=locations,
        object_flags=flags,
        agent_poses=agent_poses,
        furniture_names=frozenset(furniture),
    )

    # [plan]
    steps: list[PhysicalPrimitive] = []
    for lineno, line in sections["plan"]:
        try:
            prim = PhysicalPrimitive.parse(line)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        for param in prim.params:
            if not initial_state.is_entity(param):
                raise ValidationError(
                    f"plan step {len(steps)}: param {param!r} not in initial state"
                )
        steps.append(prim)

    # [hierarchy]
    abstract: list[tuple[str, tuple[int, int]]] = []
    for lineno, line in sections["hierarchy"]:
        label, sep, span = line.rpartition(":")
        if not sep:
            raise ParseError(f"hierarchy line needs `label : start..end`: {line!r}", lineno)
        try:
            start, end = (int(v) for v in span.strip().split(".."))
        except Exception:
            raise ParseError(f"bad range {span.strip()!r}", lineno) from None
        abstract.append((label.strip(), (start, end)))

    # [capabilities]
    capability: dict[int, float] = {}
    terminal: dict[int, float] = {}
    default_capability: float | None = None
    for lineno, line in sections["capabilities"]:
        key, _, value = line.partition("=")
        parts = key.split()
        if len(parts) == 3 and parts[0] == ROBOT and parts[1] == "terminal":
            terminal[int(parts[2])] = float(value)
            continue
        if len(parts) != 2 or parts[0] != ROBOT:
            raise ParseError(
                f"capability line needs `robot <step|default|terminal N> = p`: {line!r}",
                lineno,
            )
        if parts[1] == "default":
            default_capability = float(value)
        else:
            capability[int(parts[1])] = float(value)
    if default_capability is not None:
        for idx in range(len(steps)):
            capability.setdefault(idx, default_capability)

    plan = PlanSpec(
        steps=tuple(steps),
        abstract_steps=tuple(abstract),
        robot_capability=capability,
    )

    # [durations]
    robot_durations: dict[str, float] = {}
    human_durations: dict[str, float] = {}
    for lineno, line in sections["durations"]:
        key, _, value = line.partition("=")
        agent, _, context = key.strip().partition(" ")
        context = context.strip()
        if agent == ROBOT:
            robot_durations[context] = float(value)
        elif agent == HUMAN:
            human_durations[context] = float(value)
        else:
            raise ParseError(f"unknown agent {agent!r} in durations", lineno)

    # profile tables key by primitive string, so two identical plan steps
    # cannot carry different probabilities
    success: dict[str, float] = {}
    for i, prim in enumerate(steps):
        key = str(prim)
        if key in success and success[key] != capability[i]:
            raise ValidationError(
                f"step {i}: {key} repeats with a different capability"
            )
        success[key] = capability[i]
    terminal_failure = {f"{steps[i]}": p for i, p in terminal.items()}
    robot_profile = AgentProfile(
        name=ROBOT,
        success=success,
        durations=robot_durations,
        terminal_failure=terminal_failure,
    )

    scenario = TaskScenario(
        name=scenario_name,
        world=world,
        initial_state=initial_state,
        plan=plan,
        robot_profile=robot_profile,
        human_durations=human_durations,
        source_text=text,
    )
    _check_executable(scenario)
    return scenario


def _check_executable(scenario: TaskScenario) -> None:
    """Every built-in plan must run start-to-finish under the effect model."""
    state = scenario.initial_state
    for idx, prim in enumerate(scenario.plan.steps):
        try:
            state = apply_effect(state, prim)
        except Exception as exc:
            raise ValidationError(f"plan step {idx} ({prim}) cannot execute: {exc}") from exc


def serialize_scenario(scenario: TaskScenario) -> str:
    """Render a scenario back to document text; load(serialize(s)) == s."""
    w = scenario.world
    lines = ["[world]", f"name = {scenario.name}", f"size = {w.width} x {w.height}"]
    lines.append(f"meters_per_cell = {w.meters_per_cell}")
    lines.append(f"seed = {w.seed}")
    for fname, cells in w.furniture.items():
        cellstr = " ".join(f"({x},{y})" for x, y in cells)
        lines.append(f"furniture {fname} = {cellstr}")
    for agent, (x, y) in scenario.initial_state.agent_poses.items():
        lines.append(f"{agent} @ ({x},{y})")
    lines.append("")
    lines.append("[objects]")
    for obj, holder in scenario.initial_state.object_locations.items():
        flags = scenario.initial_state.flags(obj)
        suffix = f" flags: {' '.join(sorted(flags))}" if flags else ""
        lines.append(f"{obj} @ {holder}{suffix}")
    lines.append("")
    lines.append("[plan]")
    lines.extend(str(p) for p in scenario.plan.steps)
    lines.append("")
    lines.append("[hierarchy]")
    for label, (start, end) in scenario.plan.abstract_steps:
        lines.append(f"{label} : {start}..{end}")
    lines.append("")
    lines.append("[capabilities]")
    for idx in range(len(scenario.plan)):
        lines.append(f"robot {idx} = {scenario.plan.robot_capability[idx]}")
    for idx, prim in enumerate(scenario.plan.steps):
        tf = scenario.robot_profile.terminal_failure.get(str(prim))
        if tf:
            lines.append(f"robot terminal {idx} = {tf}")
    lines.append("")
    lines.append("[durations]")
    for ctx, val in scenario.robot_profile.durations.items():
        lines.append(f"robot {ctx} = {val}")
    for ctx, val in scenario.human_durations.items():
        lines.append(f"human {ctx} = {val}")
    return "\n".join(lines) + "\n"


_BUILTIN_FILES = {
    "pour_package": "pour_package.scenario",
    "toy_car": "toy_car.scenario",
    "gift_box": "gift_box.scenario",
}


def builtin_scenario(name: str) -> TaskScenario:
    if name not in _BUILTIN_FILES:
        raise ValidationError(
            f"unknown scenario {name!r}; built-ins: {', '.join(_BUILTIN_FILES)}"
        )
    text = (
        resources.files("mixtask.data").joinpath(_BUILTIN_FILES[name]).read_text()
    )
    return load_scenario(text, name=name)


def builtin_scenarios() -> list[TaskScenario]:
    """The three bundled household tasks, in canonical order."""
    return [builtin_scenario(name) for name in _BUILTIN_FILES]
