"""Strategy layer: turns classified dialog into constraint deltas and an
action-selection policy, with bounded fault recovery around an optional
external program source.

A StrategyProgram is a declarative stand-in for generated planning code:
constraint additions/removals plus one of three policies (proceed,
negotiate_first with a specified verbal act, or wait). It has a canonical
text serialization so programs are auditable in trial logs and so an adapter
can emit them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .allocation import HUMAN, ROBOT, Constraint
from .dialog import DialogAct, DialogEvent, PHelpEstimate, fresh_estimate
from .errors import InvalidProgram, PlanExhausted
from .scenarios import PlanSpec
from .world import PhysicalPrimitive


class Policy(str, Enum):
    PROCEED = "proceed"
    NEGOTIATE_FIRST = "negotiate_first"
    WAIT = "wait"


@dataclass(frozen=True)
class VerbalSpec:
    act: DialogAct
    step_refs: tuple[int, ...]
    split_at: int | None = None


@dataclass(frozen=True)
class RemoveSelector:
    """Matches existing constraints for removal; agent None matches either."""

    kind: str
    steps: tuple[int, ...]
    agent: str | None = None

    def matches(self, c: Constraint) -> bool:
        if c.kind != self.kind:
            return False
        if self.agent is not None and c.agent != self.agent:
            return False
        return bool(set(c.steps) & set(self.steps))


@dataclass(frozen=True)
class StrategyProgram:
    adds: tuple[Constraint, ...] = ()
    removes: tuple[RemoveSelector, ...] = ()
    policy: Policy = Policy.PROCEED
    verbal: VerbalSpec | None = None

    def serialize(self) -> str:
        parts = []
        for sel in self.removes:
            agent = sel.agent or "*"
            parts.append(f"remove {sel.kind} {_span(sel.steps)} {agent}")
        for c in self.adds:
            if c.kind == "split":
                parts.append(f"add split {_span(c.steps)} at {c.boundary}")
            else:
                parts.append(f"add {c.kind} {_span(c.steps)} {c.agent}")
        if self.policy is Policy.NEGOTIATE_FIRST and self.verbal is not None:
            v = self.verbal
            extra = f" at {v.split_at}" if v.split_at is not None else ""
            parts.append(f"policy negotiate_first {v.act.value} {_span(v.step_refs)}{extra}")
        else:
            parts.append(f"policy {self.policy.value}")
        return "; ".join(parts)

    @classmethod
    def parse(cls, text: str) -> "StrategyProgram":
        adds: list[Constraint] = []
        removes: list[RemoveSelector] = []
        policy = Policy.PROCEED
        verbal = None
        for chunk in [c.strip() for c in text.split(";") if c.strip()]:
            words = chunk.split()
            try:
                if words[0] == "add" and words[1] in ("assign", "forbid"):
                    adds.append(
                        Constraint(kind=words[1], steps=_parse_span(words[2]), agent=words[3])
                    )
                elif words[0] == "add" and words[1] == "split":
                    adds.append(
                        Constraint(
                            kind="split",
                            steps=_parse_span(words[2]),
                            boundary=int(words[4]),
                        )
                    )
                elif words[0] == "remove":
                    agent = None if words[3] == "*" else words[3]
                    removes.append(
                        RemoveSelector(kind=words[1], steps=_parse_span(words[2]), agent=agent)
                    )
                elif words[0] == "policy" and words[1] == "negotiate_first":
                    act = DialogAct(words[2])
                    split_at = int(words[5]) if len(words) > 5 and words[4] == "at" else None
                    verbal = VerbalSpec(act=act, step_refs=_parse_span(words[3]), split_at=split_at)
                    policy = Policy.NEGOTIATE_FIRST
                elif words[0] == "policy":
                    policy = Policy(words[1])
                else:
                    raise ValueError(chunk)
            except (IndexError, ValueError, KeyError) as exc:
                raise InvalidProgram(f"cannot parse program chunk {chunk!r}") from exc
        return cls(adds=tuple(adds), removes=tuple(removes), policy=policy, verbal=verbal)


def _span(steps) -> str:
    steps = sorted(steps)
    return f"{steps[0]}..{steps[-1]}" if steps else "-"


def _parse_span(text: str) -> tuple[int, ...]:
    lo, _, hi = text.partition("..")
    return tuple(range(int(lo), int(hi) + 1))


def validate_program(program: StrategyProgram, plan: PlanSpec) -> StrategyProgram:
    """Structural validation: every referenced step must exist in the plan."""
    t = len(plan)
    for c in program.adds:
        if any(not (0 <= s < t) for s in c.steps):
            raise InvalidProgram(f"constraint references steps outside plan: {c}")
    if program.policy is Policy.NEGOTIATE_FIRST:
        if program.verbal is None:
            raise InvalidProgram("negotiate_first needs a verbal act")
        if any(not (0 <= s < t) for s in program.verbal.step_refs):
            raise InvalidProgram("verbal act references steps outside plan")
    return program


@dataclass
class PendingRequest:
    act: DialogAct
    step_refs: tuple[int, ...]
    turn_id: int
    negotiated: bool = False
    accepted: bool = False
    split_at: int | None = None


@dataclass
class PlannerState:
    """Mutable per-trial planning state owned by the session."""

    plan: PlanSpec
    completed: set[int] = field(default_factory=set)
    constraints: list[Constraint] = field(default_factory=list)
    estimate: PHelpEstimate = field(default_factory=fresh_estimate)
    pending: PendingRequest | None = None
    consecutive_infeasible_robot: int = 0
    refusals: dict[int, int] = field(default_factory=dict)
    turn_counter: int = 0

    @property
    def current_step(self) -> int | None:
        for i in range(len(self.plan)):
            if i not in self.completed:
                return i
        return None

    def incomplete_bundle_steps(self, step: int) -> tuple[int, ...]:
        return tuple(s for s in self.plan.bundle_steps(step) if s not in self.completed)

    def next_turn_id(self) -> int:
        self.turn_counter += 1
        return self.turn_counter


@dataclass(frozen=True)
class RobotDecision:
    kind: str  # "physical" | "verbal" | "wait"
    step: int | None = None
    primitive: PhysicalPrimitive | None = None
    act: DialogAct | None = None
    step_refs: tuple[int, ...] = ()
    split_at: int | None = None


def rule_program(
    events: list[DialogEvent], state: PlannerState, plan: PlanSpec
) -> StrategyProgram:
    """Deterministic rule table mapping classified dialog to a program."""
    adds: list[Constraint] = []
    removes: list[RemoveSelector] = []
    policy = Policy.PROCEED
    verbal: VerbalSpec | None = None

    for ev in events:
        origin = f"turn-{ev.turn_id}"
        if ev.act is DialogAct.CLAIM_STEP:
            adds.append(Constraint(kind="assign", steps=ev.step_refs, agent=HUMAN, origin=origin))
        elif ev.act is DialogAct.DELEGATE_STEP:
            adds.append(Constraint(kind="assign", steps=ev.step_refs, agent=ROBOT, origin=origin))
        elif ev.act is DialogAct.CONDITIONAL_ACCEPT and ev.split_at is not None and ev.step_refs:
            adds.append(
                Constraint(
                    kind="split", steps=ev.step_refs, boundary=ev.split_at, origin=origin
                )
            )
        elif ev.act is DialogAct.REJECT and state.pending is not None:
            refs = state.pending.step_refs
            removes.append(RemoveSelector(kind="assign", steps=refs, agent=None))
            infeasible = [
                s
                for s in refs
                if plan.robot_capability.get(s, 1.0) == 0.0 and s not in state.completed
            ]
            if infeasible:
                bundle = state.incomplete_bundle_steps(min(infeasible))
                prefix = [
                    s
                    for s in bundle
                    if s < min(infeasible) and plan.robot_capability.get(s, 0.0) > 0.0
                ]
                if prefix and not state.pending.negotiated:
                    policy = Policy.NEGOTIATE_FIRST
                    verbal = VerbalSpec(
                        act=DialogAct.PROPOSE_SPLIT,
                        step_refs=tuple(bundle),
                        split_at=max(prefix),
                    )
                else:
                    policy = Policy.NEGOTIATE_FIRST
                    verbal = VerbalSpec(
                        act=DialogAct.INFORM_LIMITATION, step_refs=(min(infeasible),)
                    )
            # a rejected range the robot can cover itself needs no negotiation
    return StrategyProgram(
        adds=tuple(adds), removes=tuple(removes), policy=policy, verbal=verbal
    )


STRATEGY_RETRIES = 2  # additional attempts with full dialog
DROPPED_RETRIES = 2  # attempts after ignoring the newest human dialog


def derive_program(
    events: list[DialogEvent],
    state: PlannerState,
    plan: PlanSpec,
    adapter=None,
) -> StrategyProgram:
    """Program for this turn; adapter output is validated with bounded retries.

    Schedule on invalid adapter output: 1 + 2 retries with full dialog, then 2
    more with the most recent human dialog dropped, then the rule table, which
    never fails.
    """
    if adapter is None or not adapter.enabled("strategy"):
        return rule_program(events, state, plan)

    def attempt(evs) -> StrategyProgram | None:
        payload = {
            "events": [
                {"act": e.act.value, "steps": list(e.step_refs), "text": e.surface_text}
                for e in evs
            ],
            "completed": sorted(state.completed),
            "plan_len": len(plan),
        }
        response = adapter.call("strategy", payload)
        if not isinstance(response, str):
            return None
        try:
            return validate_program(StrategyProgram.parse(response), plan)
        except InvalidProgram:
            return None

    for _ in range(1 + STRATEGY_RETRIES):
        program = attempt(events)
        if program is not None:
            return program
    trimmed = events[:-1] if events else events
    for _ in range(DROPPED_RETRIES):
        program = attempt(trimmed)
        if program is not None:
            return program
    return rule_program(events, state, plan)


def recover(attempt_history: list[StrategyProgram | None], events, state, plan):
    """Final fallback once the retry schedule is exhausted: the rule table."""
    for program in attempt_history:
        if program is not None:
            return program
    return rule_program(events, state, plan)


def select_next_action(
    state: PlannerState,
    allocation,
    plan: PlanSpec,
    program: StrategyProgram,
    low_level_asks: bool = False,
    suppress_robot_verbal: bool = False,
) -> RobotDecision:
    """Next robot action under the program policy and current allocation."""
    current = state.current_step
    if current is None:
        raise PlanExhausted("all plan steps are complete")

    if program.policy is Policy.WAIT:
        return RobotDecision(kind="wait")
    if program.policy is Policy.NEGOTIATE_FIRST and program.verbal is not None:
        if suppress_robot_verbal:
            return RobotDecision(kind="wait")
        v = program.verbal
        return RobotDecision(
            kind="verbal", act=v.act, step_refs=v.step_refs, split_at=v.split_at
        )

    if allocation[current] == ROBOT:
        return RobotDecision(kind="physical", step=current, primitive=plan.steps[current])

    if suppress_robot_verbal:
        return RobotDecision(kind="wait")

    bundle = state.incomplete_bundle_steps(current)
    if low_level_asks or any(allocation.get(s) != HUMAN for s in bundle):
        refs: tuple[int, ...] = (current,)
    else:
        refs = bundle
    return RobotDecision(kind="verbal", act=DialogAct.ASK_HELP, step_refs=refs)
