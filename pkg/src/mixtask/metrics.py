"""Trial metrics, all derived from the logged event stream."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import MalformedLog
from .logs import TrialLog

REQUEST_ACTS = ("ask_help", "propose_split", "inform_limitation")
NEGOTIATION_ACTS = ("propose_split", "inform_limitation")
RESPONSE_ACTS = ("accept", "reject", "conditional_accept")
ACCEPTING_ACTS = ("accept", "conditional_accept")


@dataclass(frozen=True)
class Metrics:
    full_success: bool
    steps_completed_fraction: float
    human_steps_fraction: float
    human_effort_seconds: float
    help_requests: int
    initial_acceptance_rate: float | None
    post_negotiation_acceptance_rate: float | None
    robot_dialog_count: int
    human_dialog_count: int
    initiative_shifts: int

    def __post_init__(self):
        for name in ("steps_completed_fraction", "human_steps_fraction"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise MalformedLog(f"{name} {v} outside [0, 1]")
        if self.initiative_shifts > self.robot_dialog_count + self.human_dialog_count:
            raise MalformedLog("more initiative shifts than dialog events")

    def to_dict(self) -> dict:
        return {
            "full_success": self.full_success,
            "steps_completed_fraction": self.steps_completed_fraction,
            "human_steps_fraction": self.human_steps_fraction,
            "human_effort_seconds": self.human_effort_seconds,
            "help_requests": self.help_requests,
            "initial_acceptance_rate": self.initial_acceptance_rate,
            "post_negotiation_acceptance_rate": self.post_negotiation_acceptance_rate,
            "robot_dialog_count": self.robot_dialog_count,
            "human_dialog_count": self.human_dialog_count,
            "initiative_shifts": self.initiative_shifts,
        }


@dataclass
class _RequestChain:
    refs: set[int]
    first_response: str | None = None
    negotiated: bool = False
    accepted: bool = False


def _chains(verbal_events) -> list[_RequestChain]:
    """Group robot requests into negotiation chains by step-reference overlap.

    A chain opens at a robot request over fresh steps, absorbs follow-up
    negotiation acts over overlapping steps, and records the first human
    response plus whether any response eventually accepted.
    """
    chains: list[_RequestChain] = []
    current: _RequestChain | None = None
    for rec in verbal_events:
        act = rec.payload.get("act")
        refs = set(rec.payload.get("refs") or [])
        if rec.actor == "R" and act in REQUEST_ACTS:
            if current is not None and refs & current.refs and not current.accepted:
                current.refs |= refs
                if act in NEGOTIATION_ACTS:
                    current.negotiated = True
            else:
                current = _RequestChain(refs=refs or set())
                chains.append(current)
                if act in NEGOTIATION_ACTS:
                    current.negotiated = True
        elif rec.actor == "H" and act in RESPONSE_ACTS and current is not None:
            if current.first_response is None:
                current.first_response = act
            if act in ACCEPTING_ACTS:
                current.accepted = True
    return chains


def compute_metrics(log: TrialLog, plan_length: int) -> Metrics:
    log.validate()
    if plan_length < 1:
        raise MalformedLog("plan length must be positive")

    completed: set[int] = set()
    human_steps: set[int] = set()
    effort = 0.0
    for rec in log.records:
        if rec.kind != "physical":
            continue
        step = rec.payload["step"]
        if rec.actor == "H":
            completed.add(step)
            human_steps.add(step)
            effort += float(rec.payload.get("duration_seconds", 0.0))
        elif rec.payload.get("succeeded"):
            completed.add(step)

    verbal = log.verbal_events()
    robot_dialog = sum(1 for r in verbal if r.actor == "R")
    human_dialog = sum(1 for r in verbal if r.actor == "H")
    shifts = sum(
        1 for a, b in zip(verbal, verbal[1:]) if a.actor != b.actor
    )
    help_requests = sum(
        1 for r in verbal if r.actor == "R" and r.payload.get("act") == "ask_help"
    )

    chains = _chains(verbal)
    responded = [c for c in chains if c.first_response is not None]
    initial = (
        sum(1 for c in responded if c.first_response in ACCEPTING_ACTS) / len(responded)
        if responded
        else None
    )
    negotiated = [c for c in chains if c.negotiated]
    post = (
        sum(1 for c in negotiated if c.accepted) / len(negotiated) if negotiated else None
    )

    return Metrics(
        full_success=log.termination_reason() == "complete",
        steps_completed_fraction=len(completed) / plan_length,
        human_steps_fraction=len(human_steps) / plan_length,
        human_effort_seconds=effort,
        help_requests=help_requests,
        initial_acceptance_rate=initial,
        post_negotiation_acceptance_rate=post,
        robot_dialog_count=robot_dialog,
        human_dialog_count=human_dialog,
        initiative_shifts=shifts,
    )
