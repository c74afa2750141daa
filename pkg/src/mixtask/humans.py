"""The human side of the loop: parameterized simulated collaborators, scripted
fixture humans for deterministic traces, and a bridge for a live person.
"""

from __future__ import annotations

import queue
from dataclasses import dataclass

import numpy as np

from .dialog import DialogAct, realize_utterance
from .errors import ParseError, SessionClosed
from .scenarios import PlanSpec
from .world import SymbolicState

DEFAULT_PROACTIVE_RATE = {"positive": 0.1, "negative": 0.02}
CLAIM_SHARE = 0.2  # of proactive utterances, fraction (scaled by p_tilde) that claim a step

# Mood-partitioned phrasing pools. Smalltalk pools deliberately carry
# sentiment-lexicon words so mood feeds back into the help estimate.
ACCEPT_POOL = {
    "positive": ("Ok, I will do that now!", "Sure, I can do that."),
    "negative": ("Fine, I will do that now.", "Alright, I suppose I can do it."),
}
REJECT_POOL = {
    "positive": ("No, sorry, I can't right now.", "No, not at the moment, sorry."),
    "negative": ("No. I'm busy.", "No, I won't be doing that."),
}
SMALLTALK_POOL = {
    "positive": ("Thank you, good job so far!", "Thanks, this is going great!"),
    "negative": ("This is getting annoying.", "Hurry up, this is tedious."),
}


@dataclass(frozen=True)
class SimulatedHumanParams:
    p_tilde: float
    mood: str = "positive"
    proactive_rate: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.p_tilde <= 1.0):
            raise ValueError("p_tilde must be in [0, 1]")
        if self.mood not in ("positive", "negative"):
            raise ValueError("mood must be positive or negative")

    @property
    def rate(self) -> float:
        if self.proactive_rate is not None:
            return self.proactive_rate
        return DEFAULT_PROACTIVE_RATE[self.mood]


@dataclass(frozen=True)
class HumanObservation:
    state: SymbolicState
    current_step: int | None
    completed: frozenset[int]
    robot_text: str | None = None


@dataclass(frozen=True)
class PendingView:
    """The outstanding robot request as the human sees it."""

    act: DialogAct
    step_refs: tuple[int, ...]
    split_at: int | None = None


@dataclass(frozen=True)
class HumanTurn:
    decision: str | None = None  # "accept" | "reject" | None
    perform_steps: tuple[int, ...] = ()
    utterance: str | None = None

    def __post_init__(self):
        if self.decision == "reject" and self.perform_steps:
            raise ValueError("a human never performs a step they just rejected")


def scripted_turn(
    params: SimulatedHumanParams,
    observation: HumanObservation,
    pending: PendingView | None,
    rng: np.random.Generator,
    plan: PlanSpec | None = None,
    committed: frozenset[int] = frozenset(),
) -> HumanTurn:
    """One turn of the parameterized human.

    Pending requests are accepted with probability p_tilde (always, for steps
    the human already committed to in a split agreement); accepted steps are
    performed to completion within the turn. Idle turns produce a proactive
    claim-and-perform or mood-toned smalltalk at the proactive rate.
    """
    mood = params.mood
    if pending is not None:
        steps = tuple(s for s in pending.step_refs if s not in observation.completed)
        if pending.act is DialogAct.PROPOSE_SPLIT:
            if rng.random() < params.p_tilde:
                boundary = pending.split_at if pending.split_at is not None else min(steps)
                human_part = tuple(s for s in steps if s > boundary)
                text = None
                if plan is not None:
                    text = realize_utterance(
                        DialogAct.CONDITIONAL_ACCEPT, steps, plan, split_at=boundary
                    )
                return HumanTurn(decision="accept", utterance=text or "Ok, that works.")
            return HumanTurn(
                decision="reject", utterance=_pick(REJECT_POOL[mood], rng)
            )
        accept = bool(set(steps) & committed) or rng.random() < params.p_tilde
        if accept:
            return HumanTurn(
                decision="accept",
                perform_steps=steps,
                utterance=_pick(ACCEPT_POOL[mood], rng),
            )
        return HumanTurn(decision="reject", utterance=_pick(REJECT_POOL[mood], rng))

    if rng.random() < params.rate:
        current = observation.current_step
        if current is not None and rng.random() < CLAIM_SHARE * params.p_tilde:
            text = None
            if plan is not None:
                text = realize_utterance(DialogAct.CLAIM_STEP, (current,), plan)
            return HumanTurn(
                perform_steps=(current,),
                utterance=text or "I will take care of the next step myself.",
            )
        return HumanTurn(utterance=_pick(SMALLTALK_POOL[mood], rng))
    return HumanTurn()


def _pick(pool: tuple[str, ...], rng: np.random.Generator) -> str:
    return pool[int(rng.integers(0, len(pool)))]


class ParametricHuman:
    """Session-owned wrapper holding the rng stream and split commitments."""

    def __init__(self, params: SimulatedHumanParams, plan: PlanSpec | None = None):
        self.params = params
        self.plan = plan
        self.rng = np.random.default_rng(params.seed)
        self.committed: set[int] = set()

    def turn(self, observation: HumanObservation, pending: PendingView | None) -> HumanTurn:
        result = scripted_turn(
            self.params,
            observation,
            pending,
            self.rng,
            plan=self.plan,
            committed=frozenset(self.committed),
        )
        if (
            pending is not None
            and pending.act is DialogAct.PROPOSE_SPLIT
            and result.decision == "accept"
        ):
            boundary = pending.split_at if pending.split_at is not None else 0
            self.committed.update(s for s in pending.step_refs if s > boundary)
        return result


# --- scripted fixture humans ------------------------------------------------------


@dataclass(frozen=True)
class ScriptDirective:
    kind: str  # accept | reject | silence | say | perform
    text: str = ""
    step: int | None = None


def parse_script(text: str) -> tuple[ScriptDirective, ...]:
    """Script file: one directive per line (accept / reject / silence /
    say "..." / perform N). Blank lines and #-comments ignored."""
    directives = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line in ("accept", "reject", "silence"):
            directives.append(ScriptDirective(kind=line))
        elif line.startswith("say "):
            directives.append(ScriptDirective(kind="say", text=line[4:].strip().strip('"')))
        elif line.startswith("perform "):
            directives.append(ScriptDirective(kind="perform", step=int(line.split()[1])))
        else:
            raise ParseError(f"unknown script directive {line!r}", lineno)
    return tuple(directives)


class FixtureHuman:
    """Replays a directive script verbatim.

    accept/reject directives wait for a pending request (idle turns do not
    consume them); say/perform/silence directives consume on their turn. An
    exhausted script behaves as perpetual silence.
    """

    def __init__(self, script, plan: PlanSpec | None = None):
        if isinstance(script, str):
            script = parse_script(script)
        else:
            script = tuple(
                d if isinstance(d, ScriptDirective) else ScriptDirective(kind=d)
                for d in script
            )
        self.script = list(script)
        self.plan = plan

    def turn(self, observation: HumanObservation, pending: PendingView | None) -> HumanTurn:
        if not self.script:
            return HumanTurn()
        head = self.script[0]
        if head.kind in ("accept", "reject"):
            if pending is None:
                return HumanTurn()
            self.script.pop(0)
            steps = tuple(s for s in pending.step_refs if s not in observation.completed)
            if head.kind == "reject":
                return HumanTurn(decision="reject", utterance="No, I can't right now.")
            if pending.act is DialogAct.PROPOSE_SPLIT:
                # agreeing to a split is a commitment, not immediate execution
                boundary = pending.split_at if pending.split_at is not None else min(steps)
                text = "Ok, that works."
                if self.plan is not None:
                    text = realize_utterance(
                        DialogAct.CONDITIONAL_ACCEPT, steps, self.plan, split_at=boundary
                    )
                return HumanTurn(decision="accept", utterance=text)
            return HumanTurn(
                decision="accept",
                perform_steps=steps,
                utterance="Ok, I will do that now!",
            )
        self.script.pop(0)
        if head.kind == "silence":
            return HumanTurn()
        if head.kind == "say":
            return HumanTurn(utterance=head.text)
        return HumanTurn(perform_steps=(head.step,))


# --- live bridge ------------------------------------------------------------------


class InteractiveHuman:
    """Blocks the trial's human turn on a live session message.

    Messages are dicts with optional `text` and `perform` (step index) keys;
    `decision` may be "accept"/"reject". While the robot is waiting on an
    answer the window stays open for `turn_timeout_s`; idle turns (nothing
    pending) only hold the loop for `idle_timeout_s` so the trial keeps moving
    when the person has nothing to say. A timeout resolves to silence; a close
    sentinel raises SessionClosed.
    """

    CLOSE = object()

    def __init__(self, turn_timeout_s: float = 120.0, idle_timeout_s: float = 1.0):
        self.inbox: queue.Queue = queue.Queue()
        self.turn_timeout_s = turn_timeout_s
        self.idle_timeout_s = idle_timeout_s
        self.closed = False

    def post(self, message: dict) -> None:
        self.inbox.put(message)

    def close(self) -> None:
        self.inbox.put(self.CLOSE)

    def turn(self, observation: HumanObservation, pending: PendingView | None) -> HumanTurn:
        if self.closed:
            raise SessionClosed("session already closed")
        timeout = self.turn_timeout_s if pending is not None else self.idle_timeout_s
        try:
            message = self.inbox.get(timeout=timeout)
        except queue.Empty:
            return HumanTurn()
        if message is self.CLOSE:
            self.closed = True
            raise SessionClosed("session closed by client")
        perform = message.get("perform")
        steps = (int(perform),) if perform is not None else ()
        decision = message.get("decision")
        if decision == "accept" and pending is not None and not steps:
            steps = tuple(s for s in pending.step_refs if s not in observation.completed)
        return HumanTurn(
            decision=decision,
            perform_steps=steps,
            utterance=message.get("text"),
        )
