"""Verbal action layer: typed dialog acts, classification, help-probability
estimation, and template-based utterance realization.

The classifier and templates are co-designed: classify(realize(act, ...))
recovers the act kind for every non-smalltalk act, which keeps simulated
conversations lossless without an external language model. An LLM adapter may
override either side with structurally valid output.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum

from .errors import UnknownStepRef
from .scenarios import PlanSpec
from .world import PhysicalPrimitive


class DialogAct(str, Enum):
    ASK_HELP = "ask_help"
    ACCEPT = "accept"
    REJECT = "reject"
    CONDITIONAL_ACCEPT = "conditional_accept"
    PROPOSE_SPLIT = "propose_split"
    CLAIM_STEP = "claim_step"
    DELEGATE_STEP = "delegate_step"
    INFORM_LIMITATION = "inform_limitation"
    ACKNOWLEDGE = "acknowledge"
    SMALLTALK = "smalltalk"
    SILENCE = "silence"


_REF_REQUIRED = {
    DialogAct.ASK_HELP,
    DialogAct.PROPOSE_SPLIT,
    DialogAct.CLAIM_STEP,
    DialogAct.DELEGATE_STEP,
}


@dataclass(frozen=True)
class DialogEvent:
    turn_id: int
    initiator: str  # "H" or "R"
    act: DialogAct
    step_refs: tuple[int, ...] = ()
    surface_text: str = ""
    split_at: int | None = None  # for split-shaped acts: steps <= split_at go to R
    replying_to: int | None = None

    def __post_init__(self):
        if self.act in _REF_REQUIRED and not self.step_refs:
            raise ValueError(f"{self.act.value} requires step references")
        if self.act is DialogAct.SILENCE and self.surface_text:
            raise ValueError("silence carries no text")


SENTIMENT_STEP = 0.05
OFFSET_BOUND = 0.2
VALUE_FLOOR = 0.01
VALUE_CEIL = 0.99

POSITIVE_LEXICON = ("thank", "thanks", "good job", "great", "awesome", "appreciate", "well done")
NEGATIVE_LEXICON = ("annoying", "tedious", "terrible", "useless", "hate", "hurry up", "stop asking")


@dataclass(frozen=True)
class PHelpEstimate:
    """Beta(1,1)-posterior mean over accept/reject evidence plus a bounded
    sentiment offset; the combined value is clamped to [0.01, 0.99]."""

    accepts: int = 0
    rejects: int = 0
    offset: float = 0.0

    @property
    def value(self) -> float:
        mean = (self.accepts + 1) / (self.accepts + self.rejects + 2)
        return min(VALUE_CEIL, max(VALUE_FLOOR, mean + self.offset))


def fresh_estimate() -> PHelpEstimate:
    return PHelpEstimate()


def _sentiment_of(text: str) -> int:
    low = text.lower()
    pos = any(w in low for w in POSITIVE_LEXICON)
    neg = any(w in low for w in NEGATIVE_LEXICON)
    return (1 if pos else 0) - (1 if neg else 0)


def update_p_help(
    estimate: PHelpEstimate, event: DialogEvent, sentiment_delta: float | None = None
) -> PHelpEstimate:
    """Fold one dialog event into the estimate.

    Accept-like and reject acts contribute one evidence count per referenced
    low-level step (a refusal of a two-step bundle is evidence about both
    steps); events without references count once. Smalltalk moves the
    sentiment offset by +-0.05 within +-0.2 via the keyword lexicon, or by
    `sentiment_delta` when an external estimator supplies one.
    """
    n = max(1, len(event.step_refs))
    if event.act in (DialogAct.ACCEPT, DialogAct.CONDITIONAL_ACCEPT, DialogAct.CLAIM_STEP):
        return replace(estimate, accepts=estimate.accepts + n)
    if event.act is DialogAct.REJECT:
        return replace(estimate, rejects=estimate.rejects + n)
    if event.act is DialogAct.SMALLTALK:
        if sentiment_delta is None:
            sentiment_delta = _sentiment_of(event.surface_text) * SENTIMENT_STEP
        if sentiment_delta:
            offset = min(OFFSET_BOUND, max(-OFFSET_BOUND, estimate.offset + sentiment_delta))
            return replace(estimate, offset=offset)
    return estimate


# --- step reference resolution --------------------------------------------------

_KIND_VERBS = {
    "pickplace": ("bring", "place", "move", "grab", "pick"),
    "pick_open_place": ("open",),
    "pick_pour_place": ("pour",),
    "put_on": ("put", "screw", "attach"),
    "switch": ("switch", "swap"),
    "fold": ("fold",),
    "cover": ("cover",),
    "wrap": ("wrap",),
    "cut_put": ("cut", "tape"),
}


def _words(name: str) -> list[str]:
    return name.replace("_", " ").split()


def resolve_step_refs(
    text: str, plan: PlanSpec, completed: frozenset[int] = frozenset()
) -> tuple[int, ...]:
    """Map free text onto plan steps.

    Longest abstract label match wins and yields the bundle's incomplete
    steps; otherwise a primitive matches when one of its kind's verbs and one
    of its parameters both appear. Ambiguity resolves to the earliest
    incomplete step.
    """
    low = " ".join(text.lower().split())
    labels = sorted(plan.abstract_steps, key=lambda ls: -len(ls[0]))
    for label, (start, end) in labels:
        if label.lower() in low:
            refs = tuple(i for i in range(start, end) if i not in completed)
            if refs:
                return refs
    candidates = []
    for idx, prim in enumerate(plan.steps):
        if idx in completed:
            continue
        verbs = _KIND_VERBS[prim.kind]
        if not any(v in low for v in verbs):
            continue
        if any(" ".join(_words(p)) in low for p in prim.params):
            candidates.append(idx)
    if candidates:
        return (min(candidates),)
    return ()


# --- classification --------------------------------------------------------------


@dataclass(frozen=True)
class PendingContext:
    """What the robot is waiting on, plus plan structure for ref resolution."""

    plan: PlanSpec
    completed: frozenset[int] = frozenset()
    pending_act: DialogAct | None = None
    pending_refs: tuple[int, ...] = ()
    turn_id: int = 0


_AFFIRMATIVE = {"ok", "okay", "sure", "yes", "yeah", "alright", "fine", "happy", "gladly"}
_NEGATIVE = {"no", "nope", "nah", "cant", "cannot", "wont", "busy", "refuse"}
_ACK_PHRASES = ("got it", "understood", "sounds good", "will keep that in mind")


def _tokens(text: str) -> set[str]:
    return set(re.findall(r"[a-z]+", text.lower().replace("'", "")))


def classify_incoming(text: str, context: PendingContext) -> DialogEvent:
    """Rule-based classification of a human utterance; total over all strings."""
    turn = context.turn_id
    if not text.strip():
        return DialogEvent(turn_id=turn, initiator="H", act=DialogAct.SILENCE)
    low = " ".join(text.lower().split())
    toks = _tokens(text)
    refs = resolve_step_refs(text, context.plan, context.completed)

    def ev(act, step_refs=(), split_at=None):
        return DialogEvent(
            turn_id=turn,
            initiator="H",
            act=act,
            step_refs=tuple(step_refs),
            surface_text=text,
            split_at=split_at,
        )

    if "if you" in low and ("i will" in low or "ill" in toks or "then i" in low):
        first, _, second = low.partition("then")
        r_part = resolve_step_refs(first, context.plan, context.completed)
        h_part = resolve_step_refs(second, context.plan, context.completed)
        if r_part and h_part:
            steps = tuple(sorted(set(r_part) | set(h_part)))
            return ev(DialogAct.CONDITIONAL_ACCEPT, steps, split_at=max(r_part))
        return ev(DialogAct.CONDITIONAL_ACCEPT, refs or context.pending_refs)

    if "split" in toks or "so that i can" in low or ("i will" in low and "and then you" in low):
        marker = "so that" if "so that" in low else "and then you"
        first, _, second = low.partition(marker)
        r_part = resolve_step_refs(first, context.plan, context.completed)
        h_part = resolve_step_refs(second, context.plan, context.completed)
        if r_part and h_part:
            steps = tuple(sorted(set(r_part) | set(h_part)))
            return ev(DialogAct.PROPOSE_SPLIT, steps, split_at=max(r_part))
        split_refs = refs or context.pending_refs
        if split_refs:
            return ev(DialogAct.PROPOSE_SPLIT, split_refs, split_at=min(split_refs))
        return ev(DialogAct.SMALLTALK)

    if "not able to" in low or "unable to" in low:
        return ev(DialogAct.INFORM_LIMITATION, refs or context.pending_refs)

    if "help" in toks:
        help_refs = refs or context.pending_refs
        if help_refs:
            return ev(DialogAct.ASK_HELP, help_refs)
        return ev(DialogAct.SMALLTALK)

    if toks & _NEGATIVE:
        return ev(DialogAct.REJECT, context.pending_refs if context.pending_act else refs)

    has_commitment = "i will" in low or "i can" in low or "let me" in low or "ill" in toks
    if context.pending_act is not None:
        anaphoric = "do that" in low or "do it" in low
        covered = refs and set(refs) <= set(context.pending_refs)
        if (toks & _AFFIRMATIVE or has_commitment) and (anaphoric or covered or not refs):
            return ev(DialogAct.ACCEPT, context.pending_refs)

    if has_commitment and refs:
        return ev(DialogAct.CLAIM_STEP, refs)

    if refs and ("could you" in low or "can you" in low or "you should" in low or "please" in toks):
        return ev(DialogAct.DELEGATE_STEP, refs)

    if any(p in low for p in _ACK_PHRASES) or (toks & _AFFIRMATIVE and not refs):
        return ev(DialogAct.ACKNOWLEDGE)

    return ev(DialogAct.SMALLTALK)


# --- realization -----------------------------------------------------------------

_DESCRIBE = {
    "pickplace": "bring the {0} to the {1}",
    "pick_open_place": "open the {1} using the {0}",
    "pick_pour_place": "pour the {0} into the {1}",
    "put_on": "put the {0} on the {1} with the {2}",
    "switch": "switch the {0} on the {1}",
    "fold": "fold the {0}",
    "cover": "cover the {1} with the {0}",
    "wrap": "wrap the {0} around the {1}",
    "cut_put": "cut the {0} with the {1} and stick it on the {2}",
}


def describe_step(prim: PhysicalPrimitive) -> str:
    params = [" ".join(_words(p)) for p in prim.params]
    return _DESCRIBE[prim.kind].format(*params)


def _phrase_for(step_refs, plan: PlanSpec, completed: frozenset[int]) -> str:
    """Bundle label when the refs cover a whole (incomplete) bundle, else the
    low-level step descriptions."""
    refs = tuple(step_refs)
    for idx in refs:
        if not (0 <= idx < len(plan)):
            raise UnknownStepRef(f"step {idx} outside plan of length {len(plan)}")
    if refs:
        label, (start, end) = plan.bundle_of(refs[0])
        bundle_all = tuple(range(start, end))
        if refs == bundle_all:
            return label[0].lower() + label[1:]
    return " and then ".join(describe_step(plan.steps[i]) for i in refs)


# Placeholders: {phrase} is the step reference text (bundle label or low-level
# descriptions), {robot_part}/{human_part} the two sides of a split, {suffix}
# the tone tail. Overridable per deployment via load_template_file.
DEFAULT_TEMPLATES: dict[DialogAct, str] = {
    DialogAct.ASK_HELP: "Could you please help me with this: {phrase}?{suffix}",
    DialogAct.INFORM_LIMITATION: (
        "I'm not able to {phrase} on my own. Could you please take over that part?{suffix}"
    ),
    DialogAct.PROPOSE_SPLIT: (
        "Let's split this up: I will {robot_part}, and then you can {human_part}.{suffix}"
    ),
    DialogAct.CONDITIONAL_ACCEPT: "Ok, if you {robot_part}, then I will {human_part}.",
    DialogAct.ACCEPT: "Ok, I will do that now!",
    DialogAct.REJECT: "No, sorry, I can't do that right now.",
    DialogAct.CLAIM_STEP: "I will take care of this myself: {phrase}.",
    DialogAct.DELEGATE_STEP: "Please take care of this: {phrase}.",
    DialogAct.ACKNOWLEDGE: "Got it.",
    DialogAct.SMALLTALK: "Nice weather for a project, isn't it?",
}


def load_template_file(text: str) -> dict[DialogAct, str]:
    """Parse `act: template` lines into a template override table."""
    templates = dict(DEFAULT_TEMPLATES)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, template = line.partition(":")
        if not sep:
            raise ValueError(f"line {lineno}: template line needs `act: text`")
        try:
            act = DialogAct(name.strip())
        except ValueError:
            raise ValueError(f"line {lineno}: unknown act {name.strip()!r}") from None
        templates[act] = template.strip()
    return templates


def realize_utterance(
    act: DialogAct,
    step_refs: tuple[int, ...],
    plan: PlanSpec,
    tone: str = "neutral",
    completed: frozenset[int] = frozenset(),
    split_at: int | None = None,
    templates: dict[DialogAct, str] | None = None,
) -> str:
    """Deterministic template text for a robot verbal act."""
    if act is DialogAct.SILENCE:
        raise ValueError("silence is not realized")
    table = templates if templates is not None else DEFAULT_TEMPLATES
    suffix = " Thank you so much!" if tone == "warm" else " Thanks!"

    phrase = ""
    if step_refs:
        phrase = _phrase_for(step_refs, plan, completed)
    robot_part = human_part = ""
    if act in (DialogAct.PROPOSE_SPLIT, DialogAct.CONDITIONAL_ACCEPT) and step_refs:
        boundary = split_at if split_at is not None else min(step_refs)
        joiner = " and then " if act is DialogAct.PROPOSE_SPLIT else " and "
        robot_part = joiner.join(
            describe_step(plan.steps[i]) for i in step_refs if i <= boundary
        )
        human_part = joiner.join(
            describe_step(plan.steps[i]) for i in step_refs if i > boundary
        )
    return table[act].format(
        phrase=phrase, robot_part=robot_part, human_part=human_part, suffix=suffix
    )
