"""Optional chat-completion client for four capabilities: classify, sentiment,
realize, and strategy (plus the baseline's whole-plan allocate).

Every capability has a deterministic in-repo fallback, so adapter failures of
any kind (disabled, timeout, transport, malformed output) degrade to a
FallbackSignal and never abort a trial. Only prompt/response hashes are
logged unless raw logging is opted into.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import urllib.error
import urllib.request
from dataclasses import dataclass

from .errors import ConfigError

log = logging.getLogger(__name__)

CAPABILITIES = ("classify", "sentiment", "realize", "strategy", "allocate")


@dataclass(frozen=True)
class FallbackSignal:
    """Adapter could not produce a usable answer; use the deterministic core."""

    reason: str = ""


@dataclass(frozen=True)
class AdapterConfig:
    endpoint: str = ""
    model: str = ""
    credential_env: str = "MIXTASK_API_KEY"
    timeout_s: float = 10.0
    capabilities: frozenset = frozenset()
    log_raw: bool = False

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ConfigError("adapter timeout must be positive")
        unknown = set(self.capabilities) - set(CAPABILITIES)
        if unknown:
            raise ConfigError(f"unknown adapter capabilities: {sorted(unknown)}")

    @classmethod
    def disabled(cls) -> "AdapterConfig":
        return cls()

    @classmethod
    def from_file(cls, path: str) -> "AdapterConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read adapter config {path}: {exc}") from exc
        return cls(
            endpoint=raw.get("endpoint", ""),
            model=raw.get("model", ""),
            credential_env=raw.get("credential_env", "MIXTASK_API_KEY"),
            timeout_s=float(raw.get("timeout_s", 10.0)),
            capabilities=frozenset(raw.get("capabilities", [])),
            log_raw=bool(raw.get("log_raw", False)),
        )


# Instruction preambles with in-repo example budgets: ~15 worked examples for
# strategy programs, ~10 for utterances, a handful for the rest.
_STRATEGY_EXAMPLES = [
    ('human claims steps 2..3', 'add assign 2..3 H; policy proceed'),
    ('human delegates step 0 to you', 'add assign 0..0 R; policy proceed'),
    ('human rejected your request on 2..3; step 3 impossible for you; step 2 is doable',
     'remove assign 2..3 *; policy negotiate_first propose_split 2..3 at 2'),
    ('human rejected your request on 3..3; step 3 impossible, no doable prefix',
     'remove assign 3..3 *; policy negotiate_first inform_limitation 3..3'),
    ('human rejected your request on 0..1; you can do both', 'remove assign 0..1 *; policy proceed'),
    ('human offers: they do 3 if you do 2', 'add split 2..3 at 2; policy proceed'),
    ('human accepted your request', 'policy proceed'),
    ('human said nothing', 'policy proceed'),
    ('human smalltalk, no task content', 'policy proceed'),
    ('human claims the last step 4', 'add assign 4..4 H; policy proceed'),
    ('human delegates 0..1 then claims 3', 'add assign 0..1 R; add assign 3..3 H; policy proceed'),
    ('human retracting: forbids you from 2..2', 'add forbid 2..2 R; policy proceed'),
    ('human refuses everything, nothing impossible pending', 'policy proceed'),
    ('human proposes split of 4..6 at 5', 'add split 4..6 at 5; policy proceed'),
    ('human wants to pause', 'policy wait'),
]
_UTTERANCE_EXAMPLES = [
    ('ask_help on "open the package"', 'Could you please help me with this: open the package? Thanks!'),
    ('inform_limitation on the opening step', "I'm not able to open the package using the scissors on my own. Could you please take over that part?"),
    ('propose_split: robot brings scissors, human opens', "Let's split this up: I will bring the scissors to the coffee table, and then you can open the package using the scissors."),
    ('accept', 'Ok, I will do that now!'),
    ('reject', "No, sorry, I can't do that right now."),
    ('claim step: pour', 'I will take care of this myself: pour the package into the bowl.'),
    ('delegate: bring bowl', 'Please take care of this: bring the bowl to the coffee table.'),
    ('acknowledge', 'Got it.'),
    ('conditional accept: you bring scissors, I open', 'Ok, if you bring the scissors to the coffee table, then I will open the package using the scissors.'),
    ('ask_help low level', 'Could you please help me with this: pour the package into the bowl? Thanks!'),
]

_PREAMBLES = {
    "classify": (
        "Classify the human utterance into one dialog act: ask_help, accept, reject, "
        "conditional_accept, propose_split, claim_step, delegate_step, inform_limitation, "
        "acknowledge, smalltalk, silence. Reply as JSON {\"act\", \"steps\", \"split_at\"}."
    ),
    "sentiment": (
        "Rate the sentiment of the utterance toward continued cooperation as a float in "
        "[-0.2, 0.2]. Reply with the number only."
    ),
    "realize": (
        "Rewrite the given template utterance naturally, preserving the act kind and every "
        "step reference. Reply with the utterance only.\nExamples:\n"
        + "\n".join(f"- {k} -> {v}" for k, v in _UTTERANCE_EXAMPLES)
    ),
    "strategy": (
        "Produce a strategy program: semicolon-separated clauses "
        "(add assign|forbid LO..HI H|R, add split LO..HI at K, remove KIND LO..HI H|R|*, "
        "policy proceed|wait|negotiate_first ACT LO..HI [at K]). Reply with the program only.\n"
        "Examples:\n" + "\n".join(f"- {k} -> {v}" for k, v in _STRATEGY_EXAMPLES)
    ),
    "allocate": (
        "Given the symbolic state, dialog history, task plan, and the human-effort factor, "
        "assign each remaining step to H or R. Reply as a JSON list of \"H\"/\"R\"."
    ),
}


class LlmAdapter:
    """Blocking chat-completion client with hard timeout and total fallback."""

    def __init__(self, config: AdapterConfig, transport=None):
        self.config = config
        self.transport = transport or self._http_transport
        self.call_log: list[dict] = []

    def enabled(self, capability: str) -> bool:
        return bool(self.config.endpoint) and capability in self.config.capabilities

    def call(self, capability: str, payload: dict):
        """Returns the capability-shaped value or FallbackSignal; never raises."""
        if not self.enabled(capability):
            return FallbackSignal(reason="disabled")
        prompt = json.dumps(payload, sort_keys=True)
        raw = self.transport(capability, prompt)
        self._audit(capability, prompt, raw)
        if raw is None:
            return FallbackSignal(reason="transport")
        try:
            return self._parse(capability, raw)
        except (ValueError, KeyError, TypeError) as exc:
            return FallbackSignal(reason=f"schema: {exc}")

    def _audit(self, capability: str, prompt: str, raw: str | None) -> None:
        entry = {
            "capability": capability,
            "prompt_sha256": hashlib.sha256(prompt.encode()).hexdigest(),
            "response_sha256": hashlib.sha256((raw or "").encode()).hexdigest(),
        }
        if self.config.log_raw:
            entry["prompt"] = prompt
            entry["response"] = raw
        self.call_log.append(entry)
        log.debug("adapter call %s", entry)

    def _parse(self, capability: str, raw: str):
        raw = raw.strip()
        if capability == "sentiment":
            value = float(raw)
            if not (-0.2 <= value <= 0.2):
                raise ValueError(f"sentiment {value} out of range")
            return value
        if capability == "classify":
            data = json.loads(raw)
            return {
                "act": str(data["act"]),
                "steps": tuple(int(s) for s in data.get("steps", [])),
                "split_at": data.get("split_at"),
            }
        if capability == "allocate":
            data = json.loads(raw)
            if not all(a in ("H", "R") for a in data):
                raise ValueError("allocation entries must be H or R")
            return tuple(data)
        # realize and strategy return text; strategy is validated by the caller
        if not raw:
            raise ValueError("empty response")
        return raw

    def _http_transport(self, capability: str, prompt: str) -> str | None:
        body = json.dumps(
            {
                "model": self.config.model,
                "messages": [
                    {"role": "system", "content": _PREAMBLES[capability]},
                    {"role": "user", "content": prompt},
                ],
            }
        ).encode()
        request = urllib.request.Request(
            self.config.endpoint,
            data=body,
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        credential = os.environ.get(self.config.credential_env, "")
        if credential:
            request.add_header("Authorization", f"Bearer {credential}")
        try:
            with urllib.request.urlopen(request, timeout=self.config.timeout_s) as response:
                data = json.loads(response.read().decode())
            return data["choices"][0]["message"]["content"]
        except (urllib.error.URLError, TimeoutError, OSError, KeyError, IndexError,
                json.JSONDecodeError, ValueError):
            return None


def disabled_adapter() -> LlmAdapter:
    return LlmAdapter(AdapterConfig.disabled())
