"""Append-only trial event stream and its line-delimited file format.

Every metric is computed from this stream. Files carry one header line
(format version + the trial config) followed by one JSON object per event;
event serialization is byte-stable so identical (config, seed) reruns can be
compared with a straight file diff.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import MalformedLog, ParseError

LOG_FORMAT_VERSION = 1

EVENT_KINDS = ("physical", "verbal", "allocation", "phelp", "termination")
TERMINATION_REASONS = (
    "primitive_failure",   # irrecoverable execution failure
    "step_cap",            # 4T environment steps elapsed
    "infeasible_allocation",  # infeasible step allocated to the robot twice in a row
    "refused_infeasible",  # human refused twice on a robot-infeasible step
    "complete",            # every plan step succeeded
    "aborted",             # interactive session closed
)


@dataclass(frozen=True)
class TrialRecord:
    env_step: int
    actor: str  # "R" | "H" | "sys"
    kind: str
    payload: dict

    def to_line(self) -> str:
        return json.dumps(
            {
                "env_step": self.env_step,
                "actor": self.actor,
                "kind": self.kind,
                "payload": self.payload,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_line(cls, line: str) -> "TrialRecord":
        try:
            raw = json.loads(line)
            return cls(
                env_step=int(raw["env_step"]),
                actor=str(raw["actor"]),
                kind=str(raw["kind"]),
                payload=dict(raw["payload"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedLog(f"bad log line: {exc}") from exc


@dataclass
class TrialLog:
    records: list[TrialRecord] = field(default_factory=list)

    def append(self, env_step: int, actor: str, kind: str, payload: dict) -> None:
        if kind not in EVENT_KINDS:
            raise MalformedLog(f"unknown event kind {kind!r}")
        self.records.append(TrialRecord(env_step, actor, kind, payload))

    def validate(self) -> None:
        last = -1
        terminations = [r for r in self.records if r.kind == "termination"]
        for r in self.records:
            if r.env_step < last:
                raise MalformedLog("env_step decreased")
            last = r.env_step
        if len(terminations) != 1:
            raise MalformedLog(f"expected exactly one termination record, got {len(terminations)}")
        if self.records[-1].kind != "termination":
            raise MalformedLog("termination record is not last")
        if terminations[0].payload.get("reason") not in TERMINATION_REASONS:
            raise MalformedLog("unknown termination reason")

    def termination_reason(self) -> str:
        self.validate()
        return self.records[-1].payload["reason"]

    def verbal_events(self) -> list[TrialRecord]:
        return [r for r in self.records if r.kind == "verbal"]

    def to_lines(self) -> list[str]:
        return [r.to_line() for r in self.records]


def save_log(
    path: str, config_dict: dict, log: TrialLog, snapshot: dict | None = None
) -> None:
    header_fields: dict = {
        "format": "trial-log",
        "version": LOG_FORMAT_VERSION,
        "config": config_dict,
    }
    if snapshot is not None:
        header_fields["snapshot"] = snapshot
    header = json.dumps(header_fields, sort_keys=True, separators=(",", ":"))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for line in log.to_lines():
            fh.write(line + "\n")


def load_log(path: str) -> tuple[dict, TrialLog]:
    """Returns (header, log); header holds `config` and, when the log was
    written for replay tooling, a `snapshot` of the session's static state."""
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty log file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad log header: {exc}", line=1) from exc
    if header.get("format") != "trial-log":
        raise ParseError("not a trial log file", line=1)
    if header.get("version") != LOG_FORMAT_VERSION:
        raise ParseError(f"unsupported log version {header.get('version')}", line=1)
    log = TrialLog(records=[TrialRecord.from_line(ln) for ln in lines[1:]])
    return header, log
