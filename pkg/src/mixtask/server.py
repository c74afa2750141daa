"""Live-session server: a real person plays the collaborator over HTTP.

The channel is long-poll JSON carrying the same versioned structured events
as the trial log, plus a snapshot message, so the web client's live and
replay modes share one renderer.

Endpoints:
  GET  /snapshot          full session snapshot (protocol version, plan, state)
  GET  /events?since=K    events K.. (long-poll up to ~10 s)
  POST /turn              {"text": ..., "perform": step, "decision": "accept"|"reject"}
  POST /close             end the session
"""

from __future__ import annotations

import json
import os
import threading
import time
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .humans import InteractiveHuman
from .logs import TrialLog
from .scenarios import TaskScenario
from .trial import TrialConfig, _load, run_trial

PROTOCOL_VERSION = 1


def build_snapshot(scenario: TaskScenario, method: str, alpha: float) -> dict:
    """Static session snapshot: the part of the view that never changes."""
    plan = scenario.plan
    return {
        "protocol_version": PROTOCOL_VERSION,
        "scenario": scenario.name,
        "method": method,
        "alpha": alpha,
        "grid": {
            "width": scenario.world.width,
            "height": scenario.world.height,
            "furniture": {
                name: [list(c) for c in cells]
                for name, cells in scenario.world.furniture.items()
            },
        },
        "objects": dict(scenario.initial_state.object_locations),
        "agents": {a: list(p) for a, p in scenario.initial_state.agent_poses.items()},
        "plan": [{"index": i, "text": str(p)} for i, p in enumerate(plan.steps)],
        "hierarchy": [
            {"label": label, "start": start, "end": end}
            for label, (start, end) in plan.abstract_steps
        ],
    }


class TrialSession:
    """One interactive trial running on a background thread."""

    def __init__(
        self, config: TrialConfig, turn_timeout_s: float = 120.0, idle_timeout_s: float = 1.0
    ):
        self.config = config
        self.scenario: TaskScenario = _load(config)
        self.human = InteractiveHuman(
            turn_timeout_s=turn_timeout_s, idle_timeout_s=idle_timeout_s
        )
        self.log = TrialLog()
        self.result = None
        self.error: str | None = None
        self.thread = threading.Thread(target=self._run, daemon=True)

    def start(self) -> None:
        self.thread.start()

    def _run(self) -> None:
        try:
            self.result = run_trial(self.config, human=self.human, log=self.log)
        except Exception as exc:
            self.error = f"{type(exc).__name__}: {exc}"

    @property
    def done(self) -> bool:
        return not self.thread.is_alive() and (self.result is not None or self.error is not None)

    def snapshot(self) -> dict:
        snap = build_snapshot(self.scenario, self.config.method, self.config.alpha)
        snap["events_len"] = len(self.log.records)
        snap["done"] = self.done
        return snap

    def events_since(self, since: int, wait_s: float = 10.0) -> dict:
        deadline = time.monotonic() + wait_s
        while len(self.log.records) <= since and not self.done:
            if time.monotonic() >= deadline:
                break
            time.sleep(0.05)
        records = self.log.records[since:]
        return {
            "since": since,
            "events": [
                {
                    "env_step": r.env_step,
                    "actor": r.actor,
                    "kind": r.kind,
                    "payload": r.payload,
                }
                for r in records
            ],
            "done": self.done,
        }


_CONTENT_TYPES = {
    ".html": "text/html",
    ".js": "text/javascript",
    ".css": "text/css",
    ".json": "application/json",
    ".jsonl": "application/jsonl",
}


def make_handler(session: TrialSession, static_dir: str | None = None):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # quiet by default
            pass

        def _send_static(self, path: str) -> bool:
            if static_dir is None:
                return False
            rel = path.lstrip("/") or "index.html"
            full = os.path.realpath(os.path.join(static_dir, rel))
            if not full.startswith(os.path.realpath(static_dir)) or not os.path.isfile(full):
                return False
            with open(full, "rb") as fh:
                data = fh.read()
            ext = os.path.splitext(full)[1]
            self.send_response(HTTPStatus.OK)
            self.send_header("Content-Type", _CONTENT_TYPES.get(ext, "application/octet-stream"))
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)
            return True

        def _send(self, status: int, body: dict) -> None:
            data = json.dumps(body).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.end_headers()
            self.wfile.write(data)

        def do_OPTIONS(self):
            self._send(HTTPStatus.OK, {})

        def do_GET(self):
            url = urlparse(self.path)
            if url.path == "/snapshot":
                self._send(HTTPStatus.OK, session.snapshot())
            elif url.path == "/events":
                since = int(parse_qs(url.query).get("since", ["0"])[0])
                self._send(HTTPStatus.OK, session.events_since(since))
            elif self._send_static(url.path):
                pass
            else:
                self._send(HTTPStatus.NOT_FOUND, {"error": "unknown path"})

        def do_POST(self):
            url = urlparse(self.path)
            length = int(self.headers.get("Content-Length", "0"))
            try:
                body = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError:
                self._send(HTTPStatus.BAD_REQUEST, {"error": "bad json"})
                return
            if url.path == "/turn":
                if session.done:
                    self._send(HTTPStatus.CONFLICT, {"error": "session finished"})
                    return
                perform = body.get("perform")
                if perform is not None and (
                    not isinstance(perform, int)
                    or not (0 <= perform < len(session.scenario.plan))
                ):
                    self._send(HTTPStatus.BAD_REQUEST, {"error": "invalid step"})
                    return
                session.human.post(
                    {
                        "text": body.get("text"),
                        "perform": perform,
                        "decision": body.get("decision"),
                    }
                )
                self._send(HTTPStatus.OK, {"ok": True})
            elif url.path == "/close":
                session.human.close()
                self._send(HTTPStatus.OK, {"ok": True})
            else:
                self._send(HTTPStatus.NOT_FOUND, {"error": "unknown path"})

    return Handler


def serve(
    config: TrialConfig,
    port: int,
    turn_timeout_s: float = 120.0,
    idle_timeout_s: float = 1.0,
    static_dir: str | None = None,
):
    """Start one interactive session and serve it; returns (server, session)."""
    session = TrialSession(config, turn_timeout_s=turn_timeout_s, idle_timeout_s=idle_timeout_s)
    session.start()
    server = ThreadingHTTPServer(("127.0.0.1", port), make_handler(session, static_dir))
    return server, session
