// Entry point: live mode (connect to a trial server) or replay mode (load a
// saved log). Input is locked while the robot's environment step is in
// flight; execution is strictly turn-based.

import { SessionClient } from "./client.js";
import { parseLogFile, ProtocolError } from "./events.js";
import { render } from "./render.js";
import { Playback } from "./replay.js";
import { applyEvent, initialView } from "./view.js";
import type { SessionView } from "./view.js";

function statusLine(text: string): void {
  const node = document.getElementById("status");
  if (node) node.textContent = text;
}

function setInputEnabled(enabled: boolean): void {
  for (const id of ["say", "send", "accept", "reject", "perform", "perform-step"]) {
    const node = document.getElementById(id) as HTMLButtonElement | HTMLInputElement | null;
    if (node) node.disabled = !enabled;
  }
}

export async function startLive(baseUrl: string): Promise<void> {
  const root = document.getElementById("app")!;
  const client = new SessionClient(baseUrl);
  let view: SessionView;
  try {
    const snapshot = await client.connect();
    view = initialView(snapshot);
  } catch (error) {
    if (error instanceof ProtocolError) {
      statusLine(`protocol mismatch: ${error.message}`);
      return; // hard error: no partial render
    }
    statusLine("connection failed - is the trial server running? Retry?");
    const retry = document.getElementById("retry");
    retry?.addEventListener("click", () => void startLive(baseUrl), { once: true });
    return;
  }
  render(root, view);
  setInputEnabled(false);

  const say = document.getElementById("say") as HTMLInputElement | null;
  const wire = (id: string, turn: () => Parameters<SessionClient["sendHumanTurn"]>[0]) => {
    document.getElementById(id)?.addEventListener("click", () => {
      setInputEnabled(false);
      void client.sendHumanTurn(turn()).catch((e) => statusLine(String(e)));
      if (say) say.value = "";
    });
  };
  wire("send", () => ({ text: say?.value ?? "" }));
  wire("accept", () => ({ decision: "accept", text: "Ok, I will do that now!" }));
  wire("reject", () => ({ decision: "reject", text: "No, I can't right now." }));
  wire("perform", () => {
    const stepInput = document.getElementById("perform-step") as HTMLInputElement | null;
    return { perform: Number(stepInput?.value ?? 0) };
  });

  for (;;) {
    const { events, done } = await client.nextEvents();
    for (const event of events) view = applyEvent(view, event);
    if (events.length > 0) render(root, view);
    // the human's window is open whenever the robot is waiting on a reply
    setInputEnabled(view.pending !== null && view.terminated === null);
    if (done || view.terminated !== null) {
      setInputEnabled(false);
      statusLine(`trial finished: ${view.terminated ?? "server closed"}`);
      return;
    }
  }
}

export function startReplay(logText: string): Playback {
  const root = document.getElementById("app")!;
  const log = parseLogFile(logText);
  const scrubber = document.getElementById("scrub") as HTMLInputElement | null;
  const playback = new Playback(log.snapshot, log.events, (view, position) => {
    render(root, view);
    if (scrubber) scrubber.value = String(position);
    statusLine(`event ${position}/${log.events.length}`);
  });
  if (scrubber) {
    scrubber.max = String(log.events.length);
    scrubber.addEventListener("input", () => playback.scrub(Number(scrubber.value)));
  }
  document.getElementById("play")?.addEventListener("click", () => playback.play());
  document.getElementById("pause")?.addEventListener("click", () => playback.pause());
  playback.scrub(0);
  return playback;
}

export function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const server = params.get("server");
  statusLine("load a trial log to replay, or pass ?server=http://127.0.0.1:8765");
  const picker = document.getElementById("logfile") as HTMLInputElement | null;
  picker?.addEventListener("change", () => {
    const file = picker.files?.[0];
    if (!file) return;
    void file.text().then((text) => startReplay(text));
  });
  if (server) {
    void startLive(server);
    return;
  }
  // served by the harness itself? then this origin is the session
  void fetch("/snapshot")
    .then((response) => {
      if (response.ok) void startLive("");
    })
    .catch(() => {});
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", boot);
  } else if (document.getElementById("app")) {
    boot();
  }
}
