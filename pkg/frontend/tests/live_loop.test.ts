// Live-loop acceptance: a scripted session against the real trial server.
// The script rejects the first help request, accepts the second (the human
// then performs the accepted steps), and performs the final step with an
// explicit perform command; the resulting event stream must contain the
// human-initiated events and a non-monotone help-estimate trace.

import { spawn, type ChildProcess } from "node:child_process";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SessionClient } from "../src/client.js";
import { render } from "../src/render.js";
import { applyEvent, initialView } from "../src/view.js";
import type { SessionView } from "../src/view.js";
import type { TrialEvent } from "../src/events.js";

const PORT = 18000 + Math.floor(Math.random() * 10_000);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;

async function serverUp(): Promise<void> {
  const deadline = Date.now() + 60_000;
  for (;;) {
    try {
      const response = await fetch(`${BASE}/snapshot`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("trial server never came up");
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
}

beforeAll(async () => {
  server = spawn(
    "python3",
    [
      "-m", "mixtask", "serve",
      "--port", String(PORT),
      "--scenario", "pour_package",
      "--alpha", "0.3",
      "--seed", "0",
      "--turn-timeout", "600",
    ],
    { stdio: "ignore" },
  );
  await serverUp();
});

afterAll(() => {
  server?.kill();
});

describe("live session round trip", () => {
  it("accept + perform land in the trial log and the gauge is non-monotone", async () => {
    const client = new SessionClient(BASE);
    const snapshot = await client.connect();
    expect(snapshot.scenario).toBe("pour_package");

    let view: SessionView = initialView(snapshot);
    const allEvents: TrialEvent[] = [];
    const script: Array<(pendingRefs: number[]) => Promise<void>> = [
      () => client.sendHumanTurn({ decision: "reject", text: "No, I can't right now." }),
      () => client.sendHumanTurn({ decision: "accept", text: "Ok, I will do that now!" }),
      (refs) => client.sendHumanTurn({ perform: refs[0]! }),
    ];
    let answeredTurn = -1;

    const deadline = Date.now() + 90_000;
    while (view.terminated === null && Date.now() < deadline) {
      const { events, done } = await client.nextEvents();
      for (const event of events) {
        view = applyEvent(view, event);
        allEvents.push(event);
      }
      if (view.pending !== null && view.pending.turn !== answeredTurn && script.length > 0) {
        answeredTurn = view.pending.turn;
        const respond = script.shift()!;
        await respond(view.pending.refs);
      }
      if (done) break;
    }

    expect(view.terminated).toBe("complete");
    expect(script.length).toBe(0);

    // the human-initiated events are in the stream (= the trial log)
    const humanVerbal = allEvents.filter((e) => e.kind === "verbal" && e.actor === "H");
    const acts = humanVerbal.map((e) => String(e.payload["act"]));
    expect(acts).toContain("reject");
    expect(acts).toContain("accept");
    const humanPhysical = allEvents.filter((e) => e.kind === "physical" && e.actor === "H");
    expect(humanPhysical.length).toBeGreaterThanOrEqual(3); // accepted bundle + explicit perform
    expect(humanPhysical.map((e) => e.payload["step"])).toContain(4);

    // gauge dipped after the rejection, recovered after the acceptance
    const trace = view.gaugeTrace.map((p) => p.value);
    expect(trace.length).toBeGreaterThanOrEqual(2);
    expect(Math.min(...trace)).toBeLessThan(0.5);
    expect(trace[trace.length - 1]!).toBeGreaterThan(Math.min(...trace));
    const isMonotone =
      trace.every((v, i) => i === 0 || v >= trace[i - 1]!) ||
      trace.every((v, i) => i === 0 || v <= trace[i - 1]!);
    expect(isMonotone).toBe(false);

    // the final view renders: every step done, transcript populated
    const root = document.createElement("div");
    render(root, view);
    expect(root.querySelectorAll(".step.status-done").length).toBe(5);
    expect(root.querySelectorAll(".utterance.from-H").length).toBe(humanVerbal.length);
  });

  it("a reconnecting client rebuilds the finished view from snapshot + events", async () => {
    const fresh = new SessionClient(BASE);
    const snapshot = await fresh.connect();
    expect(snapshot.events_len).toBeGreaterThan(0);
    let view: SessionView = initialView(snapshot);
    for (;;) {
      const { events, done } = await fresh.nextEvents();
      for (const event of events) view = applyEvent(view, event);
      if (done && events.length === 0) break;
      if (view.terminated !== null) break;
    }
    expect(view.terminated).toBe("complete");
    expect(view.steps.every((s) => s.status === "done")).toBe(true);
  });

  it("rejects an out-of-range perform command", async () => {
    // the trial above has finished; spin up a checker against a fresh session
    // is unnecessary - the 400 path is validated against the finished session
    const response = await fetch(`${BASE}/turn`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ perform: 99 }),
    });
    expect([400, 409]).toContain(response.status);
  });
});
