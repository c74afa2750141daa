// SessionView: everything the client renders, built as a pure fold over the
// event stream. No game logic lives here; every field change is a direct
// restatement of one server event, which is what makes live accumulation and
// replay-from-scratch provably agree.

import type { Agent, HierarchyEntry, Snapshot, TrialEvent } from "./events.js";

export type StepStatus = "pending" | "done" | "failed-attempt";

export interface StepView {
  index: number;
  text: string;
  status: StepStatus;
  doneBy: Agent | null;
  allocation: Agent | null;
}

export interface TranscriptEntry {
  envStep: number;
  actor: Agent;
  act: string;
  text: string;
  refs: number[];
}

export interface PendingBanner {
  act: string;
  refs: number[];
  turn: number;
}

export interface GaugePoint {
  envStep: number;
  value: number;
}

export interface SessionView {
  scenario: string;
  method: string;
  grid: Snapshot["grid"];
  objects: Record<string, string>;
  agents: Record<string, [number, number]>;
  steps: StepView[];
  hierarchy: HierarchyEntry[];
  transcript: TranscriptEntry[];
  pHelp: number | null;
  gaugeTrace: GaugePoint[];
  pending: PendingBanner | null;
  envStep: number;
  terminated: string | null;
}

const REQUEST_ACTS = new Set(["ask_help", "propose_split", "inform_limitation"]);
const RESPONSE_ACTS = new Set(["accept", "reject", "conditional_accept"]);

// Display-only object motion: which parameter lands on which other parameter
// for each primitive kind, mirroring the server's effect table.
const DISPLAY_MOVES: Record<string, [number, number][]> = {
  pickplace: [[0, 1]],
  pick_open_place: [
    [0, 2],
    [1, 2],
  ],
  pick_pour_place: [[0, 2]],
  put_on: [[0, 1]],
  switch: [[0, 1]],
  fold: [],
  cover: [[0, 1]],
  wrap: [[0, 1]],
  cut_put: [[0, 2]],
};

export function initialView(snapshot: Snapshot): SessionView {
  return {
    scenario: snapshot.scenario,
    method: snapshot.method,
    grid: snapshot.grid,
    objects: { ...snapshot.objects },
    agents: { ...snapshot.agents },
    steps: snapshot.plan.map((step) => ({
      index: step.index,
      text: step.text,
      status: "pending",
      doneBy: null,
      allocation: null,
    })),
    hierarchy: snapshot.hierarchy,
    transcript: [],
    pHelp: null,
    gaugeTrace: [],
    pending: null,
    envStep: 0,
    terminated: null,
  };
}

function parsePrimitive(text: string): { kind: string; params: string[] } {
  const open = text.indexOf("(");
  const kind = text.slice(0, open);
  const params = text
    .slice(open + 1, text.length - 1)
    .split(",")
    .map((p) => p.trim())
    .filter((p) => p.length > 0);
  return { kind, params };
}

/** Fold one event into the view, returning a new view (inputs untouched). */
export function applyEvent(view: SessionView, event: TrialEvent): SessionView {
  const next: SessionView = {
    ...view,
    objects: { ...view.objects },
    steps: view.steps.map((s) => ({ ...s })),
    transcript: [...view.transcript],
    gaugeTrace: [...view.gaugeTrace],
    envStep: Math.max(view.envStep, event.env_step),
  };
  const payload = event.payload;

  if (event.kind === "physical") {
    const index = payload["step"] as number;
    const step = next.steps[index];
    const succeeded = event.actor === "H" ? true : Boolean(payload["succeeded"]);
    if (step) {
      if (succeeded) {
        step.status = "done";
        step.doneBy = event.actor as Agent;
      } else if (step.status === "pending") {
        step.status = "failed-attempt";
      }
    }
    if (succeeded) {
      const { kind, params } = parsePrimitive(String(payload["primitive"]));
      for (const [from, to] of DISPLAY_MOVES[kind] ?? []) {
        const obj = params[from];
        const dest = params[to];
        if (obj !== undefined && dest !== undefined) next.objects[obj] = dest;
      }
    }
    return next;
  }

  if (event.kind === "verbal") {
    const act = String(payload["act"]);
    const refs = (payload["refs"] as number[] | null) ?? [];
    next.transcript.push({
      envStep: event.env_step,
      actor: event.actor as Agent,
      act,
      text: String(payload["text"] ?? ""),
      refs,
    });
    if (event.actor === "R" && REQUEST_ACTS.has(act)) {
      next.pending = { act, refs, turn: Number(payload["turn"] ?? 0) };
    } else if (event.actor === "H" && RESPONSE_ACTS.has(act)) {
      next.pending = null;
    }
    return next;
  }

  if (event.kind === "allocation") {
    const assignment = (payload["assignment"] as [number, Agent][]) ?? [];
    for (const [index, agent] of assignment) {
      const step = next.steps[index];
      if (step) step.allocation = agent;
    }
    return next;
  }

  if (event.kind === "phelp") {
    const value = Number(payload["value"]);
    next.pHelp = value;
    next.gaugeTrace.push({ envStep: event.env_step, value });
    return next;
  }

  // termination
  next.terminated = String(payload["reason"] ?? "unknown");
  next.pending = null;
  return next;
}

/** Replay a prefix of the stream from scratch; the reference fold. */
export function buildView(snapshot: Snapshot, events: TrialEvent[]): SessionView {
  return events.reduce(applyEvent, initialView(snapshot));
}
