// Wire schema shared with the trial server and log files. The protocol is the
// trial log's event stream plus one snapshot message; bump PROTOCOL_VERSION in
// lockstep with the server.

export const PROTOCOL_VERSION = 1;

export type Actor = "R" | "H" | "sys";
export type EventKind = "physical" | "verbal" | "allocation" | "phelp" | "termination";
export type Agent = "H" | "R";

export interface TrialEvent {
  env_step: number;
  actor: Actor;
  kind: EventKind;
  payload: Record<string, unknown>;
}

export interface PlanStep {
  index: number;
  text: string;
}

export interface HierarchyEntry {
  label: string;
  start: number;
  end: number;
}

export interface Snapshot {
  protocol_version: number;
  scenario: string;
  method: string;
  alpha: number;
  grid: {
    width: number;
    height: number;
    furniture: Record<string, [number, number][]>;
  };
  objects: Record<string, string>;
  agents: Record<string, [number, number]>;
  plan: PlanStep[];
  hierarchy: HierarchyEntry[];
  events_len: number;
  done: boolean;
}

export interface EventsBatch {
  since: number;
  events: TrialEvent[];
  done: boolean;
}

export interface LogFile {
  config: Record<string, unknown>;
  snapshot: Snapshot;
  events: TrialEvent[];
}

export class ProtocolError extends Error {}

/** Parse a saved trial log (header line + one JSON event per line). */
export function parseLogFile(text: string): LogFile {
  const lines = text.split("\n").filter((line) => line.trim().length > 0);
  if (lines.length === 0) throw new ProtocolError("empty log file");
  const header = JSON.parse(lines[0]!) as {
    format?: string;
    version?: number;
    config?: Record<string, unknown>;
    snapshot?: Snapshot;
  };
  if (header.format !== "trial-log") throw new ProtocolError("not a trial log file");
  if (header.version !== PROTOCOL_VERSION) {
    throw new ProtocolError(`unsupported log version ${header.version}`);
  }
  if (!header.snapshot) {
    throw new ProtocolError("log has no session snapshot; re-export it for replay");
  }
  const events = lines.slice(1).map((line) => JSON.parse(line) as TrialEvent);
  return { config: header.config ?? {}, snapshot: header.snapshot, events };
}
