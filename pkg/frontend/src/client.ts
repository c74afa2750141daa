// Live-session client: snapshot, long-polled event stream, and turn posting.
// The trial server serializes all session state; this side only accumulates
// events into the view and forwards the human's inputs.

import { PROTOCOL_VERSION, ProtocolError } from "./events.js";
import type { EventsBatch, Snapshot, TrialEvent } from "./events.js";

export interface HumanTurnMessage {
  text?: string;
  perform?: number;
  decision?: "accept" | "reject";
}

export class SessionClient {
  private seen = 0;

  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  /** Fetch and validate the snapshot; hard error on protocol mismatch. */
  async connect(): Promise<Snapshot> {
    const response = await this.fetchFn(`${this.baseUrl}/snapshot`);
    if (!response.ok) throw new Error(`snapshot failed: ${response.status}`);
    const snapshot = (await response.json()) as Snapshot;
    if (snapshot.protocol_version !== PROTOCOL_VERSION) {
      throw new ProtocolError(
        `server speaks protocol ${snapshot.protocol_version}, client speaks ${PROTOCOL_VERSION}`,
      );
    }
    this.seen = 0;
    return snapshot;
  }

  /** One long-poll round; advances the cursor past returned events. */
  async nextEvents(): Promise<{ events: TrialEvent[]; done: boolean }> {
    const response = await this.fetchFn(`${this.baseUrl}/events?since=${this.seen}`);
    if (!response.ok) throw new Error(`events failed: ${response.status}`);
    const batch = (await response.json()) as EventsBatch;
    this.seen += batch.events.length;
    return { events: batch.events, done: batch.done };
  }

  /** Enqueue the human's turn; resolves once the server accepted it. */
  async sendHumanTurn(turn: HumanTurnMessage): Promise<void> {
    const response = await this.fetchFn(`${this.baseUrl}/turn`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(turn),
    });
    if (response.status === 400) {
      const body = (await response.json()) as { error?: string };
      throw new Error(body.error ?? "invalid turn");
    }
    if (!response.ok) throw new Error(`turn failed: ${response.status}`);
  }

  async close(): Promise<void> {
    await this.fetchFn(`${this.baseUrl}/close`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: "{}",
    });
  }
}
