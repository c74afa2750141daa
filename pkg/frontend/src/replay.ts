// Playback of a saved trial log: play/pause/scrub over the event stream.
//
// Scrubbing forward applies only the missing suffix to the current view;
// scrubbing backward rebuilds from scratch. Both must land on the same view
// as a fresh fold of events[0..k] - the prefix-fold property the tests pin.

import type { LogFile, Snapshot, TrialEvent } from "./events.js";
import { applyEvent, buildView, initialView } from "./view.js";
import type { SessionView } from "./view.js";

export class Playback {
  private position = 0;
  private view: SessionView;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    readonly snapshot: Snapshot,
    readonly events: TrialEvent[],
    private readonly onChange: (view: SessionView, position: number) => void,
    private readonly tickMs = 400,
  ) {
    this.view = initialView(snapshot);
  }

  get length(): number {
    return this.events.length;
  }

  get at(): number {
    return this.position;
  }

  current(): SessionView {
    return this.view;
  }

  /** Move to event index k (view reflects events[0..k)). */
  scrub(k: number): SessionView {
    const target = Math.max(0, Math.min(k, this.events.length));
    if (target >= this.position) {
      for (let i = this.position; i < target; i++) {
        this.view = applyEvent(this.view, this.events[i]!);
      }
    } else {
      this.view = buildView(this.snapshot, this.events.slice(0, target));
    }
    this.position = target;
    this.onChange(this.view, this.position);
    return this.view;
  }

  stepForward(): SessionView {
    return this.scrub(this.position + 1);
  }

  play(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => {
      if (this.position >= this.events.length) {
        this.pause();
        return;
      }
      this.stepForward();
    }, this.tickMs);
  }

  pause(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  get playing(): boolean {
    return this.timer !== null;
  }
}

/** Build a playback session from saved log content, synthesizing the snapshot
 * a live session would have sent (replay and live share the renderer). */
export function playbackFromLog(
  log: LogFile,
  snapshot: Snapshot,
  onChange: (view: SessionView, position: number) => void,
): Playback {
  return new Playback(snapshot, log.events, onChange);
}
