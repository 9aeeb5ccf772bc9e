// Live typing playground state: drives the simulated magnet through the
// service, polls the append-only event log, and walks the calibration
// wizard (silence, reference-click polarity, two-anchor regeneration).

import { ApiError, MagkeyClient } from "./api.js";
import type { KeyEventRecord, SessionOptions, SessionState } from "./api.js";

export interface PollUpdate {
  events: KeyEventRecord[];
  lastKey: string | null;
  lastEvent: KeyEventRecord | null;
}

export class Playground {
  session: SessionState | null = null;
  since = 0;
  lastEvent: KeyEventRecord | null = null;
  expired = false;

  constructor(readonly client: MagkeyClient) {}

  get sessionId(): string {
    if (!this.session) throw new Error("no active session");
    return this.session.id;
  }

  async start(options: SessionOptions = {}): Promise<SessionState> {
    this.session = await this.client.createSession(options);
    this.since = 0;
    this.lastEvent = null;
    this.expired = false;
    return this.session;
  }

  private async guard<T>(work: () => Promise<T>): Promise<T> {
    try {
      return await work();
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.expired = true;
      }
      throw err;
    }
  }

  placeMagnet(x: number, y: number, settleS = 0): Promise<unknown> {
    return this.guard(() => this.client.setMagnet(this.sessionId, [x, y], settleS));
  }

  liftMagnet(settleS = 0): Promise<unknown> {
    return this.guard(() => this.client.setMagnet(this.sessionId, null, settleS));
  }

  async poll(): Promise<PollUpdate> {
    const body = await this.guard(() =>
      this.client.pollEvents(this.sessionId, this.since),
    );
    this.since = body.next_since;
    if (body.events.length > 0) {
      this.lastEvent = body.events[body.events.length - 1];
    }
    return {
      events: body.events,
      lastKey: this.lastEvent?.key ?? null,
      lastEvent: this.lastEvent,
    };
  }

  // -- calibration wizard steps -------------------------------------------

  async runSilence(durationS = 15): Promise<{ warning: string | null }> {
    const body = await this.guard(() =>
      this.client.calibrate(this.sessionId, "silence", { duration_s: durationS }),
    );
    return { warning: (body.warning as string | null) ?? null };
  }

  async runPolarity(cell?: number): Promise<{ polarity: string }> {
    const extra = cell === undefined ? {} : { cell };
    const body = await this.guard(() =>
      this.client.calibrate(this.sessionId, "polarity", extra),
    );
    return { polarity: body.polarity as string };
  }

  async runAnchors(cells?: [number, number]): Promise<{ gains: number[] }> {
    const extra = cells === undefined ? {} : { cells };
    const body = await this.guard(() =>
      this.client.calibrate(this.sessionId, "anchors", extra),
    );
    const affine = body.affine as { a: number[] };
    return { gains: affine.a };
  }
}

// Posterior shading for the top-k overlay: probability per cell, scaled so
// the strongest cell is fully opaque.
export function posteriorShading(event: KeyEventRecord | null): Map<number, number> {
  const shading = new Map<number, number>();
  if (!event || event.top.length === 0) return shading;
  const max = Math.max(...event.top.map((e) => e.p));
  if (max <= 0) return shading;
  for (const entry of event.top) {
    shading.set(entry.cell, entry.p / max);
  }
  return shading;
}
