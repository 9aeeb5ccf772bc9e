// Typed client for the magkey HTTP service. The UI performs no inference of
// its own: every detection it renders originates from a service event.

export interface BoardInfo {
  rows: number;
  cols: number;
  cell_size: number;
  width: number;
  height: number;
  sensor_pos: number[];
  magnet_height: number;
}

export interface KeyWire {
  id: string;
  label: string;
  cells: number[];
}

export interface LayoutWire {
  klv: number;
  id: string;
  board: { rows: number; cols: number; cell_size: number };
  keys: KeyWire[];
  reference_key: string | null;
}

export interface Violation {
  kind: string;
  message: string;
  key?: string | null;
  cell?: number | null;
}

export interface PosteriorEntry {
  cell: number;
  p: number;
}

export interface KeyEventRecord {
  seq: number;
  type: string;
  t_start: number;
  t_end: number;
  cell: number;
  pos: number[];
  top: PosteriorEntry[];
  key: string | null;
  label: string | null;
}

export interface SessionState {
  id: string;
  clock: number;
  calibrated: boolean;
  polarity: string;
  affine: { a: number[]; b: number[] } | null;
  layout: string | null;
  magnet: number[] | null;
  n_events: number;
  silence: { mean: number[]; var: number[]; n: number } | null;
}

export interface SessionOptions {
  layout?: string;
  magnet_scale?: number;
  flip_polarity?: boolean;
  noise_sigma?: number;
  seed?: number;
  auto_silence?: boolean;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly violations: Violation[] = [],
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<never> {
  let message = `${resp.status} ${resp.statusText}`;
  let violations: Violation[] = [];
  try {
    const body = await resp.json();
    const detail = body.detail ?? body;
    if (typeof detail === "string") message = detail;
    else if (detail?.violations) {
      violations = detail.violations;
      message = violations.map((v) => v.message).join("; ");
    } else if (body.error) message = body.error;
  } catch {
    // keep the status line
  }
  throw new ApiError(resp.status, message, violations);
}

export class MagkeyClient {
  constructor(readonly baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!resp.ok) await parseError(resp);
    if (resp.status === 204) return undefined as T;
    return (await resp.json()) as T;
  }

  getBoard(): Promise<BoardInfo> {
    return this.request("/board");
  }

  async listLayouts(): Promise<string[]> {
    const body = await this.request<{ layouts: string[] }>("/layouts");
    return body.layouts;
  }

  getLayout(id: string): Promise<LayoutWire> {
    return this.request(`/layouts/${id}`);
  }

  putLayout(layout: LayoutWire): Promise<LayoutWire> {
    return this.request(`/layouts/${layout.id}`, {
      method: "PUT",
      body: JSON.stringify(layout),
    });
  }

  deleteLayout(id: string): Promise<void> {
    return this.request(`/layouts/${id}`, { method: "DELETE" });
  }

  async createSession(options: SessionOptions = {}): Promise<SessionState> {
    const body = await this.request<{ id: string; state: SessionState }>(
      "/sessions",
      { method: "POST", body: JSON.stringify(options) },
    );
    return body.state;
  }

  getSession(id: string): Promise<SessionState> {
    return this.request(`/sessions/${id}`);
  }

  setMagnet(
    id: string,
    pos: [number, number] | null,
    settleS = 0,
    transitionS?: number,
  ): Promise<{ clock: number; magnet: number[] | null }> {
    const body: Record<string, unknown> =
      pos === null ? { absent: true } : { pos };
    if (settleS > 0) body.settle_s = settleS;
    if (transitionS !== undefined) body.transition_s = transitionS;
    return this.request(`/sessions/${id}/magnet`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  pollEvents(
    id: string,
    since: number,
  ): Promise<{ events: KeyEventRecord[]; next_since: number; clock: number }> {
    return this.request(`/sessions/${id}/events?since=${since}`);
  }

  calibrate(
    id: string,
    step: "silence" | "polarity" | "anchors",
    extra: Record<string, unknown> = {},
  ): Promise<Record<string, unknown>> {
    return this.request(`/sessions/${id}/calibrate`, {
      method: "POST",
      body: JSON.stringify({ step, ...extra }),
    });
  }
}
