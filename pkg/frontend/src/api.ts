// Typed client for the validation service HTTP API. The UI talks to the
// backend exclusively through this module.

export interface ProposedLabels {
  filtered: boolean;
  frames: string[];
  rationales: Record<string, string>;
}

export interface QueueItem {
  item_id: string;
  post: { id: string; text: string; created_at: number };
  proposed: ProposedLabels;
  lease_expiry: string;
}

export interface DecisionPayload {
  item_id: string;
  annotator: string;
  kept: string[];
  added: string[];
  filtered: boolean;
  elapsed_seconds: number;
}

export interface Stats {
  items_total: number;
  items_done: number;
  items_filtered: number;
  elapsed_mean: number | null;
  elapsed_sd: number | null;
  per_frame: Record<
    string,
    { proposed_count: number; kept_count: number; added_count: number }
  >;
  speedup_vs_baseline: number | null;
}

export interface FrameInfo {
  id: string;
  tag: string;
  name: string;
  theme: string;
  definition: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public errorType: string,
    detail: string,
  ) {
    super(detail);
  }
}

type Fetch = typeof fetch;

export class ValidationApi {
  constructor(
    private baseUrl: string,
    private fetchImpl: Fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(
        response.status,
        body.error ?? "UnknownError",
        body.detail ?? "request failed",
      );
    }
    return body as T;
  }

  async nextItem(annotator: string): Promise<QueueItem | null> {
    const body = await this.request<QueueItem | { empty: true }>(
      `/api/queue/next?annotator=${encodeURIComponent(annotator)}`,
    );
    return "empty" in body ? null : body;
  }

  async submitDecision(payload: DecisionPayload): Promise<unknown> {
    return this.request("/api/decisions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  async stats(baseline?: number): Promise<Stats> {
    const query = baseline === undefined ? "" : `?baseline=${baseline}`;
    return this.request<Stats>(`/api/stats${query}`);
  }

  async frames(): Promise<FrameInfo[]> {
    return this.request<FrameInfo[]>("/api/frames");
  }
}
