// Typed client for the annotation service JSON API. The UI owns no state
// beyond the current session id; everything it shows comes from here.

export type Quadrant = "Q1" | "Q2" | "Q3" | "Q4";

export interface PendingItem {
  excerpt_id: string;
  title: string;
  audio_uri: string | null;
}

export interface SessionView {
  session_id: string;
  state: "AwaitingBatch" | "AwaitingAnnotations" | "Finalized" | "Retraining";
  iteration: number;
  max_iterations: number;
  batch_size: number;
  pool_size: number;
  annotations_count: number;
  pending_batch: PendingItem[];
}

export interface PoolInfo {
  pool_id: string;
  size: number;
}

export interface Violation {
  code: string;
  excerpt_ids: string[];
  detail: string;
}

export interface BiasReport {
  schema_version: number;
  session_id: string;
  top_k: number;
  requested_top_k: number;
  clamped: boolean;
  ranking: [string, number][];
  counts: Record<string, number>;
  share: Record<string, number>;
  mean_q2: Record<string, number | null>;
  config: Record<string, unknown>;
}

export interface UserProfileIn {
  display_name: string;
  political_view: string;
  vote_intent: "left" | "right" | "blank";
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public violations: Violation[] = [],
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      let detail = `${response.status}`;
      let violations: Violation[] = [];
      try {
        const body = await response.json();
        detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
        if (Array.isArray(body.violations)) violations = body.violations;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail, violations);
    }
    return (await response.json()) as T;
  }

  listPools(): Promise<PoolInfo[]> {
    return this.request<PoolInfo[]>("/api/pools");
  }

  createSession(profile: UserProfileIn, poolId: string): Promise<SessionView> {
    return this.request<SessionView>("/api/sessions", {
      method: "POST",
      body: JSON.stringify({ user_profile: profile, pool_id: poolId }),
    });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request<SessionView>(`/api/sessions/${sessionId}`);
  }

  submitAnnotations(
    sessionId: string,
    labels: { excerpt_id: string; quadrant: Quadrant }[],
  ): Promise<SessionView> {
    return this.request<SessionView>(`/api/sessions/${sessionId}/annotations`, {
      method: "POST",
      body: JSON.stringify({ labels }),
    });
  }

  getReport(sessionId: string, topK: number): Promise<BiasReport> {
    return this.request<BiasReport>(`/api/sessions/${sessionId}/report?top_k=${topK}`);
  }

  audioUrl(excerptId: string): string {
    return `${this.baseUrl}/api/excerpts/${excerptId}/audio`;
  }
}
