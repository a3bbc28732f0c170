import type { DraftStorage } from "../src/state.js";
import type {
  BiasReport,
  PoolInfo,
  Quadrant,
  SessionView,
  UserProfileIn,
  Violation,
} from "../src/api.js";
import { ApiError } from "../src/api.js";

export function memoryStorage(): DraftStorage & { dump(): Record<string, string> } {
  const map = new Map<string, string>();
  return {
    getItem: (key) => map.get(key) ?? null,
    setItem: (key, value) => void map.set(key, value),
    removeItem: (key) => void map.delete(key),
    dump: () => Object.fromEntries(map),
  };
}

export function pendingBatch(ids: string[]) {
  return ids.map((excerpt_id) => ({ excerpt_id, title: `excerpt ${excerpt_id}`, audio_uri: null }));
}

export function sessionView(overrides: Partial<SessionView> = {}): SessionView {
  return {
    session_id: "s1",
    state: "AwaitingAnnotations",
    iteration: 0,
    max_iterations: 3,
    batch_size: 2,
    pool_size: 20,
    annotations_count: 0,
    pending_batch: pendingBatch(["a", "b"]),
    ...overrides,
  };
}

/** Scriptable stand-in for ApiClient: queue responses, record calls. */
export class FakeApi {
  submissions: { excerpt_id: string; quadrant: Quadrant }[][] = [];
  submitQueue: (SessionView | ApiError | Error)[] = [];
  sessionQueue: SessionView[] = [];
  pools: PoolInfo[] = [{ pool_id: "demo", size: 20 }];
  report: BiasReport | null = null;

  async listPools(): Promise<PoolInfo[]> {
    return this.pools;
  }

  async createSession(_profile: UserProfileIn, _poolId: string): Promise<SessionView> {
    return this.sessionQueue.shift()!;
  }

  async getSession(_sessionId: string): Promise<SessionView> {
    return this.sessionQueue.shift()!;
  }

  async submitAnnotations(
    _sessionId: string,
    labels: { excerpt_id: string; quadrant: Quadrant }[],
  ): Promise<SessionView> {
    this.submissions.push(labels);
    const next = this.submitQueue.shift()!;
    if (next instanceof Error) throw next;
    return next;
  }

  async getReport(): Promise<BiasReport> {
    return this.report!;
  }

  audioUrl(excerptId: string): string {
    return `/api/excerpts/${excerptId}/audio`;
  }
}

export function conflict(violations: Violation[]): ApiError {
  return new ApiError(409, "protocol violation", violations);
}

export async function until(cond: () => boolean, timeoutMs = 60_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!cond()) {
    if (Date.now() > deadline) throw new Error("timed out waiting for condition");
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
}
