// Session flow state. The server is the single source of truth; this class
// only tracks the current session id, the annotator's in-progress choices
// (persisted to storage so a reload loses nothing), and which screen to show.

import { ApiClient, ApiError } from "./api.js";
import type { BiasReport, Quadrant, SessionView, UserProfileIn, Violation } from "./api.js";

export type Phase = "setup" | "annotate" | "retraining" | "report";

export interface DraftStorage {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const draftKey = (sessionId: string) => `emoloop-draft-${sessionId}`;

export class AnnotationFlow {
  phase: Phase = "setup";
  session: SessionView | null = null;
  report: BiasReport | null = null;
  choices: Record<string, Quadrant> = {};
  lastError: string | null = null;
  violations: Violation[] = [];
  topK = 10;

  constructor(
    public api: ApiClient,
    private storage: DraftStorage,
    private pollMs = 400,
  ) {}

  async start(profile: UserProfileIn, poolId: string): Promise<void> {
    const session = await this.api.createSession(profile, poolId);
    this.adopt(session);
  }

  async resume(sessionId: string): Promise<void> {
    const session = await this.api.getSession(sessionId);
    this.adopt(session);
  }

  /** Sync local state to a fresh server view, restoring any saved draft. */
  adopt(session: SessionView): void {
    this.session = session;
    this.lastError = null;
    if (session.state === "Finalized") {
      this.phase = "report";
      return;
    }
    if (session.state === "Retraining") {
      this.phase = "retraining";
      return;
    }
    this.phase = "annotate";
    const saved = this.loadDraft(session.session_id);
    const pending = new Set(session.pending_batch.map((item) => item.excerpt_id));
    this.choices = {};
    for (const [eid, quadrant] of Object.entries(saved)) {
      if (pending.has(eid)) this.choices[eid] = quadrant;
    }
  }

  choose(excerptId: string, quadrant: Quadrant): void {
    this.choices[excerptId] = quadrant;
    if (this.session) {
      this.storage.setItem(draftKey(this.session.session_id), JSON.stringify(this.choices));
    }
  }

  chosenCount(): number {
    return Object.keys(this.choices).length;
  }

  canSubmit(): boolean {
    if (!this.session || this.session.state !== "AwaitingAnnotations") return false;
    return this.session.pending_batch.every(
      (item) => this.choices[item.excerpt_id] !== undefined,
    );
  }

  progress(): { iteration: number; total: number; chosen: number; batch: number } {
    const s = this.session;
    if (!s) return { iteration: 0, total: 0, chosen: 0, batch: 0 };
    return {
      iteration: s.iteration + 1,
      total: s.max_iterations,
      chosen: this.chosenCount(),
      batch: s.pending_batch.length,
    };
  }

  /**
   * Submit the full batch. On a protocol conflict (409) the session is
   * refetched and choices are reconciled against the new pending batch; on a
   * network failure choices stay put so a retry loses nothing.
   */
  async submit(): Promise<void> {
    if (!this.session || !this.canSubmit()) return;
    const sessionId = this.session.session_id;
    const labels = this.session.pending_batch.map((item) => ({
      excerpt_id: item.excerpt_id,
      quadrant: this.choices[item.excerpt_id],
    }));
    let next: SessionView;
    try {
      next = await this.api.submitAnnotations(sessionId, labels);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.violations = err.violations;
        this.lastError = err.message;
        const fresh = await this.api.getSession(sessionId);
        this.adopt(fresh);
        return;
      }
      this.lastError = err instanceof Error ? err.message : String(err);
      return;
    }
    this.violations = [];
    this.storage.removeItem(draftKey(sessionId));
    this.choices = {};
    this.adopt(next);
    if (this.phase === "retraining") await this.pollUntilSettled();
  }

  async pollUntilSettled(): Promise<void> {
    while (this.session && this.phase === "retraining") {
      await new Promise((resolve) => setTimeout(resolve, this.pollMs));
      const fresh = await this.api.getSession(this.session.session_id);
      this.adopt(fresh);
    }
  }

  async loadReport(): Promise<void> {
    if (!this.session) return;
    this.report = await this.api.getReport(this.session.session_id, this.topK);
  }

  async setTopK(topK: number): Promise<void> {
    this.topK = topK;
    await this.loadReport();
  }

  loadDraft(sessionId: string): Record<string, Quadrant> {
    const raw = this.storage.getItem(draftKey(sessionId));
    if (!raw) return {};
    try {
      return JSON.parse(raw) as Record<string, Quadrant>;
    } catch {
      return {};
    }
  }
}
