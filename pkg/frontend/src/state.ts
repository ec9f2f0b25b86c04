/**
 * Controller state for the annotation console.
 *
 * Pure view/controller over the service API: it stages label choices,
 * submits them, and mirrors server state. It never infers labels or
 * computes metrics; a page reload reconstructs the same state from the
 * endpoints.
 */

import {
  ApiClient,
  BudgetInfo,
  LabelChoice,
  MetricsRow,
  PendingItem,
  ProjectionPoint,
  RejectedItem,
  SessionStatus,
} from './api.js';

export interface Snapshot {
  status: SessionStatus | 'connecting';
  kappa: number;
  budget: BudgetInfo | null;
  pending: PendingItem[];
  choices: ReadonlyMap<number, number>;
  projection: ProjectionPoint[];
  metrics: MetricsRow[];
  banner: string | null;
  submitting: boolean;
  rejected: RejectedItem[];
}

export class AnnotationConsole {
  private status: SessionStatus | 'connecting' = 'connecting';
  private kappa = 0;
  private budget: BudgetInfo | null = null;
  private pending: PendingItem[] = [];
  private choices = new Map<number, number>();
  private projection: ProjectionPoint[] = [];
  private metrics: MetricsRow[] = [];
  private banner: string | null = null;
  private submitting = false;
  private rejected: RejectedItem[] = [];
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly api: ApiClient,
    readonly sessionId: string,
  ) {}

  snapshot(): Snapshot {
    return {
      status: this.status,
      kappa: this.kappa,
      budget: this.budget,
      pending: this.pending,
      choices: this.choices,
      projection: this.projection,
      metrics: this.metrics,
      banner: this.banner,
      submitting: this.submitting,
      rejected: this.rejected,
    };
  }

  /** One polling tick. Failures raise a retry banner and keep all state. */
  async refresh(): Promise<void> {
    if (this.submitting) {
      return; // polling is paused while a submission is in flight
    }
    try {
      const info = await this.api.getSession(this.sessionId);
      const pending =
        info.status === 'awaiting-labels' ? await this.api.getPending(this.sessionId) : [];
      const projection = await this.api.getProjection(this.sessionId);
      const metrics = await this.api.getMetrics(this.sessionId);
      this.status = info.status;
      this.kappa = info.kappa;
      this.budget = info.budget;
      this.pending = pending;
      this.projection = projection;
      this.metrics = metrics.rows;
      this.banner = info.status === 'stepping' ? 'step running' : null;
      const pendingIds = new Set(pending.map((p) => p.sample_id));
      for (const id of [...this.choices.keys()]) {
        if (!pendingIds.has(id)) {
          this.choices.delete(id); // answered or advanced past
        }
      }
    } catch (err) {
      this.banner = `connection problem, retrying: ${(err as Error).message}`;
    }
  }

  /** Stage a label for a pending item (unset until submitted). */
  choose(sampleId: number, label: number): void {
    if (!this.pending.some((p) => p.sample_id === sampleId)) {
      throw new Error(`sample ${sampleId} is not pending`);
    }
    this.choices.set(sampleId, label);
  }

  unchoose(sampleId: number): void {
    this.choices.delete(sampleId);
  }

  /**
   * Submit every staged choice. At most one submission is in flight; on
   * network failure the unsent choices are preserved locally. Server-side
   * rejections are surfaced and their staged choices dropped so the next
   * refresh reconciles them.
   */
  async submit(): Promise<void> {
    if (this.submitting || this.choices.size === 0) {
      return;
    }
    const body: LabelChoice[] = [...this.choices.entries()].map(([sample_id, label]) => ({
      sample_id,
      label,
    }));
    this.submitting = true;
    try {
      const result = await this.api.postLabels(this.sessionId, body);
      this.rejected = result.rejected;
      this.choices.clear();
      this.banner = result.rejected.length ? `${result.rejected.length} item(s) rejected` : null;
    } catch (err) {
      this.banner = `submit failed, choices kept: ${(err as Error).message}`;
      return; // choices intentionally preserved
    } finally {
      this.submitting = false;
    }
    await this.refresh();
  }

  startPolling(intervalMs = 1000): void {
    this.stopPolling();
    this.timer = setInterval(() => {
      void this.refresh();
    }, intervalMs);
  }

  stopPolling(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
