/**
 * Typed client for the annotation service. Every number the console shows
 * comes verbatim from one of these endpoints; the client does no math.
 */

export type SessionStatus = 'awaiting-labels' | 'stepping' | 'finished' | 'failed';

export interface BudgetInfo {
  classes: number;
  schedule: number[];
  kappa_max: number;
  epsilon: number;
  total_extra: number;
  spent: number;
}

export interface SessionInfo {
  status: SessionStatus;
  kappa: number;
  budget: BudgetInfo;
}

export interface Neighbor {
  id: number;
  label: number;
  distance: number;
}

export interface PendingItem {
  sample_id: number;
  cluster: number;
  x: number;
  y: number;
  neighbors: Neighbor[];
}

export interface ProjectionPoint {
  id: number;
  x: number;
  y: number;
  cluster: number;
  labeled: boolean;
}

export interface MetricsRow {
  kappa: number;
  labels_spent: number;
  bcubed: number;
  top1: number;
  mean_per_class: number;
}

export interface MetricsResponse {
  status: string;
  rows: MetricsRow[];
}

export interface LabelChoice {
  sample_id: number;
  label: number;
}

export interface RejectedItem {
  sample_id?: number;
  reason: string;
}

export interface PostLabelsResult {
  accepted: number;
  rejected: RejectedItem[];
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly field?: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchFn?: FetchLike,
  ) {
    // bind so injected fakes and the real browser fetch behave alike
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const message = typeof body?.error === 'string' ? body.error : `HTTP ${response.status}`;
      throw new ApiError(response.status, message, body?.field);
    }
    return body as T;
  }

  createSession(config: unknown): Promise<{ id: string }> {
    return this.request('/sessions', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(config),
    });
  }

  getSession(id: string): Promise<SessionInfo> {
    return this.request(`/sessions/${id}`);
  }

  getPending(id: string): Promise<PendingItem[]> {
    return this.request(`/sessions/${id}/pending`);
  }

  postLabels(id: string, choices: LabelChoice[]): Promise<PostLabelsResult> {
    return this.request(`/sessions/${id}/labels`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(choices),
    });
  }

  getProjection(id: string): Promise<ProjectionPoint[]> {
    return this.request(`/sessions/${id}/projection`);
  }

  getMetrics(id: string): Promise<MetricsResponse> {
    return this.request(`/sessions/${id}/metrics`);
  }
}
