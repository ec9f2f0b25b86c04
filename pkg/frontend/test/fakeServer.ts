/**
 * In-memory fake of the annotation service implementing its documented
 * semantics: pending eigen-sample queries per evolution step, per-item
 * label validation, step advancement once the pending set empties, and
 * verbatim metric rows. Used to test the console without a backend.
 */

import { FetchLike, LabelChoice, MetricsRow, PendingItem } from '../src/api.js';

export interface FakeOptions {
  classes: number;
  kappaMax: number;
  perStep: number;
  samples: number;
  truth: (sampleId: number) => number;
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}

export class FakeService {
  kappa = 0;
  status: 'awaiting-labels' | 'finished' = 'finished';
  pending: PendingItem[] = [];
  answered = new Map<number, number>();
  labeled = new Set<number>();
  rows: MetricsRow[] = [];
  postedBodies: LabelChoice[][] = [];
  fetchCalls = 0;
  failNextRequest = false;

  private nextSample = 0;

  constructor(readonly opts: FakeOptions) {
    for (let c = 0; c < opts.classes; c++) {
      this.labeled.add(this.takeSample()); // indicators
    }
    this.rows.push(this.makeRow());
    this.prepareStep();
  }

  private takeSample(): number {
    return this.nextSample++;
  }

  private makeRow(): MetricsRow {
    return {
      kappa: this.kappa,
      labels_spent: this.labeled.size - this.opts.classes,
      bcubed: 0.5 + 0.05 * this.kappa,
      top1: 0.4 + 0.06 * this.kappa,
      mean_per_class: 0.38 + 0.06 * this.kappa,
    };
  }

  private prepareStep(): void {
    if (this.kappa >= this.opts.kappaMax) {
      this.status = 'finished';
      this.pending = [];
      return;
    }
    this.pending = [];
    this.answered.clear();
    for (let i = 0; i < this.opts.perStep; i++) {
      const id = this.takeSample();
      this.pending.push({
        sample_id: id,
        cluster: i,
        x: Math.cos(id),
        y: Math.sin(id),
        neighbors: [{ id: 0, label: this.opts.truth(0), distance: 0.25 + i }],
      });
    }
    this.status = 'awaiting-labels';
  }

  private unanswered(): PendingItem[] {
    return this.pending.filter((p) => !this.answered.has(p.sample_id));
  }

  private handleLabels(body: LabelChoice[]): { accepted: number; rejected: object[] } {
    const rejected: { sample_id: number; reason: string }[] = [];
    let accepted = 0;
    const pendingIds = new Set(this.pending.map((p) => p.sample_id));
    for (const item of body) {
      if (!pendingIds.has(item.sample_id)) {
        rejected.push({ sample_id: item.sample_id, reason: 'not pending' });
      } else if (this.answered.has(item.sample_id)) {
        rejected.push({ sample_id: item.sample_id, reason: 'already answered' });
      } else if (item.label < 0 || item.label >= this.opts.classes) {
        rejected.push({ sample_id: item.sample_id, reason: 'label out of range' });
      } else {
        this.answered.set(item.sample_id, item.label);
        accepted++;
      }
    }
    if (this.unanswered().length === 0 && this.pending.length > 0) {
      for (const id of this.answered.keys()) {
        this.labeled.add(id);
      }
      this.kappa++;
      this.rows.push(this.makeRow());
      this.prepareStep();
    }
    return { accepted, rejected };
  }

  readonly fetch: FetchLike = async (input, init) => {
    this.fetchCalls++;
    if (this.failNextRequest) {
      this.failNextRequest = false;
      throw new Error('connection refused');
    }
    const url = new URL(input, 'http://fake');
    const path = url.pathname;
    if (path === '/sessions' && init?.method === 'POST') {
      return json({ id: 'fake-session' }, 201);
    }
    if (!path.startsWith('/sessions/fake-session')) {
      return json({ error: 'unknown session' }, 404);
    }
    const rest = path.slice('/sessions/fake-session'.length);
    if (rest === '' || rest === '/') {
      const epsilon = this.opts.perStep === this.opts.classes ? this.opts.kappaMax : NaN;
      return json({
        status: this.status,
        kappa: this.kappa,
        budget: {
          classes: this.opts.classes,
          schedule: Array(this.opts.kappaMax).fill(this.opts.perStep / this.opts.classes),
          kappa_max: this.opts.kappaMax,
          epsilon,
          total_extra: this.opts.perStep * this.opts.kappaMax,
          spent: this.labeled.size - this.opts.classes,
        },
      });
    }
    if (rest === '/pending') {
      return json(this.unanswered());
    }
    if (rest === '/labels' && init?.method === 'POST') {
      const body = JSON.parse(String(init.body)) as LabelChoice[];
      this.postedBodies.push(body);
      return json(this.handleLabels(body));
    }
    if (rest === '/projection') {
      const points = [];
      for (let id = 0; id < this.opts.samples; id++) {
        points.push({
          id,
          x: Math.cos(id * 1.7),
          y: Math.sin(id * 1.7),
          cluster: id % this.opts.classes,
          labeled: this.labeled.has(id),
        });
      }
      return json(points);
    }
    if (rest === '/metrics') {
      return json({ status: this.status, rows: this.rows });
    }
    return json({ error: `no route for ${path}` }, 404);
  };
}
