/**
 * DOM wiring for the annotation console. All logic worth testing lives in
 * api.ts / state.ts / scatter.ts / metrics.ts; this file only renders.
 */

import { ApiClient, PendingItem } from './api.js';
import { budgetGauge, drawGauge, drawMetrics, metricSeries } from './metrics.js';
import { drawScatter, hitTest, layoutScatter, LayoutPoint } from './scatter.js';
import { AnnotationConsole } from './state.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

let consoleState: AnnotationConsole | null = null;
let selectedId: number | null = null;
let layout: LayoutPoint[] = [];

function renderPendingList(): void {
  if (!consoleState) {
    return;
  }
  const snap = consoleState.snapshot();
  const list = el<HTMLDivElement>('pending-list');
  const classes = snap.budget?.classes ?? 0;
  list.innerHTML = '';
  if (snap.pending.length === 0) {
    list.textContent = snap.status === 'finished' ? 'run finished' : 'no pending items';
  }
  for (const item of snap.pending) {
    const card = document.createElement('div');
    card.className = 'card' + (item.sample_id === selectedId ? ' selected' : '');
    const picked = snap.choices.get(item.sample_id);
    const neighbors = item.neighbors
      .map((n) => `#${n.id}→${n.label} (${n.distance.toFixed(3)})`)
      .join(', ');
    const title = document.createElement('div');
    title.textContent = `sample ${item.sample_id} · cluster ${item.cluster}`;
    const context = document.createElement('div');
    context.className = 'neighbors';
    context.textContent = `labeled neighbors: ${neighbors || 'none'}`;
    card.append(title, context);
    const buttons = document.createElement('div');
    for (let c = 0; c < classes; c++) {
      const b = document.createElement('button');
      b.textContent = String(c);
      b.className = picked === c ? 'chosen' : '';
      b.onclick = () => {
        consoleState?.choose(item.sample_id, c);
        renderAll();
      };
      buttons.appendChild(b);
    }
    card.appendChild(buttons);
    card.onclick = () => {
      selectedId = item.sample_id;
      renderAll();
    };
    list.appendChild(card);
  }
  const submit = el<HTMLButtonElement>('submit');
  submit.disabled = snap.submitting || snap.choices.size === 0;
  submit.textContent = snap.submitting
    ? 'submitting…'
    : `submit ${snap.choices.size} label(s)`;
}

function renderInspection(point: LayoutPoint | null): void {
  const box = el<HTMLDivElement>('inspection');
  if (!point) {
    box.textContent = '';
    return;
  }
  box.textContent =
    `sample ${point.id} · cluster ${point.cluster}` +
    (point.labeled ? ' · labeled' : '') +
    (point.pending ? ' · awaiting label' : '');
}

function renderAll(): void {
  if (!consoleState) {
    return;
  }
  const snap = consoleState.snapshot();
  el<HTMLSpanElement>('status').textContent =
    `${snap.status} · step ${snap.kappa}` + (snap.banner ? ` · ${snap.banner}` : '');

  const scatter = el<HTMLCanvasElement>('scatter');
  const ctx = scatter.getContext('2d');
  if (ctx) {
    const pendingIds = new Set(snap.pending.map((p) => p.sample_id));
    layout = layoutScatter(snap.projection, pendingIds, scatter.width, scatter.height);
    drawScatter(ctx, layout, scatter.width, scatter.height, selectedId);
  }

  const chart = el<HTMLCanvasElement>('metrics');
  const mctx = chart.getContext('2d');
  if (mctx) {
    drawMetrics(mctx, metricSeries(snap.metrics), chart.width, chart.height);
  }
  const gaugeCanvas = el<HTMLCanvasElement>('gauge');
  const gctx = gaugeCanvas.getContext('2d');
  if (gctx && snap.budget) {
    drawGauge(gctx, budgetGauge(snap.budget), gaugeCanvas.width, gaugeCanvas.height);
  }
  renderPendingList();
}

async function attach(baseUrl: string, sessionId: string): Promise<void> {
  consoleState?.stopPolling();
  const api = new ApiClient(baseUrl);
  consoleState = new AnnotationConsole(api, sessionId);
  await consoleState.refresh();
  consoleState.startPolling(1000);
  setInterval(renderAll, 500);
  renderAll();
}

function wire(): void {
  el<HTMLButtonElement>('attach').onclick = async () => {
    const baseUrl = el<HTMLInputElement>('base-url').value.replace(/\/$/, '');
    const existing = el<HTMLInputElement>('session-id').value.trim();
    try {
      if (existing) {
        await attach(baseUrl, existing);
        return;
      }
      const configText = el<HTMLTextAreaElement>('config').value.trim();
      const api = new ApiClient(baseUrl);
      const { id } = await api.createSession(configText ? JSON.parse(configText) : {});
      el<HTMLInputElement>('session-id').value = id;
      await attach(baseUrl, id);
    } catch (err) {
      el<HTMLSpanElement>('status').textContent = `error: ${(err as Error).message}`;
    }
  };

  el<HTMLButtonElement>('submit').onclick = () => {
    void consoleState?.submit().then(renderAll);
  };

  el<HTMLCanvasElement>('scatter').onclick = (event) => {
    const canvas = el<HTMLCanvasElement>('scatter');
    const rect = canvas.getBoundingClientRect();
    const hit = hitTest(layout, event.clientX - rect.left, event.clientY - rect.top);
    selectedId = hit ? hit.id : null;
    renderInspection(hit);
    renderAll();
  };
}

wire();
