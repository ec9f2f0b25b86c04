/**
 * Scatter view of the projected feature space. Layout and hit-testing are
 * pure functions so they can be tested without a canvas.
 */

import { ProjectionPoint } from './api.js';

export interface LayoutPoint extends ProjectionPoint {
  pending: boolean;
  screenX: number;
  screenY: number;
}

const PALETTE = [
  '#4e79a7',
  '#f28e2b',
  '#59a14f',
  '#e15759',
  '#b07aa1',
  '#76b7b2',
  '#edc948',
  '#ff9da7',
  '#9c755f',
  '#bab0ac',
];

export function clusterColor(cluster: number): string {
  if (cluster < 0) {
    return '#888888';
  }
  return PALETTE[cluster % PALETTE.length];
}

/** Affine map from data bounds to pixel space, y axis flipped. */
export function layoutScatter(
  points: ProjectionPoint[],
  pendingIds: ReadonlySet<number>,
  width: number,
  height: number,
  margin = 24,
): LayoutPoint[] {
  if (points.length === 0) {
    return [];
  }
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const spanX = maxX - minX || 1;
  const spanY = maxY - minY || 1;
  const innerW = width - 2 * margin;
  const innerH = height - 2 * margin;
  return points.map((p) => ({
    ...p,
    pending: pendingIds.has(p.id),
    screenX: margin + ((p.x - minX) / spanX) * innerW,
    screenY: height - margin - ((p.y - minY) / spanY) * innerH,
  }));
}

/** Nearest point within `radius` pixels; pending points win ties. */
export function hitTest(
  layout: LayoutPoint[],
  px: number,
  py: number,
  radius = 10,
): LayoutPoint | null {
  let best: LayoutPoint | null = null;
  let bestDist = radius * radius;
  for (const p of layout) {
    const dx = p.screenX - px;
    const dy = p.screenY - py;
    const d2 = dx * dx + dy * dy;
    if (d2 < bestDist || (d2 === bestDist && p.pending && best !== null && !best.pending)) {
      best = p;
      bestDist = d2;
    }
  }
  return best;
}

export function drawScatter(
  ctx: CanvasRenderingContext2D,
  layout: LayoutPoint[],
  width: number,
  height: number,
  selectedId: number | null,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = '#fafafa';
  ctx.fillRect(0, 0, width, height);
  for (const p of layout) {
    ctx.beginPath();
    ctx.arc(p.screenX, p.screenY, p.labeled ? 5 : 3, 0, 2 * Math.PI);
    ctx.fillStyle = clusterColor(p.cluster);
    ctx.fill();
    if (p.labeled) {
      ctx.strokeStyle = '#222222';
      ctx.lineWidth = 1.5;
      ctx.stroke();
    }
  }
  // pending rings on top so they stay visible in dense regions
  for (const p of layout) {
    if (!p.pending && p.id !== selectedId) {
      continue;
    }
    ctx.beginPath();
    ctx.arc(p.screenX, p.screenY, p.id === selectedId ? 11 : 8, 0, 2 * Math.PI);
    ctx.strokeStyle = p.id === selectedId ? '#d62728' : '#ff7f0e';
    ctx.lineWidth = 2;
    ctx.stroke();
  }
}
