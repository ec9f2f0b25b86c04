/**
 * Metric charts and the budget gauge. Series and gauge values are copied
 * verbatim from the metrics/session endpoints; no client-side math beyond
 * pixel placement.
 */

import { BudgetInfo, MetricsRow } from './api.js';

export type MetricName = 'bcubed' | 'top1' | 'mean_per_class';

export interface Series {
  name: MetricName;
  color: string;
  points: { kappa: number; value: number }[];
}

const SERIES_COLORS: Record<MetricName, string> = {
  bcubed: '#4e79a7',
  top1: '#e15759',
  mean_per_class: '#59a14f',
};

export function metricSeries(rows: MetricsRow[]): Series[] {
  const names: MetricName[] = ['bcubed', 'top1', 'mean_per_class'];
  return names.map((name) => ({
    name,
    color: SERIES_COLORS[name],
    points: rows.map((r) => ({ kappa: r.kappa, value: r[name] })),
  }));
}

export interface Gauge {
  spent: number;
  cap: number;
}

/** Both numbers come from the session's budget document as-is. */
export function budgetGauge(budget: BudgetInfo): Gauge {
  return { spent: budget.spent, cap: budget.total_extra };
}

export function drawMetrics(
  ctx: CanvasRenderingContext2D,
  series: Series[],
  width: number,
  height: number,
): void {
  const margin = 30;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = '#fafafa';
  ctx.fillRect(0, 0, width, height);
  const kappas = series.flatMap((s) => s.points.map((p) => p.kappa));
  if (kappas.length === 0) {
    return;
  }
  const maxKappa = Math.max(...kappas, 1);
  const toX = (kappa: number) => margin + (kappa / maxKappa) * (width - 2 * margin);
  const toY = (value: number) => height - margin - value * (height - 2 * margin);

  ctx.strokeStyle = '#cccccc';
  ctx.lineWidth = 1;
  ctx.strokeRect(margin, margin, width - 2 * margin, height - 2 * margin);

  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.points.forEach((p, i) => {
      if (i === 0) {
        ctx.moveTo(toX(p.kappa), toY(p.value));
      } else {
        ctx.lineTo(toX(p.kappa), toY(p.value));
      }
    });
    ctx.stroke();
    ctx.fillStyle = s.color;
    for (const p of s.points) {
      ctx.beginPath();
      ctx.arc(toX(p.kappa), toY(p.value), 3, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}

export function drawGauge(
  ctx: CanvasRenderingContext2D,
  gauge: Gauge,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  const fraction = gauge.cap > 0 ? gauge.spent / gauge.cap : 0;
  ctx.fillStyle = '#eeeeee';
  ctx.fillRect(0, 0, width, height);
  ctx.fillStyle = fraction < 1 ? '#59a14f' : '#e15759';
  ctx.fillRect(0, 0, Math.min(1, fraction) * width, height);
  ctx.strokeStyle = '#444444';
  ctx.strokeRect(0.5, 0.5, width - 1, height - 1);
  ctx.fillStyle = '#111111';
  ctx.font = '12px sans-serif';
  ctx.textBaseline = 'middle';
  ctx.fillText(`labels ${gauge.spent} / ${gauge.cap}`, 6, height / 2);
}
