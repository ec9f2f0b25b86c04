import { describe, expect, it } from 'vitest';

import { MetricsRow } from '../src/api.js';
import { budgetGauge, metricSeries } from '../src/metrics.js';

const rows: MetricsRow[] = [
  { kappa: 0, labels_spent: 0, bcubed: 0.5, top1: 0.4, mean_per_class: 0.38 },
  { kappa: 1, labels_spent: 3, bcubed: 0.55, top1: 0.46, mean_per_class: 0.44 },
  { kappa: 2, labels_spent: 6, bcubed: 0.6, top1: 0.52, mean_per_class: 0.5 },
];

describe('metricSeries', () => {
  it('copies endpoint values verbatim, one point per row', () => {
    const series = metricSeries(rows);
    expect(series.map((s) => s.name)).toEqual(['bcubed', 'top1', 'mean_per_class']);
    for (const s of series) {
      expect(s.points).toHaveLength(rows.length);
      s.points.forEach((p, i) => {
        expect(p.kappa).toBe(rows[i].kappa);
        expect(p.value).toBe(rows[i][s.name]);
      });
    }
  });

  it('is empty for an empty history', () => {
    for (const s of metricSeries([])) {
      expect(s.points).toEqual([]);
    }
  });
});

describe('budgetGauge', () => {
  it('passes the session budget through untouched', () => {
    const gauge = budgetGauge({
      classes: 5,
      schedule: [1, 1, 1],
      kappa_max: 3,
      epsilon: 3,
      total_extra: 15,
      spent: 10,
    });
    expect(gauge).toEqual({ spent: 10, cap: 15 });
  });
});
