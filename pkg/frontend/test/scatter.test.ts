import { describe, expect, it } from 'vitest';

import { ProjectionPoint } from '../src/api.js';
import { clusterColor, hitTest, layoutScatter } from '../src/scatter.js';

const points: ProjectionPoint[] = [
  { id: 0, x: -1, y: -1, cluster: 0, labeled: true },
  { id: 1, x: 1, y: -1, cluster: 1, labeled: false },
  { id: 2, x: -1, y: 1, cluster: 0, labeled: false },
  { id: 3, x: 1, y: 1, cluster: 1, labeled: false },
];

describe('layoutScatter', () => {
  it('maps data bounds into the margins', () => {
    const layout = layoutScatter(points, new Set(), 200, 100, 10);
    for (const p of layout) {
      expect(p.screenX).toBeGreaterThanOrEqual(10);
      expect(p.screenX).toBeLessThanOrEqual(190);
      expect(p.screenY).toBeGreaterThanOrEqual(10);
      expect(p.screenY).toBeLessThanOrEqual(90);
    }
    // y axis is flipped: larger data y renders higher (smaller pixel y)
    const top = layout.find((p) => p.id === 2)!;
    const bottom = layout.find((p) => p.id === 0)!;
    expect(top.screenY).toBeLessThan(bottom.screenY);
  });

  it('flags exactly the pending ids', () => {
    const layout = layoutScatter(points, new Set([1, 3]), 200, 100);
    expect(layout.filter((p) => p.pending).map((p) => p.id)).toEqual([1, 3]);
  });

  it('handles a single point without dividing by zero', () => {
    const layout = layoutScatter([points[0]], new Set(), 200, 100);
    expect(Number.isFinite(layout[0].screenX)).toBe(true);
    expect(Number.isFinite(layout[0].screenY)).toBe(true);
  });

  it('returns nothing for an empty projection', () => {
    expect(layoutScatter([], new Set(), 200, 100)).toEqual([]);
  });
});

describe('hitTest', () => {
  it('finds the nearest point within the radius', () => {
    const layout = layoutScatter(points, new Set([1]), 200, 100, 10);
    const target = layout.find((p) => p.id === 1)!;
    const hit = hitTest(layout, target.screenX + 3, target.screenY - 2, 10);
    expect(hit?.id).toBe(1);
  });

  it('misses when nothing is close', () => {
    const layout = layoutScatter(points, new Set(), 200, 100, 10);
    expect(hitTest(layout, 100, 50, 5)).toBeNull();
  });

  it('distinguishes pending from non-pending hits', () => {
    // a pending hit opens the label form; a plain hit is inspect-only
    const layout = layoutScatter(points, new Set([3]), 200, 100, 10);
    const pendingHit = hitTest(layout, layout[3].screenX, layout[3].screenY, 6);
    const plainHit = hitTest(layout, layout[0].screenX, layout[0].screenY, 6);
    expect(pendingHit?.pending).toBe(true);
    expect(plainHit?.pending).toBe(false);
  });
});

describe('clusterColor', () => {
  it('is stable and distinguishes unassigned points', () => {
    expect(clusterColor(2)).toBe(clusterColor(2));
    expect(clusterColor(-1)).not.toBe(clusterColor(0));
  });
});
