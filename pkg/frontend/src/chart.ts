/** Chart geometry for the trend dashboard.
 *
 * Pure functions from trend points to SVG path data: per-class moving
 * averages stack into cumulative areas; the sentiment index draws as a
 * line against its own right-hand axis. Kept DOM-free so the geometry is
 * testable without a browser.
 */
import { TrendPoint } from "./api";

export interface ChartLayout {
  width: number;
  height: number;
  padLeft: number;
  padRight: number;
  padTop: number;
  padBottom: number;
}

export const DEFAULT_LAYOUT: ChartLayout = {
  width: 860, height: 320, padLeft: 44, padRight: 44, padTop: 12, padBottom: 24,
};

export interface StackedArea {
  cls: string;
  path: string;
}

export interface ChartGeometry {
  areas: StackedArea[];
  indexPath: string;
  /** y pixel of index zero, for the dashed reference line */
  zeroY: number;
  /** true when the index polyline crosses its zero line */
  indexCrossesZero: boolean;
  xOf: (i: number) => number;
}

function innerBox(layout: ChartLayout) {
  return {
    x0: layout.padLeft,
    y0: layout.padTop,
    w: layout.width - layout.padLeft - layout.padRight,
    h: layout.height - layout.padTop - layout.padBottom,
  };
}

/** Cumulative per-class stacks from the 1-day moving averages. */
export function stackSeries(points: TrendPoint[], classes: string[]): number[][] {
  const stacks: number[][] = [];
  for (const p of points) {
    let acc = 0;
    const row: number[] = [];
    for (const cls of classes) {
      acc += p.ma_1d[cls] ?? 0;
      row.push(acc);
    }
    stacks.push(row);
  }
  return stacks;
}

export function computeGeometry(
  points: TrendPoint[],
  classes: string[],
  layout: ChartLayout = DEFAULT_LAYOUT,
): ChartGeometry {
  const box = innerBox(layout);
  const n = points.length;
  const xOf = (i: number) => n <= 1 ? box.x0 + box.w / 2 : box.x0 + (box.w * i) / (n - 1);

  const stacks = stackSeries(points, classes);
  const top = Math.max(1e-9, ...stacks.map((row) => row[row.length - 1] ?? 0));
  const yCount = (v: number) => box.y0 + box.h * (1 - v / top);

  const areas: StackedArea[] = [];
  for (let c = 0; c < classes.length; c++) {
    const upper = stacks.map((row) => row[c]);
    const lower = stacks.map((row) => (c === 0 ? 0 : row[c - 1]));
    let d = "";
    for (let i = 0; i < n; i++) {
      d += `${i === 0 ? "M" : "L"}${xOf(i).toFixed(1)},${yCount(upper[i]).toFixed(1)}`;
    }
    for (let i = n - 1; i >= 0; i--) {
      d += `L${xOf(i).toFixed(1)},${yCount(lower[i]).toFixed(1)}`;
    }
    areas.push({ cls: classes[c], path: n ? d + "Z" : "" });
  }

  const indexValues = points.map((p) => p.index);
  const maxAbs = Math.max(1, ...indexValues.map((v) => Math.abs(v)));
  const yIndex = (v: number) => box.y0 + box.h * (1 - (v + maxAbs) / (2 * maxAbs));
  let indexPath = "";
  for (let i = 0; i < n; i++) {
    indexPath += `${i === 0 ? "M" : "L"}${xOf(i).toFixed(1)},${yIndex(indexValues[i]).toFixed(1)}`;
  }

  let crosses = false;
  for (let i = 1; i < n; i++) {
    if ((indexValues[i - 1] < 0 && indexValues[i] >= 0)
        || (indexValues[i - 1] > 0 && indexValues[i] <= 0)) {
      crosses = true;
      break;
    }
  }

  return { areas, indexPath, zeroY: yIndex(0), indexCrossesZero: crosses, xOf };
}

export const CLASS_COLORS: Record<string, string> = {
  positive: "#2e7d32",
  negative: "#c62828",
  neutral: "#f9a825",
  irrelevant: "#90a4ae",
};

/** Render the full SVG for a trend series; empty input yields no svg. */
export function renderChartSvg(points: TrendPoint[], classes: string[],
                               layout: ChartLayout = DEFAULT_LAYOUT): string {
  if (points.length === 0) return "";
  const geo = computeGeometry(points, classes, layout);
  const areas = geo.areas.map((a) =>
    `<path class="area area-${a.cls}" fill="${CLASS_COLORS[a.cls] ?? "#888"}"` +
    ` fill-opacity="0.55" stroke="none" d="${a.path}"></path>`).join("");
  const zero =
    `<line class="zero-line" x1="${layout.padLeft}" x2="${layout.width - layout.padRight}"` +
    ` y1="${geo.zeroY.toFixed(1)}" y2="${geo.zeroY.toFixed(1)}"` +
    ` stroke="#666" stroke-dasharray="4 3"></line>`;
  const index =
    `<path class="index-line" data-crosses-zero="${geo.indexCrossesZero}"` +
    ` fill="none" stroke="#111" stroke-width="1.6" d="${geo.indexPath}"></path>`;
  return `<svg viewBox="0 0 ${layout.width} ${layout.height}" role="img"` +
    ` aria-label="stacked 1-day moving averages with sentiment index">` +
    `${areas}${zero}${index}</svg>`;
}
