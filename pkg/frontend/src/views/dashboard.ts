/** Public trend dashboard: stacked 1-day moving averages per class with the
 * sentiment index overlaid on its own centered axis. */
import { TrendPoint } from "../api";
import { CLASS_COLORS, renderChartSvg } from "../chart";
import { escapeHtml } from "./annotate";

export function renderDashboard(points: TrendPoint[], classes: string[]): string {
  if (points.length === 0) {
    return `<div class="empty-state"><p>No trend data in this range yet.</p></div>`;
  }
  const legend = classes.map((cls) =>
    `<span class="legend-item"><span class="swatch"
      style="background:${CLASS_COLORS[cls] ?? "#888"}"></span>${escapeHtml(cls)}</span>`
  ).join(" ") + `<span class="legend-item"><span class="swatch index-swatch"></span>index (r−μ)/σ</span>`;
  const first = points[0].bucket_start;
  const last = points[points.length - 1].bucket_start;
  return `
    <section class="dashboard">
      <div class="legend">${legend}</div>
      <div class="chart">${renderChartSvg(points, classes)}</div>
      <p class="range">${escapeHtml(first)} … ${escapeHtml(last)},
        ${points.length} hourly buckets</p>
    </section>`;
}
