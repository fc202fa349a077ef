/** Dashboard geometry on the recorded planted-shift fixture: stacked areas
 * plus an index line that visibly crosses zero after the flip. */
import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { TrendPoint } from "../src/api";
import { computeGeometry, DEFAULT_LAYOUT, stackSeries } from "../src/chart";
import { renderDashboard } from "../src/views/dashboard";

const FIXTURE: TrendPoint[] = JSON.parse(readFileSync(
  join(__dirname, "fixtures", "planted_shift_trends.json"), "utf-8"));
const CLASSES = ["positive", "negative", "neutral", "irrelevant"];

describe("chart geometry", () => {
  it("stacks cumulatively in class order", () => {
    const stacks = stackSeries(FIXTURE, CLASSES);
    expect(stacks.length).toBe(FIXTURE.length);
    for (const row of stacks) {
      for (let c = 1; c < row.length; c++) {
        expect(row[c]).toBeGreaterThanOrEqual(row[c - 1]);
      }
    }
    const i = 300;
    expect(stacks[i][CLASSES.length - 1]).toBeCloseTo(
      CLASSES.reduce((acc, cls) => acc + (FIXTURE[i].ma_1d[cls] ?? 0), 0), 9);
  });

  it("detects the zero crossing in the planted-shift fixture", () => {
    const geo = computeGeometry(FIXTURE, CLASSES);
    expect(geo.indexCrossesZero).toBe(true);
  });

  it("index line actually crosses the zero reference in pixel space", () => {
    const geo = computeGeometry(FIXTURE, CLASSES);
    const ys = geo.indexPath.match(/[ML]([\d.]+),([\d.]+)/g)!
      .map((seg) => Number(seg.split(",")[1]));
    // y grows downward: above the zero line before the shift, below after
    expect(Math.min(...ys)).toBeLessThan(geo.zeroY);
    expect(Math.max(...ys)).toBeGreaterThan(geo.zeroY);
  });

  it("keeps every point inside the layout box", () => {
    const geo = computeGeometry(FIXTURE, CLASSES);
    const coords = geo.indexPath.match(/([\d.]+),([\d.]+)/g)!;
    for (const pair of coords) {
      const [x, y] = pair.split(",").map(Number);
      expect(x).toBeGreaterThanOrEqual(DEFAULT_LAYOUT.padLeft - 0.5);
      expect(x).toBeLessThanOrEqual(DEFAULT_LAYOUT.width - DEFAULT_LAYOUT.padRight + 0.5);
      expect(y).toBeGreaterThanOrEqual(DEFAULT_LAYOUT.padTop - 0.5);
      expect(y).toBeLessThanOrEqual(DEFAULT_LAYOUT.height - DEFAULT_LAYOUT.padBottom + 0.5);
    }
  });

  it("flat data yields a flat zero index line", () => {
    const flat: TrendPoint[] = Array.from({ length: 48 }, (_, i) => ({
      bucket_start: `2021-06-01T${String(i % 24).padStart(2, "0")}:00:00.000Z`,
      counts: { positive: 2, negative: 2, neutral: 0, irrelevant: 0 },
      ma_1d: { positive: 2, negative: 2, neutral: 0, irrelevant: 0 },
      r: 1.0,
      index: 0.0,
    }));
    const geo = computeGeometry(flat, CLASSES);
    expect(geo.indexCrossesZero).toBe(false);
    const ys = geo.indexPath.match(/[ML]([\d.]+),([\d.]+)/g)!
      .map((seg) => Number(seg.split(",")[1]));
    for (const y of ys) expect(y).toBeCloseTo(geo.zeroY, 5);
  });
});

describe("dashboard rendering", () => {
  it("renders the planted-shift fixture with a crossing index line", () => {
    const host = document.createElement("div");
    host.innerHTML = renderDashboard(FIXTURE, CLASSES);
    const svg = host.querySelector("svg")!;
    expect(svg).not.toBeNull();
    expect(host.querySelectorAll("path.area").length).toBe(CLASSES.length);
    const indexLine = host.querySelector<SVGPathElement>("path.index-line")!;
    expect(indexLine.getAttribute("data-crosses-zero")).toBe("true");
    expect(host.querySelector("line.zero-line")).not.toBeNull();
  });

  it("renders an empty state for an empty range", () => {
    const host = document.createElement("div");
    host.innerHTML = renderDashboard([], CLASSES);
    expect(host.textContent).toContain("No trend data");
    expect(host.querySelector("svg")).toBeNull();
  });
});
