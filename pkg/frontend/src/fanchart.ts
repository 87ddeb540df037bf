/** Fan-chart layout: pure mapping from a quantile series to pixel geometry.
 *
 * The UI does no numerical work beyond this mapping — every y coordinate is
 * an affine image of a service payload value, so rendered band positions can
 * be checked against the JSON to sub-pixel precision.
 *
 * Levels pair up from the outside in: with the default 11 deciles that is
 * five nested bands plus an emphasized median line.
 */

import type { QuantileSeries } from "./types.js";

export interface Padding {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export interface Viewport {
  width: number;
  height: number;
  padding?: Padding;
}

export interface Point {
  x: number;
  y: number;
}

export interface BandLayout {
  /** the two quantile levels this band spans */
  lower: number;
  upper: number;
  /** pixel polyline of the upper quantile, left to right */
  top: Point[];
  /** pixel polyline of the lower quantile, left to right */
  bottom: Point[];
}

export interface AxisTick {
  value: number;
  pixel: number;
}

export interface FanChartLayout {
  kind: "chart";
  variable: string;
  bands: BandLayout[];
  /** median polyline (level 0.5 when present, else the innermost level) */
  median: Point[];
  medianLevel: number;
  domain: { min: number; max: number };
  plot: { x: number; y: number; width: number; height: number };
  yTicks: AxisTick[];
  xTicks: AxisTick[];
}

export interface PlaceholderLayout {
  kind: "placeholder";
  variable: string;
  message: string;
}

export type LayoutResult = FanChartLayout | PlaceholderLayout;

const DEFAULT_PADDING: Padding = { top: 10, right: 12, bottom: 22, left: 46 };

/** Fraction of the value range added above and below the data. */
export const DOMAIN_PAD_FRACTION = 0.05;
/** Absolute padding used when the series is constant (zero range). */
export const FLAT_DOMAIN_PAD = 0.5;

/** Padded value domain for one or more series sharing an axis. */
export function valueDomain(
  seriesList: QuantileSeries[],
): { min: number; max: number } {
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of seriesList) {
    for (const row of s.values) {
      for (const v of row) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
      }
    }
  }
  if (!(lo <= hi)) throw new Error("cannot compute a domain of empty series");
  const pad = hi > lo ? (hi - lo) * DOMAIN_PAD_FRACTION : FLAT_DOMAIN_PAD;
  return { min: lo - pad, max: hi + pad };
}

function checkMonotone(series: QuantileSeries): void {
  const levels = series.quantile_levels;
  for (let i = 1; i < levels.length; i++) {
    if (levels[i]! <= levels[i - 1]!) {
      throw new Error("quantile_levels must be strictly increasing");
    }
  }
  for (const row of series.values) {
    if (row.length !== levels.length) {
      throw new Error("each time step needs one value per quantile level");
    }
    for (let i = 1; i < row.length; i++) {
      if (row[i]! < row[i - 1]!) {
        throw new Error("quantile values must be nondecreasing across levels");
      }
    }
  }
}

/** Lay out a quantile series inside a pixel viewport.
 *
 * Pass `domain` to share an axis across panels (e.g. truth vs surrogate);
 * by default the padded domain of this series is used.
 */
export function layoutFanChart(
  series: QuantileSeries,
  viewport: Viewport,
  domain?: { min: number; max: number },
): LayoutResult {
  if (series.time_steps.length === 0 || series.values.length === 0) {
    return {
      kind: "placeholder",
      variable: series.variable,
      message: "no data — submit a query",
    };
  }
  checkMonotone(series);
  const pad = viewport.padding ?? DEFAULT_PADDING;
  const plotW = viewport.width - pad.left - pad.right;
  const plotH = viewport.height - pad.top - pad.bottom;
  if (plotW <= 0 || plotH <= 0) throw new Error("viewport too small");
  const dom = domain ?? valueDomain([series]);
  if (!(dom.max > dom.min)) throw new Error("domain must have positive height");

  const steps = series.time_steps;
  const tMin = steps[0]!;
  const tMax = steps[steps.length - 1]!;
  const xOf = (t: number): number =>
    tMax > tMin
      ? pad.left + ((t - tMin) / (tMax - tMin)) * plotW
      : pad.left + plotW / 2;
  const yOf = (v: number): number =>
    pad.top + ((dom.max - v) / (dom.max - dom.min)) * plotH;

  const levels = series.quantile_levels;
  const nLevels = levels.length;
  const polyline = (levelIdx: number): Point[] =>
    steps.map((t, row) => ({
      x: xOf(t),
      y: yOf(series.values[row]![levelIdx]!),
    }));

  const bands: BandLayout[] = [];
  for (let i = 0; i < Math.floor(nLevels / 2); i++) {
    const j = nLevels - 1 - i;
    bands.push({
      lower: levels[i]!,
      upper: levels[j]!,
      top: polyline(j),
      bottom: polyline(i),
    });
  }

  let medianIdx = 0;
  let best = Infinity;
  levels.forEach((lv, i) => {
    const d = Math.abs(lv - 0.5);
    if (d < best) {
      best = d;
      medianIdx = i;
    }
  });

  return {
    kind: "chart",
    variable: series.variable,
    bands,
    median: polyline(medianIdx),
    medianLevel: levels[medianIdx]!,
    domain: dom,
    plot: { x: pad.left, y: pad.top, width: plotW, height: plotH },
    yTicks: niceTicks(dom.min, dom.max, 5).map((value) => ({
      value,
      pixel: yOf(value),
    })),
    xTicks: thinSteps(steps, 10).map((value) => ({ value, pixel: xOf(value) })),
  };
}

/** Round-valued ticks covering [lo, hi] at a 1/2/5 step. */
export function niceTicks(lo: number, hi: number, count: number): number[] {
  const span = hi - lo;
  if (!(span > 0)) return [lo];
  const rawStep = span / Math.max(count, 1);
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  let step = mag;
  for (const m of [1, 2, 5, 10]) {
    if (mag * m >= rawStep) {
      step = mag * m;
      break;
    }
  }
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    ticks.push(Number(v.toFixed(12)));
  }
  return ticks;
}

function thinSteps(steps: number[], maxTicks: number): number[] {
  if (steps.length <= maxTicks) return [...steps];
  const stride = Math.ceil(steps.length / maxTicks);
  const out: number[] = [];
  for (let i = 0; i < steps.length; i += stride) out.push(steps[i]!);
  const last = steps[steps.length - 1]!;
  if (out[out.length - 1] !== last) out.push(last);
  return out;
}

const fmt = (v: number): string => v.toFixed(2);

/** Closed SVG path for one band (top polyline, then bottom reversed). */
export function bandPath(band: BandLayout): string {
  const fwd = band.top
    .map((p, i) => `${i ? "L" : "M"}${fmt(p.x)},${fmt(p.y)}`)
    .join("");
  const back = [...band.bottom]
    .reverse()
    .map((p) => `L${fmt(p.x)},${fmt(p.y)}`)
    .join("");
  return `${fwd}${back}Z`;
}

/** Open SVG path for a polyline (median, learning-curve lines). */
export function linePath(points: Point[]): string {
  return points
    .map((p, i) => `${i ? "L" : "M"}${fmt(p.x)},${fmt(p.y)}`)
    .join("");
}
