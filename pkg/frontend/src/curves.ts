/** Learning-curve results: parse the runner's CSV and lay out one error
 * line per algorithm (seed-averaged, log-x over database size).
 */

import type { Point } from "./fanchart.js";

export const RESULT_COLUMNS = [
  "algorithm",
  "policy_class",
  "policy_params",
  "db_size",
  "weighted_error",
  "bootstrap_floor",
  "random_baseline",
  "seed",
] as const;

export interface ResultRow {
  algorithm: string;
  policy_class: string;
  policy_params: string;
  db_size: number;
  weighted_error: number;
  bootstrap_floor: number;
  random_baseline: number;
  seed: number;
}

export function parseResultsCsv(text: string): ResultRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new Error("empty results CSV");
  const header = lines[0]!.split(",");
  if (header.join(",") !== RESULT_COLUMNS.join(",")) {
    throw new Error(
      `unexpected results header: ${lines[0]!} (want ${RESULT_COLUMNS.join(",")})`,
    );
  }
  return lines.slice(1).map((line, idx) => {
    const cells = line.split(",");
    if (cells.length !== RESULT_COLUMNS.length) {
      throw new Error(`row ${idx + 1} has ${cells.length} cells`);
    }
    const num = (i: number): number => {
      const v = Number(cells[i]);
      if (!Number.isFinite(v)) {
        throw new Error(`row ${idx + 1}: ${RESULT_COLUMNS[i]} is not a number`);
      }
      return v;
    };
    return {
      algorithm: cells[0]!,
      policy_class: cells[1]!,
      policy_params: cells[2]!,
      db_size: num(3),
      weighted_error: num(4),
      bootstrap_floor: num(5),
      random_baseline: num(6),
      seed: num(7),
    };
  });
}

export interface CurveSeries {
  label: string;
  /** (db_size, mean weighted error) sorted by size */
  points: { size: number; error: number }[];
}

/** Seed-averaged error per algorithm for one query policy, plus the
 * random-baseline and bootstrap-floor reference lines. */
export function curvesForPolicy(
  rows: ResultRow[],
  policyClass: string,
): CurveSeries[] {
  const filtered = rows.filter((r) => r.policy_class === policyClass);
  if (filtered.length === 0) return [];
  const mean = (vals: number[]): number =>
    vals.reduce((a, b) => a + b, 0) / vals.length;
  const bySize = <K extends keyof ResultRow>(
    subset: ResultRow[],
    field: K,
  ): { size: number; error: number }[] => {
    const groups = new Map<number, number[]>();
    for (const r of subset) {
      const list = groups.get(r.db_size) ?? [];
      list.push(r[field] as number);
      groups.set(r.db_size, list);
    }
    return [...groups.entries()]
      .sort((a, b) => a[0] - b[0])
      .map(([size, vals]) => ({ size, error: mean(vals) }));
  };
  const algorithms = [...new Set(filtered.map((r) => r.algorithm))].sort();
  const series: CurveSeries[] = algorithms.map((alg) => ({
    label: alg,
    points: bySize(
      filtered.filter((r) => r.algorithm === alg),
      "weighted_error",
    ),
  }));
  series.push({
    label: "random baseline",
    points: bySize(filtered, "random_baseline"),
  });
  series.push({
    label: "bootstrap floor",
    points: bySize(filtered, "bootstrap_floor"),
  });
  return series;
}

export interface CurveChartLayout {
  lines: { label: string; points: Point[] }[];
  xTicks: { value: number; pixel: number }[];
  yTicks: { value: number; pixel: number }[];
  plot: { x: number; y: number; width: number; height: number };
}

/** Log-x, linear-y layout shared by every line in the panel. */
export function layoutCurves(
  series: CurveSeries[],
  viewport: { width: number; height: number },
): CurveChartLayout {
  const pad = { top: 10, right: 12, bottom: 24, left: 46 };
  const plotW = viewport.width - pad.left - pad.right;
  const plotH = viewport.height - pad.top - pad.bottom;
  const sizes = series.flatMap((s) => s.points.map((p) => p.size));
  const errors = series.flatMap((s) => s.points.map((p) => p.error));
  if (sizes.length === 0) throw new Error("no curve points");
  const xLo = Math.log10(Math.min(...sizes));
  const xHi = Math.log10(Math.max(...sizes));
  const yHi = Math.max(...errors) * 1.05;
  const xOf = (size: number): number =>
    xHi > xLo
      ? pad.left + ((Math.log10(size) - xLo) / (xHi - xLo)) * plotW
      : pad.left + plotW / 2;
  const yOf = (err: number): number =>
    pad.top + ((yHi - err) / yHi) * plotH;
  return {
    lines: series.map((s) => ({
      label: s.label,
      points: s.points.map((p) => ({ x: xOf(p.size), y: yOf(p.error) })),
    })),
    xTicks: [...new Set(sizes)]
      .sort((a, b) => a - b)
      .map((value) => ({ value, pixel: xOf(value) })),
    yTicks: [0, yHi / 2, yHi].map((value) => ({ value, pixel: yOf(value) })),
    plot: { x: pad.left, y: pad.top, width: plotW, height: plotH },
  };
}
