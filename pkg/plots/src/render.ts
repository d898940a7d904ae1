import * as echarts from "echarts";
import { fitLoglogSlope, positiveSpread } from "./fit.js";
import type { SweepColumn, SweepRow } from "./schema.js";

export type FigureKind = "loglog-decay" | "ratio-band" | "slope-fit";

export interface FigureSpec {
  kind: FigureKind;
  inputs: Array<{ name: string; rows: SweepRow[] }>;
  column?: SweepColumn;
  width?: number;
  height?: number;
}

const DEFAULT_COLUMN: Record<FigureKind, SweepColumn> = {
  "loglog-decay": "comparison_lhs",
  "ratio-band": "energy_lhs",
  "slope-fit": "time_derivative_lp",
};

function svgChart(option: echarts.EChartsOption, width: number, height: number): string {
  const chart = echarts.init(null, null, {
    renderer: "svg",
    ssr: true,
    width,
    height,
  });
  chart.setOption({ animation: false, ...option });
  const svg = chart.renderToSVGString();
  chart.dispose();
  return svg;
}

function placeholder(width: number, height: number): string {
  return svgChart(
    {
      title: {
        text: "no data",
        left: "center",
        top: "middle",
        textStyle: { fontSize: 24, color: "#888" },
      },
    },
    width,
    height,
  );
}

function positivePoints(
  rows: SweepRow[],
  column: SweepColumn,
): Array<[number, number]> {
  const pts: Array<[number, number]> = [];
  for (const row of rows) {
    const eps = row.eps;
    const v = row[column];
    if (eps !== null && eps > 0 && v !== null && v > 0) {
      pts.push([eps, v]);
    }
  }
  return pts;
}

/** Annotation text for the decay figures; mirrors the harness fit exactly. */
export function slopeAnnotation(rows: SweepRow[], column: SweepColumn): string {
  const eps = rows.map((r) => r.eps ?? NaN);
  const fit = fitLoglogSlope(eps, rows.map((r) => r[column]));
  if (fit.slope === null) {
    return `slope: n/a (${fit.flag})`;
  }
  return `slope = ${fit.slope.toFixed(6)}`;
}

function loglogDecay(spec: FigureSpec, width: number, height: number): string {
  const column = spec.column ?? DEFAULT_COLUMN[spec.kind];
  const series: echarts.SeriesOption[] = [];
  const notes: string[] = [];
  for (const input of spec.inputs) {
    const pts = positivePoints(input.rows, column);
    notes.push(`${input.name}: ${slopeAnnotation(input.rows, column)}`);
    if (pts.length > 0) {
      series.push({
        name: input.name,
        type: "line",
        data: pts,
        symbolSize: 8,
      });
    }
  }
  if (series.length === 0 && spec.inputs.every((i) => i.rows.length === 0)) {
    return placeholder(width, height);
  }
  return svgChart(
    {
      title: { text: `${column} vs eps`, subtext: notes.join("   "), left: "center" },
      grid: { top: 90, bottom: 60, left: 80, right: 40 },
      xAxis: { type: "log", name: "eps" },
      yAxis: { type: "log", name: column },
      legend: { bottom: 0 },
      series,
    },
    width,
    height,
  );
}

function ratioBand(spec: FigureSpec, width: number, height: number): string {
  const numerator = spec.column ?? DEFAULT_COLUMN[spec.kind];
  const denominator: SweepColumn =
    numerator === "energy_lhs" ? "energy_rhs" : "comparison_rhs";
  const series: echarts.SeriesOption[] = [];
  const allRatios: number[] = [];
  for (const input of spec.inputs) {
    const pts: Array<[number, number]> = [];
    for (const row of input.rows) {
      const num = row[numerator];
      const den = row[denominator];
      if (row.eps !== null && num !== null && den !== null && den !== 0) {
        pts.push([row.eps, num / den]);
        allRatios.push(num / den);
      }
    }
    if (pts.length > 0) {
      series.push({ name: input.name, type: "line", data: pts, symbolSize: 8 });
    }
  }
  if (allRatios.length === 0) {
    return placeholder(width, height);
  }
  const lo = Math.min(...allRatios);
  const hi = Math.max(...allRatios);
  const { spread, flag } = positiveSpread(allRatios);
  const first = series[0] as echarts.LineSeriesOption;
  first.markArea = {
    silent: true,
    itemStyle: { color: "rgba(120, 160, 220, 0.18)" },
    data: [[{ yAxis: lo }, { yAxis: hi }]],
  };
  return svgChart(
    {
      title: {
        text: `${numerator} / ${denominator} vs eps`,
        subtext: `max/min spread = ${spread.toFixed(4)}${flag ? ` (${flag})` : ""}`,
        left: "center",
      },
      grid: { top: 90, bottom: 60, left: 80, right: 40 },
      xAxis: { type: "log", name: "eps" },
      yAxis: { type: "value", name: "ratio" },
      legend: { bottom: 0 },
      series,
    },
    width,
    height,
  );
}

function slopeFit(spec: FigureSpec, width: number, height: number): string {
  const column = spec.column ?? DEFAULT_COLUMN[spec.kind];
  const series: echarts.SeriesOption[] = [];
  const notes: string[] = [];
  for (const input of spec.inputs) {
    const pts = positivePoints(input.rows, column);
    const eps = input.rows.map((r) => r.eps ?? NaN);
    const fit = fitLoglogSlope(eps, input.rows.map((r) => r[column]));
    notes.push(`${input.name}: ${slopeAnnotation(input.rows, column)}`);
    if (pts.length > 0) {
      series.push({
        name: input.name,
        type: "scatter",
        data: pts,
        symbolSize: 10,
      });
      if (fit.slope !== null) {
        // fitted line through the tail, anchored at its last point
        const anchor = pts[pts.length - 1];
        const x0 = pts[0][0];
        const y0 = anchor[1] * Math.pow(x0 / anchor[0], fit.slope);
        series.push({
          name: `${input.name} fit`,
          type: "line",
          data: [
            [x0, y0],
            [anchor[0], anchor[1]],
          ],
          showSymbol: false,
          lineStyle: { type: "dashed" },
        });
      }
    }
  }
  if (series.length === 0) {
    return placeholder(width, height);
  }
  return svgChart(
    {
      title: { text: `${column}: log-log fit`, subtext: notes.join("   "), left: "center" },
      grid: { top: 90, bottom: 60, left: 80, right: 40 },
      xAxis: { type: "log", name: "eps" },
      yAxis: { type: "log", name: column },
      legend: { bottom: 0 },
      series,
    },
    width,
    height,
  );
}

/** Render one figure to an SVG string. */
export function renderSweep(spec: FigureSpec): string {
  const width = spec.width ?? 860;
  const height = spec.height ?? 560;
  if (spec.inputs.every((i) => i.rows.length === 0)) {
    return placeholder(width, height);
  }
  switch (spec.kind) {
    case "loglog-decay":
      return loglogDecay(spec, width, height);
    case "ratio-band":
      return ratioBand(spec, width, height);
    case "slope-fit":
      return slopeFit(spec, width, height);
  }
}
