/**
 * Chart spec builder: recommendation + tabular result in, concrete
 * render-ready spec out. Pure data transformation, no markup, so the
 * render layer stays a dumb template and this logic is unit-testable.
 */

import type { Recommendation, TableResult } from "./types.js";

export interface PieSlice {
  label: string;
  value: number;
}

export interface PieSpec {
  kind: "pie";
  labelColumn: string;
  valueColumn: string;
  slices: PieSlice[];
}

export interface BarSpec {
  kind: "bar";
  x: string;
  y: string;
  categories: string[];
  values: number[];
}

export interface LinePoint {
  x: string;
  y: number;
}

export interface LineSeries {
  name: string;
  points: LinePoint[];
}

export interface LineSpec {
  kind: "line";
  x: string;
  y: string;
  series: LineSeries[];
}

export interface ScatterSpec {
  kind: "scatter";
  x: string;
  y: string;
  points: { x: number; y: number }[];
}

export interface HistogramSpec {
  kind: "histogram";
  column: string;
  values: number[];
}

export interface NumberCardSpec {
  kind: "number_card";
  label: string;
  value: unknown;
}

export interface TableSpec {
  kind: "table";
  columnNames: string[];
  rows: unknown[][];
}

export type ChartSpec =
  | PieSpec
  | BarSpec
  | LineSpec
  | ScatterSpec
  | HistogramSpec
  | NumberCardSpec
  | TableSpec;

function columnIndex(result: TableResult, name: string): number {
  const idx = result.column_names.indexOf(name);
  if (idx < 0) {
    throw new Error(`column ${JSON.stringify(name)} is not in the result`);
  }
  return idx;
}

function binding(rec: Recommendation, key: string): string {
  const name = rec.axis_bindings[key];
  if (name === undefined) {
    throw new Error(`recommendation ${rec.chart_type} has no ${JSON.stringify(key)} binding`);
  }
  return name;
}

function numcell(value: unknown): number {
  const n = Number(value);
  return Number.isFinite(n) ? n : 0;
}

/** Build the renderable spec for one recommendation over one result. */
export function buildChartSpec(rec: Recommendation, result: TableResult): ChartSpec {
  switch (rec.chart_type) {
    case "pie": {
      const label = binding(rec, "x");
      const value = binding(rec, "y");
      const li = columnIndex(result, label);
      const vi = columnIndex(result, value);
      return {
        kind: "pie",
        labelColumn: label,
        valueColumn: value,
        slices: result.rows.map((row) => ({
          label: String(row[li]),
          value: numcell(row[vi]),
        })),
      };
    }
    case "bar": {
      const x = binding(rec, "x");
      const y = binding(rec, "y");
      const xi = columnIndex(result, x);
      const yi = columnIndex(result, y);
      return {
        kind: "bar",
        x,
        y,
        categories: result.rows.map((row) => String(row[xi])),
        values: result.rows.map((row) => numcell(row[yi])),
      };
    }
    case "line": {
      const x = binding(rec, "x");
      const y = binding(rec, "y");
      const xi = columnIndex(result, x);
      const yi = columnIndex(result, y);
      const seriesColumn = rec.axis_bindings.series;
      const groups = new Map<string, LinePoint[]>();
      for (const row of result.rows) {
        const name = seriesColumn === undefined
          ? y
          : String(row[columnIndex(result, seriesColumn)]);
        let points = groups.get(name);
        if (!points) {
          points = [];
          groups.set(name, points); // first-seen series order
        }
        points.push({ x: String(row[xi]), y: numcell(row[yi]) });
      }
      return {
        kind: "line",
        x,
        y,
        series: [...groups.entries()].map(([name, points]) => ({ name, points })),
      };
    }
    case "scatter": {
      const x = binding(rec, "x");
      const y = binding(rec, "y");
      const xi = columnIndex(result, x);
      const yi = columnIndex(result, y);
      return {
        kind: "scatter",
        x,
        y,
        points: result.rows.map((row) => ({ x: numcell(row[xi]), y: numcell(row[yi]) })),
      };
    }
    case "histogram": {
      const column = binding(rec, "x");
      const ci = columnIndex(result, column);
      return {
        kind: "histogram",
        column,
        values: result.rows.map((row) => numcell(row[ci])),
      };
    }
    case "number_card": {
      const column = binding(rec, "value");
      const ci = columnIndex(result, column);
      const row = result.rows[0];
      return {
        kind: "number_card",
        label: column,
        value: row === undefined ? null : row[ci],
      };
    }
    case "table":
      return { kind: "table", columnNames: result.column_names, rows: result.rows };
    default:
      throw new Error(`unknown chart type ${JSON.stringify(rec.chart_type)}`);
  }
}
