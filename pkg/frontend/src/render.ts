/**
 * Render layer: plain functions from state to HTML strings.
 *
 * No framework and no DOM access. Charts are drawn as inline SVG computed
 * from the ChartSpec alone, which keeps the whole layer runnable (and
 * testable) in node. A thin host page can drop these strings into innerHTML and wire
 * up event delegation.
 */

import type {
  ChartSpec,
  BarSpec,
  HistogramSpec,
  LineSpec,
  PieSpec,
  ScatterSpec,
  TableSpec,
} from "./charts.js";
import { buildChartSpec } from "./charts.js";
import type { Bookmark, ComparePanel, ContextOverview, DatasetInfo } from "./types.js";
import { OVERVIEW_STAGE, STAGE_ORDER } from "./types.js";
import type { ResultView, TurnView } from "./view.js";
import { activeRecommendation } from "./view.js";

const W = 320;
const H = 200;
const PAD = 30;

export function escapeHtml(value: unknown): string {
  if (value === null || value === undefined) {
    return "null";
  }
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

// -- scales ---------------------------------------------------------------------

function linearScale(d0: number, d1: number, r0: number, r1: number): (v: number) => number {
  const span = d1 - d0 || 1;
  return (v) => r0 + ((v - d0) / span) * (r1 - r0);
}

function fmt(n: number): string {
  return Number.isInteger(n) ? String(n) : n.toFixed(2);
}

// -- individual chart kinds -------------------------------------------------------

function arcPath(cx: number, cy: number, r: number, a0: number, a1: number): string {
  const x0 = cx + r * Math.cos(a0);
  const y0 = cy + r * Math.sin(a0);
  const x1 = cx + r * Math.cos(a1);
  const y1 = cy + r * Math.sin(a1);
  const large = a1 - a0 > Math.PI ? 1 : 0;
  return `M ${cx} ${cy} L ${fmt(x0)} ${fmt(y0)} A ${r} ${r} 0 ${large} 1 ${fmt(x1)} ${fmt(y1)} Z`;
}

function renderPie(spec: PieSpec): string {
  const total = spec.slices.reduce((acc, s) => acc + Math.max(0, s.value), 0);
  const cx = H / 2;
  const cy = H / 2;
  const r = H / 2 - 10;
  const parts: string[] = [];
  if (total <= 0) {
    parts.push(`<text x="${cx}" y="${cy}" text-anchor="middle">no data</text>`);
  } else {
    let angle = -Math.PI / 2;
    spec.slices.forEach((slice, i) => {
      const share = Math.max(0, slice.value) / total;
      if (share <= 0) {
        return;
      }
      if (share >= 1) {
        parts.push(`<circle cx="${cx}" cy="${cy}" r="${r}" class="slice slice-${i}"></circle>`);
        angle += 2 * Math.PI;
        return;
      }
      const next = angle + share * 2 * Math.PI;
      parts.push(
        `<path d="${arcPath(cx, cy, r, angle, next)}" class="slice slice-${i}">` +
          `<title>${escapeHtml(slice.label)}: ${fmt(slice.value)}</title></path>`,
      );
      angle = next;
    });
  }
  const legend = spec.slices
    .map(
      (s, i) =>
        `<li class="legend-item legend-${i}">${escapeHtml(s.label)} (${fmt(s.value)})</li>`,
    )
    .join("");
  return (
    `<figure class="chart chart-pie">` +
    `<svg viewBox="0 0 ${H} ${H}" role="img" aria-label="pie of ${escapeHtml(spec.valueColumn)} by ${escapeHtml(spec.labelColumn)}">${parts.join("")}</svg>` +
    `<ul class="legend">${legend}</ul></figure>`
  );
}

function renderBar(spec: BarSpec): string {
  const lo = Math.min(0, ...spec.values);
  const hi = Math.max(0, ...spec.values);
  const sy = linearScale(lo, hi, H - PAD, 10);
  const zero = sy(0);
  const n = Math.max(1, spec.values.length);
  const step = (W - 2 * PAD) / n;
  const barWidth = step * 0.7;
  const bars = spec.values
    .map((v, i) => {
      const x = PAD + i * step + (step - barWidth) / 2;
      const top = Math.min(zero, sy(v));
      const height = Math.abs(sy(v) - zero);
      const label = spec.categories[i] ?? "";
      return (
        `<rect x="${fmt(x)}" y="${fmt(top)}" width="${fmt(barWidth)}" height="${fmt(height)}" class="bar">` +
        `<title>${escapeHtml(label)}: ${fmt(v)}</title></rect>` +
        `<text x="${fmt(x + barWidth / 2)}" y="${H - PAD + 14}" text-anchor="middle" class="tick">${escapeHtml(label)}</text>`
      );
    })
    .join("");
  return (
    `<figure class="chart chart-bar">` +
    `<svg viewBox="0 0 ${W} ${H}" role="img" aria-label="bar of ${escapeHtml(spec.y)} by ${escapeHtml(spec.x)}">` +
    `<line x1="${PAD}" y1="${fmt(zero)}" x2="${W - PAD}" y2="${fmt(zero)}" class="axis"></line>${bars}</svg></figure>`
  );
}

function renderLine(spec: LineSpec): string {
  const xs: string[] = [];
  for (const series of spec.series) {
    for (const p of series.points) {
      if (!xs.includes(p.x)) {
        xs.push(p.x);
      }
    }
  }
  const ys = spec.series.flatMap((s) => s.points.map((p) => p.y));
  const lo = Math.min(...ys, 0);
  const hi = Math.max(...ys, 1);
  const sx = linearScale(0, Math.max(1, xs.length - 1), PAD, W - PAD);
  const sy = linearScale(lo, hi, H - PAD, 10);
  const lines = spec.series
    .map((series, i) => {
      const points = series.points
        .map((p) => `${fmt(sx(xs.indexOf(p.x)))},${fmt(sy(p.y))}`)
        .join(" ");
      return (
        `<polyline points="${points}" fill="none" class="line line-${i}">` +
        `<title>${escapeHtml(series.name)}</title></polyline>`
      );
    })
    .join("");
  const legend =
    spec.series.length > 1
      ? `<ul class="legend">${spec.series
          .map((s, i) => `<li class="legend-item legend-${i}">${escapeHtml(s.name)}</li>`)
          .join("")}</ul>`
      : "";
  return (
    `<figure class="chart chart-line">` +
    `<svg viewBox="0 0 ${W} ${H}" role="img" aria-label="line of ${escapeHtml(spec.y)} over ${escapeHtml(spec.x)}">` +
    `<line x1="${PAD}" y1="${H - PAD}" x2="${W - PAD}" y2="${H - PAD}" class="axis"></line>${lines}</svg>${legend}</figure>`
  );
}

function renderScatter(spec: ScatterSpec): string {
  const xsv = spec.points.map((p) => p.x);
  const ysv = spec.points.map((p) => p.y);
  const sx = linearScale(Math.min(...xsv, 0), Math.max(...xsv, 1), PAD, W - PAD);
  const sy = linearScale(Math.min(...ysv, 0), Math.max(...ysv, 1), H - PAD, 10);
  const dots = spec.points
    .map(
      (p) =>
        `<circle cx="${fmt(sx(p.x))}" cy="${fmt(sy(p.y))}" r="3" class="dot">` +
        `<title>${fmt(p.x)}, ${fmt(p.y)}</title></circle>`,
    )
    .join("");
  return (
    `<figure class="chart chart-scatter">` +
    `<svg viewBox="0 0 ${W} ${H}" role="img" aria-label="scatter of ${escapeHtml(spec.y)} against ${escapeHtml(spec.x)}">${dots}</svg></figure>`
  );
}

function renderHistogram(spec: HistogramSpec): string {
  const values = spec.values;
  if (values.length === 0) {
    return `<figure class="chart chart-histogram"><svg viewBox="0 0 ${W} ${H}"><text x="${W / 2}" y="${H / 2}" text-anchor="middle">no data</text></svg></figure>`;
  }
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const binCount = Math.min(10, Math.max(1, new Set(values).size));
  const width = (hi - lo) / binCount || 1;
  const counts = new Array<number>(binCount).fill(0);
  for (const v of values) {
    const bin = Math.min(binCount - 1, Math.floor((v - lo) / width));
    counts[bin] = (counts[bin] ?? 0) + 1;
  }
  const bar: BarSpec = {
    kind: "bar",
    x: spec.column,
    y: "frequency",
    categories: counts.map((_, i) => fmt(lo + i * width)),
    values: counts,
  };
  return renderBar(bar).replace("chart-bar", "chart-histogram");
}

function renderNumberCard(label: string, value: unknown): string {
  return (
    `<div class="number-card"><span class="number-card-value">${escapeHtml(value)}</span>` +
    `<span class="number-card-label">${escapeHtml(label)}</span></div>`
  );
}

function renderTable(spec: TableSpec): string {
  const head = spec.columnNames.map((c) => `<th>${escapeHtml(c)}</th>`).join("");
  const body = spec.rows
    .map((row) => `<tr>${row.map((cell) => `<td>${escapeHtml(cell)}</td>`).join("")}</tr>`)
    .join("");
  return `<table class="data-table"><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`;
}

/** Dispatch a spec to its concrete renderer. */
export function renderChart(spec: ChartSpec): string {
  switch (spec.kind) {
    case "pie":
      return renderPie(spec);
    case "bar":
      return renderBar(spec);
    case "line":
      return renderLine(spec);
    case "scatter":
      return renderScatter(spec);
    case "histogram":
      return renderHistogram(spec);
    case "number_card":
      return renderNumberCard(spec.label, spec.value);
    case "table":
      return renderTable(spec);
  }
}

// -- turn rendering ---------------------------------------------------------------

/** Progress strip while a turn runs; overview turns show their single stage. */
export function renderStageIndicator(view: TurnView): string {
  const reached = new Set(view.stages);
  const order = view.stages.includes(OVERVIEW_STAGE) ? [OVERVIEW_STAGE] : [...STAGE_ORDER];
  const items = order
    .map((stage) => {
      const cls = reached.has(stage) ? "stage reached" : "stage pending";
      return `<li class="${cls}">${escapeHtml(stage)}</li>`;
    })
    .join("");
  return `<ol class="stage-flow" data-status="${escapeHtml(view.status)}">${items}</ol>`;
}

/** One chip per recommended chart type; anything else is simply absent. */
export function renderChartSwitcher(view: ResultView, turnId: string, index: number): string {
  const chips = view.recommendations
    .map((rec) => {
      const active = rec.chart_type === view.activeChartType;
      return (
        `<button type="button" class="chip${active ? " chip-active" : ""}"` +
        ` data-turn="${escapeHtml(turnId)}" data-result="${index}"` +
        ` data-chart="${escapeHtml(rec.chart_type)}" aria-pressed="${active}"` +
        ` title="${escapeHtml(rec.reason)}">${escapeHtml(rec.chart_type)}</button>`
      );
    })
    .join("");
  return `<nav class="chart-switcher">${chips}</nav>`;
}

function renderTrace(view: ResultView): string {
  if (!view.trace) {
    return "";
  }
  const rounds = view.trace.rounds
    .map((round, i) => {
      const note = round.feedback ? escapeHtml(round.feedback) : "ok";
      return `<li class="round"><code>${escapeHtml(round.phase)} ${i + 1}</code>: ${note}</li>`;
    })
    .join("");
  const state = view.trace.succeeded ? "succeeded" : "failed";
  return (
    `<details class="trace-details"><summary>refinement trace (${view.trace.rounds.length} rounds, ${state})</summary>` +
    `<ol>${rounds}</ol></details>`
  );
}

export function renderResult(view: ResultView, turnId: string, index: number): string {
  if (view.error !== null && view.result === null) {
    return (
      `<section class="result-card result-error"><p class="error-text">${escapeHtml(view.error)}</p>` +
      `${renderTrace(view)}</section>`
    );
  }
  const rec = activeRecommendation(view);
  let chart = "";
  if (rec && view.result) {
    chart = renderChart(buildChartSpec(rec, view.result));
  }
  const sql = view.sql
    ? `<details class="sql-details"><summary>SQL</summary><pre><code>${escapeHtml(view.sql)}</code></pre></details>`
    : "";
  const bookmark =
    `<button type="button" class="bookmark-button" data-turn="${escapeHtml(turnId)}"` +
    ` data-result="${index}">bookmark</button>`;
  return (
    `<section class="result-card">` +
    `<header class="result-head"><span class="sub-task">${escapeHtml(view.subTask)}</span>${bookmark}</header>` +
    `${renderChartSwitcher(view, turnId, index)}${chart}${sql}${renderTrace(view)}</section>`
  );
}

function renderOverview(overview: ContextOverview): string {
  const tables = overview.tables
    .map(
      (t) =>
        `<li><strong>${escapeHtml(t.table)}</strong> (${escapeHtml(t.table_type)}): ${escapeHtml(t.narrative)}</li>`,
    )
    .join("");
  const keywords = overview.keywords.map((k) => `<span class="keyword">${escapeHtml(k)}</span>`).join(" ");
  return (
    `<section class="overview"><p class="overview-summary">${escapeHtml(overview.summary)}</p>` +
    `<p class="overview-keywords">${keywords}</p><ul class="overview-tables">${tables}</ul></section>`
  );
}

/** A question bubble plus the answer bubble for one turn. */
export function renderTurn(view: TurnView): string {
  const question = `<div class="bubble bubble-question">${escapeHtml(view.question)}</div>`;
  let answer: string;
  if (view.status === "failed") {
    const suggestion = view.suggestion
      ? `<p class="suggestion">try: ${escapeHtml(view.suggestion)}</p>`
      : "";
    answer =
      `<div class="bubble bubble-answer bubble-error"><p class="error-text">${escapeHtml(view.error)}</p>` +
      `${suggestion}</div>`;
  } else if (view.status === "running" && !view.awaitingConfirmation) {
    answer = `<div class="bubble bubble-answer bubble-running">${renderStageIndicator(view)}</div>`;
  } else {
    const clarified = view.clarifiedText
      ? `<p class="clarified">${escapeHtml(view.clarifiedText)}</p>`
      : "";
    const assumptions = view.assumptions.length
      ? `<ul class="assumptions">${view.assumptions.map((a) => `<li>${escapeHtml(a)}</li>`).join("")}</ul>`
      : "";
    const confirm = view.awaitingConfirmation
      ? `<div class="confirm-bar"><button type="button" class="confirm-approve" data-turn="${escapeHtml(view.id)}">looks right</button>` +
        `<button type="button" class="confirm-reject" data-turn="${escapeHtml(view.id)}">cancel</button></div>`
      : "";
    const overview = view.overview ? renderOverview(view.overview) : "";
    const results = view.results.map((r, i) => renderResult(r, view.id, i)).join("");
    answer = `<div class="bubble bubble-answer">${clarified}${assumptions}${confirm}${overview}${results}</div>`;
  }
  return `<article class="turn" data-turn="${escapeHtml(view.id)}">${question}${answer}</article>`;
}

// -- panels -----------------------------------------------------------------------

export function renderCompare(panels: ComparePanel[]): string {
  if (panels.length === 0) {
    return `<div class="compare-empty">No bookmarks selected yet. Bookmark a result, then pick two or more to compare.</div>`;
  }
  const sections = panels
    .map((panel) => {
      const rec = panel.recommendations[0];
      const chart =
        rec && panel.result ? renderChart(buildChartSpec(rec, panel.result)) : "";
      const table = panel.result
        ? renderTable({ kind: "table", columnNames: panel.result.column_names, rows: panel.result.rows })
        : "";
      const sql = panel.sql
        ? `<details class="sql-details"><summary>SQL</summary><pre><code>${escapeHtml(panel.sql)}</code></pre></details>`
        : "";
      return (
        `<section class="compare-panel" data-bookmark="${escapeHtml(panel.bookmark_id)}">` +
        `<h3>${escapeHtml(panel.label || panel.sub_task)}</h3>` +
        `<p class="compare-question">${escapeHtml(panel.question)}</p>${chart}${table}${sql}</section>`
      );
    })
    .join("");
  return `<div class="compare-grid" style="grid-template-columns: repeat(${panels.length}, 1fr);">${sections}</div>`;
}

export function renderBookmarkList(bookmarks: Bookmark[]): string {
  if (bookmarks.length === 0) {
    return `<p class="bookmark-empty">no bookmarks yet</p>`;
  }
  const items = bookmarks
    .map(
      (b) =>
        `<li class="bookmark-item" data-bookmark="${escapeHtml(b.id)}">` +
        `<label><input type="checkbox" value="${escapeHtml(b.id)}"> ${escapeHtml(b.label || b.id)}</label></li>`,
    )
    .join("");
  return `<ul class="bookmark-list">${items}</ul>`;
}

export function renderModelSwitcher(models: string[], active: string): string {
  const options = models
    .map(
      (m) =>
        `<option value="${escapeHtml(m)}"${m === active ? " selected" : ""}>${escapeHtml(m)}</option>`,
    )
    .join("");
  return `<select class="model-switcher" aria-label="model">${options}</select>`;
}

export function renderDatasetPanel(
  datasets: DatasetInfo[],
  overview: ContextOverview | null,
): string {
  const items = datasets
    .map(
      (d) =>
        `<li class="dataset-item" data-dataset="${escapeHtml(d.name)}">${escapeHtml(d.name)}` +
        ` <span class="dataset-state">${escapeHtml(d.state)}</span></li>`,
    )
    .join("");
  const details = overview ? renderOverview(overview) : "";
  return `<aside class="dataset-panel"><ul class="dataset-list">${items}</ul>${details}</aside>`;
}

// -- whole console ----------------------------------------------------------------

/** Everything the top-level template needs, decoupled from the store class. */
export interface SessionViewState {
  models: string[];
  activeModel: string;
  datasets: DatasetInfo[];
  turns: TurnView[];
  bookmarks: Bookmark[];
  busy: boolean;
  error: { kind: string; detail: string } | null;
}

export function renderSession(state: SessionViewState): string {
  const turns = state.turns.map(renderTurn).join("");
  const banner = state.error
    ? `<div class="error-banner" role="alert">${escapeHtml(state.error.kind)}: ${escapeHtml(state.error.detail)}</div>`
    : "";
  const disabled = state.busy ? " disabled" : "";
  return (
    `<div class="console">` +
    `<header class="toolbar">${renderModelSwitcher(state.models, state.activeModel)}</header>` +
    `${renderDatasetPanel(state.datasets, null)}` +
    `<main class="chat">${turns}</main>` +
    `<aside class="bookmarks">${renderBookmarkList(state.bookmarks)}</aside>` +
    `${banner}` +
    `<form class="ask-form"><input name="question" type="text" placeholder="ask about this dataset"${disabled}>` +
    `<button type="submit"${disabled}>ask</button></form></div>`
  );
}
