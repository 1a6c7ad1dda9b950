/**
 * View models: wire turns reshaped for rendering.
 *
 * The one piece of client-owned state here is the active chart type per
 * result. It always comes from the recommendation list (rank order), so a
 * chart type outside that list is unreachable by construction.
 */

import type {
  ContextOverview,
  RefinementTrace,
  Recommendation,
  ResultEntry,
  TableResult,
  Turn,
  TurnStatus,
} from "./types.js";

export interface ResultView {
  subTask: string;
  sql: string | null;
  trace: RefinementTrace | null;
  result: TableResult | null;
  recommendations: Recommendation[];
  /** Invariant: null when there are no recommendations, else a member of them. */
  activeChartType: string | null;
  error: string | null;
}

export interface TurnView {
  id: string;
  question: string;
  status: TurnStatus;
  /** Stage names in the order the server emitted them. */
  stages: string[];
  clarifiedText: string | null;
  assumptions: string[];
  subTasks: string[];
  results: ResultView[];
  overview: ContextOverview | null;
  error: string | null;
  suggestion: string | null;
  awaitingConfirmation: boolean;
}

export function chartTypes(view: ResultView): string[] {
  return view.recommendations.map((r) => r.chart_type);
}

export function activeRecommendation(view: ResultView): Recommendation | null {
  return view.recommendations.find((r) => r.chart_type === view.activeChartType) ?? null;
}

function defaultChartType(entry: ResultEntry): string | null {
  // The server already orders recommendations by rank.
  const first = entry.recommendations[0];
  return first ? first.chart_type : null;
}

function toResultView(entry: ResultEntry, previous?: ResultView): ResultView {
  let active = defaultChartType(entry);
  // Keep the user's choice across poll refreshes when still recommended.
  if (
    previous?.activeChartType &&
    entry.recommendations.some((r) => r.chart_type === previous.activeChartType)
  ) {
    active = previous.activeChartType;
  }
  return {
    subTask: entry.sub_task,
    sql: entry.sql,
    trace: entry.trace,
    result: entry.result,
    recommendations: entry.recommendations,
    activeChartType: active,
    error: entry.error,
  };
}

/** Reshape a wire turn, carrying chart choices over from a prior view. */
export function toTurnView(turn: Turn, previous?: TurnView): TurnView {
  return {
    id: turn.id,
    question: turn.question,
    status: turn.status,
    stages: turn.stage_events.map((event) => event[0]),
    clarifiedText: turn.clarified ? turn.clarified.clarified : null,
    assumptions: turn.clarified ? turn.clarified.assumptions : [],
    subTasks: turn.clarified ? turn.clarified.sub_tasks : [],
    results: turn.results.map((entry, i) => toResultView(entry, previous?.results[i])),
    overview: turn.context_overview,
    error: turn.error,
    suggestion: turn.suggestion,
    awaitingConfirmation: turn.awaiting_confirmation,
  };
}

/**
 * Point a result at another recommended chart type. Returns false and
 * leaves the view untouched when the type is not in the recommendation
 * list; rendering treats that as a disabled control.
 */
export function setActiveChart(view: ResultView, chartType: string): boolean {
  if (!view.recommendations.some((r) => r.chart_type === chartType)) {
    return false;
  }
  view.activeChartType = chartType;
  return true;
}
