/**
 * Wire-level types for the session API.
 *
 * These mirror the JSON payloads the HTTP service produces, field for
 * field. Nothing in here is invented by the console; if a shape changes
 * on the server, this file is the single place to update.
 */

/** GET /config response. Never includes provider credentials. */
export interface ConfigInfo {
  models: string[];
  default_model: string;
  embed_dimension: number;
  cassette_mode: string;
  require_confirmation: boolean;
  pipeline: Record<string, unknown>;
}

export interface DatasetInfo {
  name: string;
  spec: string;
  has_context: boolean;
  created_at: number;
  state: string;
}

/** POST /datasets response. */
export interface RegisteredDataset {
  name: string;
  tables: number;
}

export interface SessionInfo {
  id: string;
  dataset: string;
  model_id: string;
  created_at?: number;
  state?: string;
  turns?: Turn[];
}

/** One pipeline stage transition: [stage name, epoch seconds]. */
export type StageEvent = [string, number];

export interface ClarifiedQuestion {
  original: string;
  clarified: string;
  assumptions: string[];
  needs_decomposition: boolean;
  sub_tasks: string[];
}

export interface SqlCandidate {
  sql_text: string;
  dialect_id: string;
  produced_by_round: number;
}

export interface RefinementRound {
  phase: string;
  input_sql: string;
  feedback: string;
  output_sql: string;
}

export interface RefinementTrace {
  rounds: RefinementRound[];
  final: SqlCandidate;
  succeeded: boolean;
}

export interface TableResult {
  column_names: string[];
  column_kinds: string[];
  rows: unknown[][];
  elapsed_ms: number;
  truncated: boolean;
}

export interface Recommendation {
  chart_type: string;
  /** Column bindings, e.g. {x, y, series} or {value} for a number card. */
  axis_bindings: Record<string, string>;
  rank: number;
  source: string;
  rule: string;
  reason: string;
}

/** One answered sub-task inside a turn. */
export interface ResultEntry {
  sub_task: string;
  sql: string | null;
  candidate: SqlCandidate | null;
  trace: RefinementTrace | null;
  result: TableResult | null;
  recommendations: Recommendation[];
  error: string | null;
}

export interface OverviewTable {
  table: string;
  entity: string;
  table_type: string;
  narrative: string;
  key_attributes: string[];
}

export interface OverviewEntity {
  name: string;
  tables: string[];
  description: string;
}

export interface OverviewRelationship {
  from: string;
  to: string;
  declared: boolean;
}

/** Dataset overview attached to "quick understanding" turns. */
export interface ContextOverview {
  database: string;
  summary: string;
  keywords: string[];
  tables: OverviewTable[];
  entities: OverviewEntity[];
  relationships: OverviewRelationship[];
}

export type TurnStatus = "running" | "done" | "failed";

export interface Turn {
  id: string;
  session_id: string;
  seq: number;
  question: string;
  status: TurnStatus;
  created_at: number;
  model_id: string;
  clarified: ClarifiedQuestion | null;
  results: ResultEntry[];
  stage_events: StageEvent[];
  error: string | null;
  suggestion: string | null;
  context_overview: ContextOverview | null;
  awaiting_confirmation: boolean;
}

export interface Bookmark {
  id: string;
  turn_id: string;
  sub_task_index: number;
  label: string;
}

/** One column of the comparison view, resolved server side. */
export interface ComparePanel {
  bookmark_id: string;
  label: string;
  turn_id: string;
  sub_task_index: number;
  question: string;
  sub_task: string;
  sql: string | null;
  result: TableResult | null;
  recommendations: Recommendation[];
}

/** Error body every non-2xx response carries. */
export interface ApiErrorBody {
  error: string;
  detail: string;
}

/** Pipeline stages of a regular turn, in execution order. */
export const STAGE_ORDER = [
  "clarify",
  "decompose",
  "sql",
  "refine",
  "execute",
  "chart",
] as const;

/** The single stage emitted by a dataset-overview turn. */
export const OVERVIEW_STAGE = "hdc";
