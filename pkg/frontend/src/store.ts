/**
 * Client-side state container.
 *
 * Owns the polling loop that tracks a running turn, keeps bookmarks in
 * sync without page reloads, and guards chart switching so the active
 * type is always one of the server's recommendations. Chart switching is
 * purely local: no request leaves the browser for it.
 */

import { ApiClient, ApiError } from "./api.js";
import type { Bookmark, ComparePanel, DatasetInfo, SessionInfo, Turn } from "./types.js";
import type { SessionViewState } from "./render.js";
import { setActiveChart, toTurnView, type TurnView } from "./view.js";

export interface StoreOptions {
  /** Delay between turn polls. Tests dial this down to a millisecond. */
  pollIntervalMs?: number;
  /** Upper bound on polls per turn so a wedged server cannot hang the UI. */
  maxPolls?: number;
}

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class ConsoleStore {
  readonly api: ApiClient;
  models: string[] = [];
  defaultModel = "";
  datasets: DatasetInfo[] = [];
  session: SessionInfo | null = null;
  turns: TurnView[] = [];
  bookmarks: Bookmark[] = [];
  panels: ComparePanel[] = [];
  lastError: ApiError | null = null;
  busy = false;

  private readonly pollIntervalMs: number;
  private readonly maxPolls: number;
  private listeners: (() => void)[] = [];

  constructor(api: ApiClient, options: StoreOptions = {}) {
    this.api = api;
    this.pollIntervalMs = options.pollIntervalMs ?? 200;
    this.maxPolls = options.maxPolls ?? 600;
  }

  subscribe(listener: () => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) {
      listener();
    }
  }

  /** Load models and datasets; call once before anything else. */
  async init(): Promise<void> {
    const config = await this.api.config();
    this.models = config.models;
    this.defaultModel = config.default_model;
    this.datasets = await this.api.listDatasets();
    this.notify();
  }

  async openSession(dataset: string, modelId?: string): Promise<SessionInfo> {
    const session = await this.api.createSession(dataset, modelId);
    this.session = session;
    this.turns = [];
    this.bookmarks = [];
    this.panels = [];
    this.lastError = null;
    this.notify();
    return session;
  }

  async switchModel(modelId: string): Promise<void> {
    const session = this.requireSession();
    await this.api.setModel(session.id, modelId);
    session.model_id = modelId;
    this.notify();
  }

  /**
   * Submit a question and follow the turn to a settled state, refreshing
   * the view on every poll so stage events appear as they happen. On an
   * API error the error is surfaced on the store and null is returned;
   * the input is re-enabled either way.
   */
  async ask(text: string): Promise<TurnView | null> {
    const session = this.requireSession();
    this.lastError = null;
    this.busy = true;
    this.notify();
    try {
      const accepted = await this.api.askQuestion(session.id, text);
      return await this.trackTurn(accepted.turn_id);
    } catch (err) {
      this.lastError = this.asApiError(err);
      return null;
    } finally {
      this.busy = false;
      this.notify();
    }
  }

  /** Approve or cancel a turn paused on its clarified question. */
  async confirm(turnId: string, approve: boolean): Promise<TurnView | null> {
    const session = this.requireSession();
    this.lastError = null;
    try {
      const turn = await this.api.confirmTurn(session.id, turnId, approve);
      return this.upsertTurn(turn);
    } catch (err) {
      this.lastError = this.asApiError(err);
      this.notify();
      return null;
    }
  }

  /**
   * Re-point a result at another recommended chart type. Purely client
   * side. Returns false (and changes nothing) for a type the server did
   * not recommend; the corresponding control renders disabled.
   */
  switchChart(turnId: string, resultIndex: number, chartType: string): boolean {
    const turn = this.turns.find((t) => t.id === turnId);
    const result = turn?.results[resultIndex];
    if (!result) {
      return false;
    }
    if (!setActiveChart(result, chartType)) {
      return false;
    }
    this.notify();
    return true;
  }

  canSwitchTo(turnId: string, resultIndex: number, chartType: string): boolean {
    const turn = this.turns.find((t) => t.id === turnId);
    const result = turn?.results[resultIndex];
    return !!result && result.recommendations.some((r) => r.chart_type === chartType);
  }

  /** Save a bookmark; it shows up in the panel immediately, no reload. */
  async bookmarkResult(turnId: string, resultIndex: number, label: string): Promise<Bookmark> {
    const bookmark = await this.api.addBookmark(turnId, resultIndex, label);
    this.bookmarks.push(bookmark);
    this.notify();
    return bookmark;
  }

  async refreshBookmarks(): Promise<void> {
    const session = this.requireSession();
    this.bookmarks = await this.api.listBookmarks(session.id);
    this.notify();
  }

  /** Resolve bookmarks into side-by-side panels, preserving call order. */
  async compare(bookmarkIds: string[]): Promise<ComparePanel[]> {
    const response = await this.api.compareBookmarks(bookmarkIds);
    this.panels = response.panels;
    this.notify();
    return this.panels;
  }

  viewState(): SessionViewState {
    return {
      models: this.models,
      activeModel: this.session?.model_id ?? this.defaultModel,
      datasets: this.datasets,
      turns: this.turns,
      bookmarks: this.bookmarks,
      busy: this.busy,
      error: this.lastError ? { kind: this.lastError.kind, detail: this.lastError.detail } : null,
    };
  }

  // -- internals ------------------------------------------------------------------

  private requireSession(): SessionInfo {
    if (!this.session) {
      throw new Error("no open session");
    }
    return this.session;
  }

  private asApiError(err: unknown): ApiError {
    if (err instanceof ApiError) {
      return err;
    }
    return new ApiError(0, "NetworkError", err instanceof Error ? err.message : String(err));
  }

  private async trackTurn(turnId: string): Promise<TurnView> {
    const session = this.requireSession();
    for (let poll = 0; poll < this.maxPolls; poll += 1) {
      const turn = await this.api.getTurn(session.id, turnId);
      const view = this.upsertTurn(turn);
      if (turn.status !== "running" || turn.awaiting_confirmation) {
        return view;
      }
      await sleep(this.pollIntervalMs);
    }
    throw new Error(`turn ${turnId} did not settle after ${this.maxPolls} polls`);
  }

  private upsertTurn(turn: Turn): TurnView {
    const index = this.turns.findIndex((t) => t.id === turn.id);
    const previous = index >= 0 ? this.turns[index] : undefined;
    const view = toTurnView(turn, previous);
    if (index >= 0) {
      this.turns[index] = view;
    } else {
      this.turns.push(view);
    }
    this.notify();
    return view;
  }
}
