/**
 * Typed HTTP client for the session API.
 *
 * Every request the console makes goes through this class, which keeps the
 * endpoint surface auditable in one place: the browser talks to the session
 * service and nothing else, never to an LLM provider. The fetch function is
 * injectable so tests can run against an in-memory stub.
 */

import type {
  ApiErrorBody,
  Bookmark,
  ComparePanel,
  ConfigInfo,
  DatasetInfo,
  RegisteredDataset,
  SessionInfo,
  Turn,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Raised for any non-2xx response; carries the server's error kind. */
export class ApiError extends Error {
  readonly status: number;
  readonly kind: string;
  readonly detail: string;

  constructor(status: number, kind: string, detail: string) {
    super(`${kind}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.kind = kind;
    this.detail = detail;
  }
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = {
      method,
      headers: { "content-type": "application/json" },
    };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    const text = await response.text();
    const parsed: unknown = text ? JSON.parse(text) : null;
    if (!response.ok) {
      const err = (parsed ?? {}) as Partial<ApiErrorBody>;
      const detail =
        typeof err.detail === "string"
          ? err.detail
          : JSON.stringify(err.detail ?? response.statusText);
      throw new ApiError(response.status, err.error ?? "HttpError", detail);
    }
    return parsed as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  config(): Promise<ConfigInfo> {
    return this.request("GET", "/config");
  }

  listDatasets(): Promise<DatasetInfo[]> {
    return this.request("GET", "/datasets");
  }

  registerDataset(name: string, connection: string): Promise<RegisteredDataset> {
    return this.request("POST", "/datasets", { name, connection });
  }

  createSession(dataset: string, modelId?: string): Promise<SessionInfo> {
    const body: Record<string, unknown> = { dataset };
    if (modelId !== undefined) {
      body.model_id = modelId;
    }
    return this.request("POST", "/sessions", body);
  }

  getSession(sessionId: string): Promise<SessionInfo> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  setModel(sessionId: string, modelId: string): Promise<SessionInfo> {
    return this.request("POST", `/sessions/${sessionId}/model`, { model_id: modelId });
  }

  askQuestion(sessionId: string, text: string): Promise<{ turn_id: string; status: string }> {
    return this.request("POST", `/sessions/${sessionId}/questions`, { text });
  }

  getTurn(sessionId: string, turnId: string): Promise<Turn> {
    return this.request("GET", `/sessions/${sessionId}/turns/${turnId}`);
  }

  confirmTurn(sessionId: string, turnId: string, approve = true): Promise<Turn> {
    return this.request("POST", `/sessions/${sessionId}/turns/${turnId}/confirm`, { approve });
  }

  addBookmark(turnId: string, subTaskIndex = 0, label = ""): Promise<Bookmark> {
    return this.request("POST", "/bookmarks", {
      turn_id: turnId,
      sub_task_index: subTaskIndex,
      label,
    });
  }

  listBookmarks(sessionId: string): Promise<Bookmark[]> {
    return this.request("GET", `/bookmarks?session=${encodeURIComponent(sessionId)}`);
  }

  compareBookmarks(bookmarkIds: string[]): Promise<{ panels: ComparePanel[] }> {
    return this.request("POST", "/bookmarks/compare", { bookmark_ids: bookmarkIds });
  }
}
