import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ConsoleStore } from "../src/store.js";
import { STAGE_ORDER } from "../src/types.js";
import {
  AVG_QUESTION,
  COUNT_QUESTION,
  StubApi,
  averageResultEntry,
  countResultEntry,
} from "./stub.js";

const GROWTH_QUESTION = "What is the growth rate?";

function makeStore(stub: StubApi): ConsoleStore {
  stub.addDataset("medical");
  stub.script(COUNT_QUESTION, { results: [countResultEntry()] });
  stub.script(AVG_QUESTION, { results: [averageResultEntry()] });
  return new ConsoleStore(new ApiClient("http://stub.local", stub.fetch), { pollIntervalMs: 1 });
}

describe("ConsoleStore", () => {
  it("loads models and datasets on init", async () => {
    const stub = new StubApi();
    const store = makeStore(stub);
    await store.init();
    expect(store.models).toEqual(["m-default", "m-alt"]);
    expect(store.defaultModel).toBe("m-default");
    expect(store.datasets.map((d) => d.name)).toEqual(["medical"]);
  });

  it("tracks stage events in pipeline order while a turn runs", async () => {
    const stub = new StubApi();
    const store = makeStore(stub);
    await store.init();
    await store.openSession("medical");

    const snapshots: string[][] = [];
    const busySeen: boolean[] = [];
    store.subscribe(() => {
      busySeen.push(store.busy);
      const stages = store.turns[0]?.stages;
      if (stages) {
        snapshots.push([...stages]);
      }
    });

    const turn = await store.ask(COUNT_QUESTION);
    expect(turn?.status).toBe("done");
    expect(turn?.stages).toEqual([...STAGE_ORDER]);
    // Every snapshot is a prefix of the full order: stages never arrive
    // out of sequence and never regress.
    for (const snapshot of snapshots) {
      expect(snapshot).toEqual([...STAGE_ORDER].slice(0, snapshot.length));
    }
    expect(snapshots.at(-1)).toEqual([...STAGE_ORDER]);
    expect(busySeen[0]).toBe(true);
    expect(busySeen.at(-1)).toBe(false);
  });

  it("switches charts locally, only to recommended types", async () => {
    const stub = new StubApi();
    const store = makeStore(stub);
    await store.init();
    await store.openSession("medical");
    const turn = (await store.ask(COUNT_QUESTION))!;
    expect(turn.results[0]!.activeChartType).toBe("pie");

    const requests = stub.requestLog.length;
    expect(store.switchChart(turn.id, 0, "bar")).toBe(true);
    expect(turn.results[0]!.activeChartType).toBe("bar");
    expect(store.switchChart(turn.id, 0, "table")).toBe(true);
    expect(stub.requestLog.length).toBe(requests);

    expect(store.canSwitchTo(turn.id, 0, "heatmap")).toBe(false);
    expect(store.switchChart(turn.id, 0, "heatmap")).toBe(false);
    expect(turn.results[0]!.activeChartType).toBe("table");
    expect(store.switchChart("t-ghost", 0, "bar")).toBe(false);
    expect(store.switchChart(turn.id, 5, "bar")).toBe(false);
  });

  it("keeps the chosen chart type across later polls of the same turn", async () => {
    const stub = new StubApi();
    const store = makeStore(stub);
    await store.init();
    await store.openSession("medical");
    const turn = (await store.ask(COUNT_QUESTION))!;
    store.switchChart(turn.id, 0, "bar");
    const refreshed = await store.api.getTurn(store.session!.id, turn.id);
    // Simulate the app refreshing its view from the wire.
    const view = (store as any).upsertTurn(refreshed);
    expect(view.results[0].activeChartType).toBe("bar");
  });

  it("adds bookmarks to the panel without a reload", async () => {
    const stub = new StubApi();
    const store = makeStore(stub);
    await store.init();
    await store.openSession("medical");
    const first = (await store.ask(COUNT_QUESTION))!;
    const second = (await store.ask(AVG_QUESTION))!;

    await store.bookmarkResult(first.id, 0, "counts");
    await store.bookmarkResult(second.id, 0, "averages");
    expect(store.bookmarks.map((b) => b.label)).toEqual(["counts", "averages"]);
    expect(stub.requestLog.filter((r) => r.method === "GET" && r.path === "/bookmarks")).toHaveLength(0);

    await store.refreshBookmarks();
    expect(store.bookmarks).toHaveLength(2);
  });

  it("surfaces API errors inline and re-enables the input", async () => {
    const stub = new StubApi();
    const store = makeStore(stub);
    await store.init();
    await store.openSession("medical");

    const result = await store.ask("   ");
    expect(result).toBeNull();
    expect(store.lastError?.kind).toBe("EmptyInput");
    expect(store.busy).toBe(false);
    expect(store.turns).toHaveLength(0);
    expect(store.viewState().error?.kind).toBe("EmptyInput");

    // A successful ask clears the inline error.
    const turn = await store.ask(COUNT_QUESTION);
    expect(turn?.status).toBe("done");
    expect(store.lastError).toBeNull();
  });

  it("shows failed turns as error bubbles with a follow-up suggestion", async () => {
    const stub = new StubApi();
    const store = makeStore(stub);
    stub.script("What is the weather tomorrow?", {
      fail: {
        error: "question cannot be answered from this dataset",
        suggestion: "Which test result is most common?",
      },
    });
    await store.init();
    await store.openSession("medical");
    const turn = await store.ask("What is the weather tomorrow?");
    expect(turn?.status).toBe("failed");
    expect(turn?.error).toContain("cannot be answered");
    expect(turn?.suggestion).toContain("most common");
    expect(turn?.stages).toEqual(["clarify"]);
  });

  it("pauses on confirmation, rejects busy asks, and resumes on approval", async () => {
    const stub = new StubApi();
    const store = makeStore(stub);
    stub.script(GROWTH_QUESTION, {
      awaitConfirmation: true,
      clarified: {
        clarified: "What is the year over year growth rate of loan amounts?",
        assumptions: ["growth rate means year over year change"],
      },
      results: [countResultEntry()],
    });
    await store.init();
    await store.openSession("medical");

    const paused = (await store.ask(GROWTH_QUESTION))!;
    expect(paused.status).toBe("running");
    expect(paused.awaitingConfirmation).toBe(true);
    expect(paused.stages).toEqual(["clarify", "decompose"]);
    expect(paused.clarifiedText).toContain("year over year");

    const rejected = await store.ask(COUNT_QUESTION);
    expect(rejected).toBeNull();
    expect(store.lastError?.kind).toBe("SessionBusy");

    const finished = (await store.confirm(paused.id, true))!;
    expect(finished.status).toBe("done");
    expect(finished.stages).toEqual([...STAGE_ORDER]);
    expect(finished.results).toHaveLength(1);
  });

  it("cancels a paused turn on rejection and frees the session", async () => {
    const stub = new StubApi();
    const store = makeStore(stub);
    stub.script(GROWTH_QUESTION, { awaitConfirmation: true, results: [countResultEntry()] });
    await store.init();
    await store.openSession("medical");

    const paused = (await store.ask(GROWTH_QUESTION))!;
    const cancelled = (await store.confirm(paused.id, false))!;
    expect(cancelled.status).toBe("failed");
    expect(cancelled.error).toContain("cancelled before execution");

    const next = await store.ask(COUNT_QUESTION);
    expect(next?.status).toBe("done");
  });

  it("switches the session model through the API", async () => {
    const stub = new StubApi();
    const store = makeStore(stub);
    await store.init();
    await store.openSession("medical");
    await store.switchModel("m-alt");
    expect(store.session?.model_id).toBe("m-alt");
    expect(store.viewState().activeModel).toBe("m-alt");
    expect(stub.requestLog.some((r) => r.method === "POST" && /\/model$/.test(r.path))).toBe(true);
  });
});
