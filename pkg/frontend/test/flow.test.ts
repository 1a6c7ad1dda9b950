/**
 * The whole console exercised end to end against the stubbed API:
 * open a session, ask, watch stage events arrive in pipeline order,
 * switch a pie to a bar without network traffic, bookmark two results
 * and compare them side by side. Finishes with the contract check that
 * every request stayed on the documented endpoint surface.
 */

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { buildChartSpec } from "../src/charts.js";
import { renderChart, renderCompare, renderSession } from "../src/render.js";
import { ConsoleStore } from "../src/store.js";
import { STAGE_ORDER } from "../src/types.js";
import { activeRecommendation } from "../src/view.js";
import {
  AVG_QUESTION,
  AVG_SQL,
  COUNT_QUESTION,
  COUNT_SQL,
  StubApi,
  averageResultEntry,
  countResultEntry,
  isDocumented,
} from "./stub.js";

describe("console flow", () => {
  it("covers session, question, chart switch, bookmarks and compare", async () => {
    const stub = new StubApi();
    stub.addDataset("medical");
    stub.script(COUNT_QUESTION, {
      results: [countResultEntry()],
      clarified: { assumptions: ["counting rows per distinct test_result"] },
    });
    stub.script(AVG_QUESTION, { results: [averageResultEntry()] });
    const store = new ConsoleStore(new ApiClient("http://stub.local", stub.fetch), {
      pollIntervalMs: 1,
    });

    await store.init();
    expect(store.models).toEqual(["m-default", "m-alt"]);

    const session = await store.openSession("medical");
    expect(session.model_id).toBe("m-default");

    // Stage events stream in while the turn runs, in pipeline order.
    const snapshots: string[][] = [];
    const unsubscribe = store.subscribe(() => {
      const stages = store.turns[0]?.stages;
      if (stages && stages.length > 0) {
        snapshots.push([...stages]);
      }
    });
    const first = (await store.ask(COUNT_QUESTION))!;
    unsubscribe();
    expect(first.status).toBe("done");
    expect(first.stages).toEqual([...STAGE_ORDER]);
    for (const snapshot of snapshots) {
      expect(snapshot).toEqual([...STAGE_ORDER].slice(0, snapshot.length));
    }
    const distinctDepths = new Set(snapshots.map((s) => s.length));
    expect(distinctDepths.size).toBe(STAGE_ORDER.length);

    // The default chart is the top recommendation: a pie.
    expect(first.results[0]!.activeChartType).toBe("pie");
    expect(first.results[0]!.sql).toBe(COUNT_SQL);

    // Switch pie to bar: same bindings, no network traffic.
    const requestsBefore = stub.requestLog.length;
    expect(store.switchChart(first.id, 0, "bar")).toBe(true);
    expect(stub.requestLog.length).toBe(requestsBefore);
    const active = activeRecommendation(first.results[0]!)!;
    expect(active.chart_type).toBe("bar");
    expect(active.axis_bindings).toEqual({ x: "test_result", y: "count" });
    const barHtml = renderChart(buildChartSpec(active, first.results[0]!.result!));
    expect(barHtml).toContain("chart-bar");
    expect(barHtml).toContain("negative");

    // Second question, then bookmark both results.
    const second = (await store.ask(AVG_QUESTION))!;
    expect(second.status).toBe("done");
    const b1 = await store.bookmarkResult(first.id, 0, "counts by result");
    const b2 = await store.bookmarkResult(second.id, 0, "average age by result");
    expect(store.bookmarks.map((b) => b.label)).toEqual([
      "counts by result",
      "average age by result",
    ]);

    // Compare renders both, side by side, in selection order.
    const panels = await store.compare([b1.id, b2.id]);
    expect(panels.map((p) => p.label)).toEqual(["counts by result", "average age by result"]);
    expect(panels[0]!.sql).toBe(COUNT_SQL);
    expect(panels[1]!.sql).toBe(AVG_SQL);
    const compareHtml = renderCompare(panels);
    expect(compareHtml).toContain("repeat(2, 1fr)");
    expect((compareHtml.match(/compare-panel/g) ?? []).length).toBe(2);
    expect(compareHtml.indexOf("counts by result")).toBeLessThan(
      compareHtml.indexOf("average age by result"),
    );

    // The assembled page holds both turns, the switcher and the bookmarks.
    const page = renderSession(store.viewState());
    expect(page).toContain("model-switcher");
    expect(page).toContain(COUNT_QUESTION);
    expect(page).toContain(AVG_QUESTION);
    expect(page).toContain("counts by result");

    // Contract: the console never left the documented endpoint surface.
    expect(stub.requestLog.length).toBeGreaterThan(0);
    for (const request of stub.requestLog) {
      expect(isDocumented(request.method, request.path), `${request.method} ${request.path}`).toBe(
        true,
      );
    }
  });
});
