import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { AnnotationFlow } from "../src/state.js";
import { renderAnnotation, renderReport, renderSetup } from "../src/views.js";
import type { BiasReport } from "../src/api.js";
import { FakeApi, memoryStorage, sessionView } from "./helpers.js";

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app")!;
});

function annotationDom(choose: Record<string, "Q1" | "Q2" | "Q3" | "Q4"> = {}) {
  const flow = new AnnotationFlow(new FakeApi() as unknown as ApiClient, memoryStorage());
  flow.adopt(sessionView());
  for (const [eid, q] of Object.entries(choose)) flow.choose(eid, q);
  renderAnnotation(root, flow);
  return flow;
}

describe("setup view", () => {
  it("offers the three forced-choice vote options and the pools", () => {
    renderSetup(root, [{ pool_id: "demo", size: 100 }], () => {});
    const votes = [...root.querySelectorAll<HTMLInputElement>("#vote-intent input")];
    expect(votes.map((v) => v.value)).toEqual(["left", "right", "blank"]);
    expect(root.querySelector("#pool")?.textContent).toContain("demo");
  });
});

describe("annotation view", () => {
  it("disables submit while the batch is partial and enables it when complete", () => {
    annotationDom({ a: "Q2" });
    expect(root.querySelector<HTMLButtonElement>("#submit")?.disabled).toBe(true);
    annotationDom({ a: "Q2", b: "Q4" });
    expect(root.querySelector<HTMLButtonElement>("#submit")?.disabled).toBe(false);
  });

  it("shows the quadrant grid with the emotion words", () => {
    annotationDom();
    const text = root.innerHTML;
    expect(text).toContain("tension, anger, fear");
    expect(text).toContain("joy, wonder, power");
    expect(text).toContain("sadness, bitterness");
    expect(text).toContain("tenderness, peacefulness, transcendence");
  });

  it("shows iteration and item progress", () => {
    annotationDom({ a: "Q1" });
    expect(root.querySelector(".progress")?.textContent).toContain("iteration 1 of 3");
    expect(root.querySelector(".progress")?.textContent).toContain("1 of 2 chosen");
  });

  it("never mentions source types before the report", () => {
    annotationDom({ a: "Q2", b: "Q2" });
    const dom = root.innerHTML;
    for (const leak of ["source_type", "TypeA", "TypeB", "FARC", "AUC"]) {
      expect(dom).not.toContain(leak);
    }
  });

  it("marks the chosen quadrant", () => {
    annotationDom({ a: "Q3" });
    const chosen = root.querySelector('button.quad.chosen[data-excerpt="a"]');
    expect(chosen?.getAttribute("data-quadrant")).toBe("Q3");
  });
});

describe("report view", () => {
  const report: BiasReport = {
    schema_version: 1,
    session_id: "s1",
    top_k: 10,
    requested_top_k: 10,
    clamped: false,
    ranking: [["x001", 0.91], ["x002", 0.88]],
    counts: { TypeA: 1, TypeB: 9 },
    share: { TypeA: 0.1, TypeB: 0.9 },
    mean_q2: { TypeA: 0.21, TypeB: 0.74 },
    config: {},
  };

  it("renders share and mean bars per source type", () => {
    renderReport(root, report);
    expect(root.innerHTML).toContain("TypeA share of top 10");
    expect(root.innerHTML).toContain("TypeB mean p(Q2)");
    expect([...root.querySelectorAll(".bar")].length).toBe(4);
  });

  it("handles an absent type as n/a", () => {
    renderReport(root, { ...report, mean_q2: { TypeA: null, TypeB: 0.5 } });
    expect(root.innerHTML).toContain("n/a");
  });

  it("offers a top-k selector", () => {
    renderReport(root, report);
    const select = root.querySelector<HTMLSelectElement>("#top-k");
    expect(select).not.toBeNull();
    expect(select!.value).toBe("10");
  });
});
