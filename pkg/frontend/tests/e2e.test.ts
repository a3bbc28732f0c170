// Scripted end-to-end run against a live service: boots the real backend,
// drives the real UI through DOM clicks for 3 batches of 10 annotations, and
// lands on the report view. Requires the Python package to be installed
// (the `emoloop` entry point must be on PATH). The page URL matches the
// service origin, as it does in production where the UI is mounted at /ui.

/**
 * @vitest-environment happy-dom
 * @vitest-environment-options {"url": "http://127.0.0.1:8317"}
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { ApiClient } from "../src/api.js";
import { createApp, type App } from "../src/main.js";
import { memoryStorage, until } from "./helpers.js";

const PORT = 8317;
const BASE = `http://127.0.0.1:${PORT}`;
const LEAKS = ["source_type", "TypeA", "TypeB", "FARC", "AUC"];

let workdir: string;
let server: ChildProcess | null = null;

function cli(...args: string[]): void {
  const result = spawnSync("emoloop", args, { cwd: workdir, encoding: "utf-8" });
  if (result.status !== 0) {
    throw new Error(`emoloop ${args.join(" ")} failed:\n${result.stdout}\n${result.stderr}`);
  }
}

async function serverReady(): Promise<void> {
  const deadline = Date.now() + 60_000;
  for (;;) {
    try {
      const response = await fetch(`${BASE}/api/pools`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("service did not come up");
    await new Promise((resolve) => setTimeout(resolve, 300));
  }
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "emoloop-e2e-"));
  cli("synth", "pool", "--out", "pools/demo", "--per-type", "50", "--seed", "2024");
  cli("synth", "dataset", "--out", "train.csv", "--rows", "48", "--seed", "7");
  cli(
    "pretrain", "--dataset", "train.csv", "--out", "committee",
    "--members", "2", "--seed", "9", "--rounds", "3", "--learning-rate", "0.3",
  );
  server = spawn("emoloop", ["serve"], {
    cwd: workdir,
    env: {
      ...process.env,
      EMOLOOP_PORT: String(PORT),
      EMOLOOP_DATA_DIR: join(workdir, "data"),
      EMOLOOP_POOLS_DIR: join(workdir, "pools"),
      EMOLOOP_COMMITTEE_DIR: join(workdir, "committee"),
    },
    stdio: "ignore",
  });
  await serverReady();
});

afterAll(() => {
  server?.kill();
  rmSync(workdir, { recursive: true, force: true });
});

function assertNoSourceLeak(html: string): void {
  for (const leak of LEAKS) expect(html).not.toContain(leak);
}

describe("full annotation loop in the browser UI", () => {
  it("completes 3x10 annotations and reaches the report view", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app")!;
    const app: App = createApp(root, new ApiClient(BASE), memoryStorage());
    await app.render();

    // setup screen
    await until(() => root.querySelector("#start") !== null);
    assertNoSourceLeak(root.innerHTML);
    root.querySelector<HTMLInputElement>("#display-name")!.value = "e2e annotator";
    root.querySelector<HTMLInputElement>("#political-view")!.value = "none";
    root.querySelector<HTMLButtonElement>("#start")!.click();
    await until(() => app.flow.phase === "annotate" && root.querySelector("#submit") !== null);

    const quadrants = ["Q2", "Q1", "Q4", "Q3"];
    for (let round = 0; round < 3; round++) {
      await until(
        () => app.flow.session !== null && app.flow.session.pending_batch.length === 10,
      );
      assertNoSourceLeak(root.innerHTML);
      const pending = app.flow.session!.pending_batch.map((item) => item.excerpt_id);
      expect(pending).toHaveLength(10);

      for (let j = 0; j < pending.length; j++) {
        if (round === 0 && j === pending.length - 1) {
          // partial batch: submit must still be disabled before the last choice
          expect(root.querySelector<HTMLButtonElement>("#submit")!.disabled).toBe(true);
        }
        const selector =
          `button.quad[data-excerpt="${pending[j]}"][data-quadrant="${quadrants[j % 4]}"]`;
        root.querySelector<HTMLButtonElement>(selector)!.click();
      }
      expect(root.querySelector<HTMLButtonElement>("#submit")!.disabled).toBe(false);
      assertNoSourceLeak(root.innerHTML);

      const iterationBefore = app.flow.session!.iteration;
      root.querySelector<HTMLButtonElement>("#submit")!.click();
      await until(
        () =>
          app.flow.phase === "report" ||
          (app.flow.session !== null && app.flow.session.iteration === iterationBefore + 1),
      );
    }

    await until(() => root.querySelector(".report") !== null);
    expect(app.flow.session?.state).toBe("Finalized");
    expect(app.flow.session?.annotations_count).toBe(30);
    expect(app.flow.report?.ranking).toHaveLength(70);
    // the report view may name source types; that is the point of the audit
    expect(root.innerHTML).toContain("share of top");
    expect(root.querySelectorAll(".bar").length).toBeGreaterThanOrEqual(4);
  });

  it("keeps entered choices when the server rejects a stale batch", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app")!;
    const api = new ApiClient(BASE);
    const app: App = createApp(root, api, memoryStorage());

    // create a session directly, then adopt it in the UI
    const session = await api.createSession(
      { display_name: "conflict", political_view: "", vote_intent: "blank" },
      "demo",
    );
    await app.flow.resume(session.session_id);
    await app.render();
    await until(() => root.querySelector("#submit") !== null);

    // answer the batch out-of-band so the UI's copy goes stale
    await api.submitAnnotations(
      session.session_id,
      session.pending_batch.map((item) => ({ excerpt_id: item.excerpt_id, quadrant: "Q1" })),
    );

    for (const item of session.pending_batch) {
      root
        .querySelector<HTMLButtonElement>(
          `button.quad[data-excerpt="${item.excerpt_id}"][data-quadrant="Q2"]`,
        )!
        .click();
    }
    root.querySelector<HTMLButtonElement>("#submit")!.click();
    await until(() => app.flow.violations.length > 0);

    // UI refetched the session and now shows the fresh pending batch
    const freshIds = new Set(app.flow.session!.pending_batch.map((i) => i.excerpt_id));
    expect(app.flow.session!.iteration).toBe(1);
    expect(freshIds.size).toBe(10);
    for (const chosen of Object.keys(app.flow.choices)) {
      expect(freshIds.has(chosen)).toBe(true);
    }
  });
});
