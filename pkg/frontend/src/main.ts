// Bootstrap: wires the flow to the DOM and re-renders on every state change.

import { ApiClient } from "./api.js";
import { AnnotationFlow } from "./state.js";
import type { DraftStorage } from "./state.js";
import { renderAnnotation, renderReport, renderRetraining, renderSetup } from "./views.js";

export interface App {
  flow: AnnotationFlow;
  render(): Promise<void>;
}

export function createApp(root: HTMLElement, api: ApiClient, storage: DraftStorage): App {
  const flow = new AnnotationFlow(api, storage);

  async function render(): Promise<void> {
    if (flow.phase === "setup") {
      const pools = await api.listPools();
      renderSetup(root, pools, (name, view, vote, pool) => {
        void flow
          .start({ display_name: name, political_view: view, vote_intent: vote as never }, pool)
          .then(render);
      });
      return;
    }
    if (flow.phase === "retraining") {
      renderRetraining(root);
      await flow.pollUntilSettled();
      await render();
      return;
    }
    if (flow.phase === "report") {
      if (!flow.report) await flow.loadReport();
      renderReport(root, flow.report!);
      root.querySelector<HTMLSelectElement>("#top-k")?.addEventListener("change", (event) => {
        const k = Number((event.target as HTMLSelectElement).value);
        void flow.setTopK(k).then(render);
      });
      return;
    }
    renderAnnotation(root, flow);
    for (const button of root.querySelectorAll<HTMLButtonElement>("button.quad")) {
      button.addEventListener("click", () => {
        flow.choose(button.dataset.excerpt!, button.dataset.quadrant as never);
        void render();
      });
    }
    root.querySelector<HTMLButtonElement>("#submit")?.addEventListener("click", () => {
      void flow.submit().then(render);
    });
    root.querySelector<HTMLButtonElement>("#retry")?.addEventListener("click", () => {
      void flow.submit().then(render);
    });
  }

  return { flow, render };
}

declare global {
  interface Window {
    __emoloopTest?: boolean;
  }
}

if (typeof window !== "undefined" && !window.__emoloopTest) {
  const root = document.getElementById("app");
  if (root) {
    const app = createApp(root, new ApiClient(""), window.localStorage);
    void app.render();
  }
}
