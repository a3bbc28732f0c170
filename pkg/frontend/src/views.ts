// Render functions. Each takes the root element and paints one screen from
// the flow state; all interaction is delegated back through the flow.

import type { AnnotationFlow } from "./state.js";
import type { BiasReport, PoolInfo } from "./api.js";
import { QUADRANT_GRID } from "./quadrants.js";

const esc = (text: string) =>
  text.replace(/[&<>"]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" }[c]!));

export function renderSetup(
  root: HTMLElement,
  pools: PoolInfo[],
  onStart: (displayName: string, politicalView: string, voteIntent: string, poolId: string) => void,
): void {
  root.innerHTML = `
    <section class="setup">
      <h1>emoloop annotation</h1>
      <p>You will hear three rounds of ten excerpts and pick, for each one,
         the emotion the music induces in you.</p>
      <label>Name <input id="display-name" type="text" placeholder="your name"></label>
      <label>Political view (free text) <input id="political-view" type="text"></label>
      <fieldset id="vote-intent">
        <legend>If the elections were held today, you would vote for...</legend>
        <label><input type="radio" name="vote" value="left"> the left-wing candidate</label>
        <label><input type="radio" name="vote" value="right"> the right-wing candidate</label>
        <label><input type="radio" name="vote" value="blank" checked> cast a blank vote</label>
      </fieldset>
      <label>Excerpt pool
        <select id="pool">${pools
          .map((p) => `<option value="${esc(p.pool_id)}">${esc(p.pool_id)} (${p.size} excerpts)</option>`)
          .join("")}</select>
      </label>
      <button id="start" ${pools.length ? "" : "disabled"}>Start session</button>
    </section>`;
  root.querySelector<HTMLButtonElement>("#start")!.addEventListener("click", () => {
    const name = root.querySelector<HTMLInputElement>("#display-name")!.value.trim();
    const view = root.querySelector<HTMLInputElement>("#political-view")!.value.trim();
    const vote =
      root.querySelector<HTMLInputElement>("#vote-intent input:checked")?.value ?? "blank";
    const pool = root.querySelector<HTMLSelectElement>("#pool")!.value;
    if (name) onStart(name, view, vote, pool);
  });
}

export function renderAnnotation(root: HTMLElement, flow: AnnotationFlow): void {
  const session = flow.session!;
  const progress = flow.progress();
  const items = session.pending_batch
    .map((item, index) => {
      const chosen = flow.choices[item.excerpt_id];
      const cells = QUADRANT_GRID.map(
        (cell) => `
          <button class="quad ${chosen === cell.quadrant ? "chosen" : ""}"
                  data-excerpt="${esc(item.excerpt_id)}" data-quadrant="${cell.quadrant}"
                  title="${esc(cell.axis)}">
            <strong>${cell.quadrant}</strong><span>${esc(cell.words)}</span>
          </button>`,
      ).join("");
      return `
        <article class="item" data-item="${esc(item.excerpt_id)}">
          <header>${index + 1}. ${esc(item.title)}</header>
          <audio controls preload="none" src="${esc(flow.api.audioUrl(item.excerpt_id))}"></audio>
          <div class="quad-grid">${cells}</div>
        </article>`;
    })
    .join("");
  const violations = flow.violations
    .map((v) => `<li>${esc(v.detail)}</li>`)
    .join("");
  root.innerHTML = `
    <section class="annotate">
      <p class="progress">iteration ${progress.iteration} of ${progress.total} ·
         ${progress.chosen} of ${progress.batch} chosen</p>
      ${flow.lastError ? `<div class="error">${esc(flow.lastError)}<ul>${violations}</ul>
        <button id="retry">Retry</button></div>` : ""}
      ${items}
      <button id="submit" ${flow.canSubmit() ? "" : "disabled"}>Submit batch</button>
    </section>`;
}

export function renderRetraining(root: HTMLElement): void {
  root.innerHTML = `
    <section class="retraining">
      <p>Retraining the committee on your annotations…</p>
      <div class="spinner"></div>
    </section>`;
}

function bar(label: string, value: number | null, max = 1): string {
  if (value === null) return `<div class="bar-row"><span>${esc(label)}</span><em>n/a</em></div>`;
  const pct = Math.round((100 * value) / max);
  return `
    <div class="bar-row">
      <span>${esc(label)}</span>
      <div class="bar"><div class="fill" style="width:${pct}%"></div></div>
      <em>${(100 * value).toFixed(1)}%</em>
    </div>`;
}

export function renderReport(root: HTMLElement, report: BiasReport): void {
  const types = Object.keys(report.counts).sort();
  const shares = types.map((t) => bar(`${t} share of top ${report.top_k}`, report.share[t] ?? 0)).join("");
  const means = types.map((t) => bar(`${t} mean p(Q2)`, report.mean_q2[t])).join("");
  const rows = report.ranking
    .slice(0, report.top_k)
    .map(([eid, p], i) => `<tr><td>${i + 1}</td><td>${esc(eid)}</td><td>${p.toFixed(4)}</td></tr>`)
    .join("");
  root.innerHTML = `
    <section class="report">
      <h1>Bias report</h1>
      <label>top-k
        <select id="top-k">
          ${[5, 10, 20].map((k) => `<option value="${k}" ${k === report.requested_top_k ? "selected" : ""}>${k}</option>`).join("")}
        </select>
      </label>
      <h2>Top-${report.top_k} composition</h2>
      ${shares}
      <h2>Mean Q2 probability over the test pool</h2>
      ${means}
      <h2>Ranking head</h2>
      <table><thead><tr><th>#</th><th>excerpt</th><th>p(Q2)</th></tr></thead>
        <tbody>${rows}</tbody></table>
    </section>`;
}
