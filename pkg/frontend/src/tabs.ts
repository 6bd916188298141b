/**
 * Tab renderers: pure functions from (view state, API data) to HTML.
 * The DOM layer only injects the returned strings and wires events by id.
 */

import { ClusterResponse, EdiResponse, GeoJson, ScreenResponse, SummaryResponse,
         UploadResponse } from "./api.js";
import { choropleth, clusterBoxes, clusterColor, clusterMap, ediTable, escapeHtml,
         facetBars, legend, scatter, screeningTable, trendLine } from "./charts.js";
import { FACETS, ViewState, effectiveK } from "./state.js";

function options(values: readonly (string | number)[], current: string | number): string {
  return values.map((v) =>
    `<option value="${escapeHtml(String(v))}"${String(v) === String(current) ? " selected" : ""}>`
    + `${escapeHtml(String(v))}</option>`).join("");
}

export function renderTabBar(state: ViewState): string {
  const tabs: [string, string][] = [["edi", "EDI"], ["cluster", "Cluster"], ["class", "CLASS"]];
  return `<nav class="tabs">` + tabs.map(([id, title]) =>
    `<button data-tab="${id}" class="${state.tab === id ? "active" : ""}">${title}</button>`)
    .join("") + `</nav>`;
}

export interface EdiTabData {
  edi: EdiResponse;
  geo: GeoJson | null;
  /** per-wave values for the selected neighborhood, when one is selected */
  trend: { neighborhood: string; values: { wave: number; value: number }[] } | null;
}

export function renderEdiTab(state: ViewState, data: EdiTabData): string {
  const values: Record<string, number> = {};
  for (const row of data.edi.rows) values[row.neighborhood_id] = row.value;
  const map = data.geo
    ? choropleth(data.geo, values, 420, 320, (v) => `${v.toFixed(1)}%`)
    : `<p class="note">no boundary file loaded; table view only</p>`;
  const trend = data.trend
    ? `<section class="trend-panel"><h3>${escapeHtml(data.trend.neighborhood)} across waves</h3>`
      + trendLine(data.trend.values) + `</section>`
    : `<p class="note">click a neighborhood for its trend across waves</p>`;
  return `
<section class="controls">
  <label>wave <select id="edi-wave">${options(data.edi.waves, state.wave)}</select></label>
  <label>scale <select id="edi-scale">${options(data.edi.scales, state.scale)}</select></label>
</section>
<section class="panes">
  <div class="pane">${map}</div>
  <div class="pane">${trend}${ediTable(data.edi.rows)}</div>
</section>`;
}

export interface ClusterTabData {
  cluster: ClusterResponse;
  screen: ScreenResponse | null;
  suggested: string[];
  geo: GeoJson | null;
}

export function renderClusterTab(state: ViewState, data: ClusterTabData): string {
  const k = data.cluster.k;
  const labels = [...Array(k).keys()];
  const map = data.geo ? clusterMap(data.geo, data.cluster.neighborhood_labels) : "";
  const screening = data.screen
    ? `<h3>${data.screen.significant.length} significant census variables at
       &alpha; = ${data.screen.alpha}</h3>`
      + (data.suggested.length
         ? `<p class="suggest">worth a look: ${data.suggested.map(escapeHtml).join(", ")}</p>` : "")
      + screeningTable(data.screen.results, state.variables)
    : `<p class="note">no census data loaded</p>`;
  return `
<section class="controls">
  <label>mode <select id="cluster-mode">${options(["single_wave", "all_wave"], state.mode)}</select></label>
  <label>wave <select id="cluster-wave" ${state.mode === "all_wave" ? "disabled" : ""}>
    ${options([2, 3, 4, 5, 6], state.wave)}</select></label>
  <label>method <select id="cluster-method">${options(["tsne", "umap"], state.method)}</select></label>
  <label>k <input id="cluster-k" type="number" min="1" max="12" value="${effectiveK(state)}"></label>
  <label>seed <input id="cluster-seed" type="number" value="${state.seed}"></label>
  <label>&alpha; <input id="cluster-alpha" type="number" step="0.01" min="0.001" max="0.5"
    value="${state.alpha}"></label>
</section>
<section class="panes">
  <div class="pane"><h3>${escapeHtml(data.cluster.method)} projection, k = ${k}</h3>
    ${scatter(data.cluster.points)}
    ${legend(labels.map((l) => ({ label: `cluster ${l}`, color: clusterColor(l) })))}
  </div>
  <div class="pane"><h3>cluster map</h3>${map}
    <h3>${escapeHtml(state.scale)} by cluster</h3>
    ${clusterBoxes(data.cluster.cluster_summaries, state.scale)}
  </div>
</section>
<section class="screen-panel">${screening}</section>`;
}

export interface ClassTabData {
  upload: UploadResponse | null;
  summary: SummaryResponse | null;
}

export function renderClassTab(state: ViewState, data: ClassTabData): string {
  const uploadPanel = `
<section class="controls">
  <label class="upload">registration CSV <input type="file" id="class-file" accept=".csv"></label>
  <label>facet <select id="class-facet">${options(FACETS, state.facet)}</select></label>
</section>`;
  if (!data.upload) {
    return uploadPanel + `<p class="note">upload a registration extract to see
      entry/exit/season and neighborhood-share charts; data stays in this
      session only and is gone after a reload</p>`;
  }
  const rejectionRows = Object.entries(data.upload.rejections).sort()
    .map(([reason, count]) => `<tr><td>${escapeHtml(reason)}</td><td>${count}</td></tr>`);
  const rejected = rejectionRows.length
    ? `<details class="rejections"><summary>${data.upload.n_records - data.upload.n_kept}
       records rejected</summary><table><thead><tr><th>reason</th><th>count</th></tr></thead>
       <tbody>${rejectionRows.join("")}</tbody></table></details>`
    : "";
  const chart = data.summary ? facetBars(data.summary) : "";
  return uploadPanel + `
<section class="panes">
  <div class="pane">
    <p>${data.upload.n_kept} of ${data.upload.n_records} records kept,
       ${data.upload.n_journeys} client journeys</p>
    ${rejected}
  </div>
  <div class="pane"><h3>${escapeHtml(state.facet)}</h3>${chart}</div>
</section>`;
}

export function renderError(message: string): string {
  return `<div class="banner error">${escapeHtml(message)}</div>`;
}

export function renderBusy(): string {
  return `<div class="banner busy">running&hellip;</div>`;
}
