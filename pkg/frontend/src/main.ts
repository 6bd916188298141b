/**
 * DOM bootstrap: owns the mutable view state, syncs it with the URL, and
 * re-renders tabs from fresh API data.  In-flight requests are aborted when
 * the state changes (latest wins); service errors show a banner and keep
 * the stale view.
 */

import { ApiClient, ClusterResponse, EdiResponse, GeoJson, ScreenResponse,
         SummaryResponse, UploadResponse } from "./api.js";
import { DEFAULT_STATE, ViewState, deserializeState, serializeState } from "./state.js";
import { ClassTabData, ClusterTabData, EdiTabData, renderBusy, renderClassTab,
         renderClusterTab, renderEdiTab, renderError, renderTabBar } from "./tabs.js";

const api = new ApiClient("");
const app = document.getElementById("app")!;
const banner = document.getElementById("banner")!;

let state: ViewState = deserializeState(window.location.search);
let controller: AbortController | null = null;
let geoCache: GeoJson | null = null;
let trendNeighborhood: string | null = null;

// per-session upload handle; intentionally dropped on reload
let upload: UploadResponse | null = null;
let uploadCsv: string | null = null;

function pushState(changes: Partial<ViewState>): void {
  state = { ...state, ...changes };
  window.history.replaceState(null, "", serializeState(state) || window.location.pathname);
  void refresh();
}

async function geo(signal: AbortSignal): Promise<GeoJson | null> {
  if (geoCache) return geoCache;
  try {
    geoCache = await api.geo(signal);
  } catch {
    geoCache = null;
  }
  return geoCache;
}

async function refresh(): Promise<void> {
  controller?.abort();
  controller = new AbortController();
  const { signal } = controller;
  banner.innerHTML = renderBusy();
  try {
    let body = renderTabBar(state);
    if (state.tab === "edi") {
      body += await ediTab(signal);
    } else if (state.tab === "cluster") {
      body += await clusterTab(signal);
    } else {
      body += await classTab(signal);
    }
    if (signal.aborted) return;
    app.innerHTML = body;
    banner.innerHTML = "";
    wire();
  } catch (error) {
    if (signal.aborted) return;
    banner.innerHTML = renderError(error instanceof Error ? error.message : String(error));
  }
}

async function ediTab(signal: AbortSignal): Promise<string> {
  const edi: EdiResponse = await api.edi(state.wave, state.scale, signal);
  const data: EdiTabData = { edi, geo: await geo(signal), trend: null };
  if (trendNeighborhood) {
    const values: { wave: number; value: number }[] = [];
    for (const wave of edi.waves) {
      const perWave = wave === state.wave ? edi : await api.edi(wave, state.scale, signal);
      const row = perWave.rows.find((r) => r.neighborhood_id === trendNeighborhood);
      if (row) values.push({ wave, value: row.value });
    }
    data.trend = { neighborhood: trendNeighborhood, values };
  }
  return renderEdiTab(state, data);
}

async function clusterTab(signal: AbortSignal): Promise<string> {
  const cluster: ClusterResponse = await api.cluster(state, signal);
  let screen: ScreenResponse | null = null;
  let suggested: string[] = [];
  try {
    screen = await api.screen(state, signal);
    suggested = (await api.suggest(5, signal)).suggested;
  } catch {
    screen = null;   // census data is optional server-side
  }
  const data: ClusterTabData = { cluster, screen, suggested, geo: await geo(signal) };
  return renderClusterTab(state, data);
}

async function classTab(signal: AbortSignal): Promise<string> {
  let summary: SummaryResponse | null = null;
  if (upload) {
    try {
      summary = await api.classSummary(upload.session, state.facet, signal);
    } catch {
      // the session evaporates when the service restarts; re-upload silently
      if (uploadCsv) {
        upload = await api.upload(uploadCsv);
        summary = await api.classSummary(upload.session, state.facet, signal);
      }
    }
  }
  const data: ClassTabData = { upload, summary };
  return renderClassTab(state, data);
}

function wire(): void {
  app.querySelectorAll<HTMLButtonElement>("[data-tab]").forEach((button) => {
    button.onclick = () => pushState({ tab: button.dataset.tab as ViewState["tab"] });
  });
  bindSelect("edi-wave", (v) => pushState({ wave: parseInt(v, 10) }));
  bindSelect("edi-scale", (v) => pushState({ scale: v }));
  bindSelect("cluster-mode", (v) => pushState({ mode: v as ViewState["mode"], k: null }));
  bindSelect("cluster-wave", (v) => pushState({ wave: parseInt(v, 10) }));
  bindSelect("cluster-method", (v) => pushState({ method: v as ViewState["method"], k: null }));
  bindInput("cluster-k", (v) => pushState({ k: parseInt(v, 10) || null }));
  bindInput("cluster-seed", (v) => pushState({ seed: parseInt(v, 10) || DEFAULT_STATE.seed }));
  bindInput("cluster-alpha", (v) => pushState({ alpha: parseFloat(v) || DEFAULT_STATE.alpha }));
  bindSelect("class-facet", (v) => pushState({ facet: v }));

  app.querySelectorAll<SVGPathElement>(".choropleth path").forEach((path) => {
    path.onclick = () => {
      trendNeighborhood = path.dataset.region ?? null;
      void refresh();
    };
  });

  const file = document.getElementById("class-file") as HTMLInputElement | null;
  if (file) {
    file.onchange = async () => {
      const chosen = file.files?.[0];
      if (!chosen) return;
      banner.innerHTML = renderBusy();
      try {
        uploadCsv = await chosen.text();
        upload = await api.upload(uploadCsv);
        banner.innerHTML = "";
        void refresh();
      } catch (error) {
        banner.innerHTML = renderError(error instanceof Error ? error.message : String(error));
      }
    };
  }
}

function bindSelect(id: string, apply: (value: string) => void): void {
  const element = document.getElementById(id) as HTMLSelectElement | null;
  if (element) element.onchange = () => apply(element.value);
}

function bindInput(id: string, apply: (value: string) => void): void {
  const element = document.getElementById(id) as HTMLInputElement | null;
  if (element) element.onchange = () => apply(element.value);
}

window.addEventListener("popstate", () => {
  state = deserializeState(window.location.search);
  void refresh();
});

void refresh();
