/**
 * Dashboard view state, fully URL-serializable so any view is shareable.
 * Upload sessions are deliberately NOT serialized: reloading the page must
 * drop registration data (privacy contract).
 */

export type Tab = "edi" | "cluster" | "class";
export type Method = "tsne" | "umap";
export type Mode = "single_wave" | "all_wave";

export interface ViewState {
  tab: Tab;
  wave: number;
  scale: string;
  method: Method;
  mode: Mode;
  /** null means "method default" (3 single-wave; 6 t-SNE / 4 UMAP all-wave). */
  k: number | null;
  alpha: number;
  seed: number;
  /** census variables pinned open in the screening panel */
  variables: string[];
  facet: string;
}

export const DEFAULT_STATE: ViewState = {
  tab: "edi",
  wave: 6,
  scale: "one_or_more",
  method: "tsne",
  mode: "single_wave",
  k: null,
  alpha: 0.05,
  seed: 42,
  variables: [],
  facet: "exit_age",
};

export const SCALES = [
  "physical", "social", "emotional", "language_cognitive", "communication",
  "one_or_more", "two_or_more",
] as const;

export const FACETS = [
  "entry_age", "exit_age", "span", "entry_group_gender",
  "exit_group_gender", "season_entry_age_group", "neighborhood_share",
] as const;

/** Effective cluster count when the user has not overridden k. */
export function effectiveK(state: ViewState): number {
  if (state.k !== null) return state.k;
  if (state.mode === "single_wave") return 3;
  return state.method === "umap" ? 4 : 6;
}

export function serializeState(state: ViewState): string {
  const params = new URLSearchParams();
  const set = (key: string, value: string, fallback: string) => {
    if (value !== fallback) params.set(key, value);
  };
  set("tab", state.tab, DEFAULT_STATE.tab);
  set("wave", String(state.wave), String(DEFAULT_STATE.wave));
  set("scale", state.scale, DEFAULT_STATE.scale);
  set("method", state.method, DEFAULT_STATE.method);
  set("mode", state.mode, DEFAULT_STATE.mode);
  if (state.k !== null) params.set("k", String(state.k));
  set("alpha", String(state.alpha), String(DEFAULT_STATE.alpha));
  set("seed", String(state.seed), String(DEFAULT_STATE.seed));
  if (state.variables.length > 0) params.set("vars", state.variables.join(","));
  set("facet", state.facet, DEFAULT_STATE.facet);
  const query = params.toString();
  return query ? `?${query}` : "";
}

export function deserializeState(search: string): ViewState {
  const params = new URLSearchParams(search);
  const state: ViewState = { ...DEFAULT_STATE, variables: [] };

  const tab = params.get("tab");
  if (tab === "edi" || tab === "cluster" || tab === "class") state.tab = tab;
  const wave = parseInt(params.get("wave") ?? "", 10);
  if (wave >= 2 && wave <= 6) state.wave = wave;
  const scale = params.get("scale");
  if (scale && (SCALES as readonly string[]).includes(scale)) state.scale = scale;
  const method = params.get("method");
  if (method === "tsne" || method === "umap") state.method = method;
  const mode = params.get("mode");
  if (mode === "single_wave" || mode === "all_wave") state.mode = mode;
  const k = parseInt(params.get("k") ?? "", 10);
  if (k >= 1) state.k = k;
  const alpha = parseFloat(params.get("alpha") ?? "");
  if (alpha > 0 && alpha < 1) state.alpha = alpha;
  const seed = parseInt(params.get("seed") ?? "", 10);
  if (Number.isFinite(seed)) state.seed = seed;
  const vars = params.get("vars");
  if (vars) state.variables = vars.split(",").filter((v) => v.length > 0);
  const facet = params.get("facet");
  if (facet && (FACETS as readonly string[]).includes(facet)) state.facet = facet;
  return state;
}
