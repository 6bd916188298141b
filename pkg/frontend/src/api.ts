/**
 * Typed client over the analytics service.  The dashboard never computes
 * statistics itself; every number on screen comes from these calls.
 */

import { Method, Mode, ViewState, effectiveK } from "./state.js";

export interface EdiRow {
  neighborhood_id: string;
  neighborhood_name: string;
  wave: number;
  n_children: number;
  value: number;
}

export interface EdiResponse {
  wave: number;
  scale: string;
  rows: EdiRow[];
  waves: number[];
  scales: string[];
}

export interface ClusterPoint {
  key: string;
  wave: number | null;
  x: number;
  y: number;
  label: number;
}

export interface ScaleSummary {
  min: number;
  max: number;
  median: number;
  q1: number;
  q3: number;
}

export interface ClusterResponse {
  mode: string;
  method: string;
  k: number;
  wave: number | null;
  wcss: number;
  seed: number;
  points: ClusterPoint[];
  neighborhood_labels: Record<string, number>;
  cluster_summaries: Record<string, { size: number; scales: Record<string, ScaleSummary> }>;
}

export interface ScreeningRow {
  var_id: string;
  label: string;
  category: string;
  test_used: string;
  statistic: number | null;
  p_value: number | null;
  significant: boolean;
  skip_reason: string | null;
}

export interface ScreenResponse {
  alpha: number;
  correction: string;
  mode: string;
  k: number;
  results: ScreeningRow[];
  significant: string[];
}

export interface UploadResponse {
  session: string;
  n_records: number;
  n_kept: number;
  n_journeys: number;
  rejections: Record<string, number>;
  rejected_rows: { row: number; client_id: string; reason: string }[];
}

export interface SummaryResponse {
  facet: string;
  key_columns: string[];
  normalizer: string[];
  rows: (string | number)[][];
}

export type GeoJson = {
  type: "FeatureCollection";
  features: {
    type: "Feature";
    properties: { id: string; name?: string };
    geometry: { type: "Polygon" | "MultiPolygon"; coordinates: number[][][] | number[][][][] };
  }[];
};

export class ApiError extends Error {
  constructor(public code: string, message: string, public status: number) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(base + path, init);
  const body = await response.json();
  if (!response.ok) {
    const error = (body as { error?: { code?: string; message?: string } }).error;
    throw new ApiError(error?.code ?? "http_error",
      error?.message ?? `HTTP ${response.status}`, response.status);
  }
  return body as T;
}

function clusterBody(state: ViewState) {
  return {
    mode: state.mode as Mode,
    method: state.method as Method,
    wave: state.mode === "single_wave" ? state.wave : null,
    k: effectiveK(state),
    seed: state.seed,
  };
}

export class ApiClient {
  constructor(private base: string = "") {}

  health(): Promise<{ status: string }> {
    return request(this.base, "/api/health");
  }

  edi(wave: number, scale: string, signal?: AbortSignal): Promise<EdiResponse> {
    return request(this.base, `/api/edi?wave=${wave}&scale=${encodeURIComponent(scale)}`,
      { signal });
  }

  cluster(state: ViewState, signal?: AbortSignal): Promise<ClusterResponse> {
    return request(this.base, "/api/cluster", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(clusterBody(state)),
      signal,
    });
  }

  screen(state: ViewState, signal?: AbortSignal): Promise<ScreenResponse> {
    return request(this.base, "/api/census/screen", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ ...clusterBody(state), alpha: state.alpha }),
      signal,
    });
  }

  suggest(topN: number, signal?: AbortSignal): Promise<{ suggested: string[] }> {
    return request(this.base, `/api/census/suggest?top_n=${topN}`, { signal });
  }

  upload(csv: string): Promise<UploadResponse> {
    return request(this.base, "/api/class/upload", {
      method: "POST",
      headers: { "content-type": "text/csv" },
      body: csv,
    });
  }

  classSummary(session: string, facet: string, signal?: AbortSignal): Promise<SummaryResponse> {
    return request(this.base,
      `/api/class/summary?session=${encodeURIComponent(session)}&facet=${encodeURIComponent(facet)}`,
      { signal });
  }

  geo(signal?: AbortSignal): Promise<GeoJson> {
    return request(this.base, "/api/geo/neighborhoods", { signal });
  }
}
