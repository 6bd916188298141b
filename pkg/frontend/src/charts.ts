/**
 * Pure SVG/HTML string builders.  Every figure is a deterministic function
 * of (view state, API responses), which keeps snapshot tests stable and the
 * DOM layer trivial.
 */

import { ClusterResponse, EdiRow, GeoJson, ScaleSummary, ScreeningRow, SummaryResponse } from "./api.js";

export function escapeHtml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const fmt = (value: number): string => (Math.round(value * 100) / 100).toFixed(2);

/** Sequential light-yellow to dark-red ramp over [0, 1]. */
export function rampColor(t: number): string {
  const clamped = Math.max(0, Math.min(1, t));
  const r = Math.round(255 - 107 * clamped);
  const g = Math.round(237 - 197 * clamped);
  const b = Math.round(160 - 122 * clamped);
  return `rgb(${r},${g},${b})`;
}

const CLUSTER_COLORS = [
  "#2a7f62", "#e0a100", "#c0392b", "#3b5ba5", "#8e44ad", "#16777e",
  "#a04000", "#5d6d7e",
];

export function clusterColor(label: number): string {
  return CLUSTER_COLORS[label % CLUSTER_COLORS.length];
}

interface Projector {
  x(lon: number): number;
  y(lat: number): number;
}

function projector(geo: GeoJson, width: number, height: number, pad = 8): Projector {
  let minX = Infinity, minY = Infinity, maxX = -Infinity, maxY = -Infinity;
  for (const feature of geo.features) {
    for (const ring of ringsOf(feature.geometry)) {
      for (const [lon, lat] of ring) {
        minX = Math.min(minX, lon); maxX = Math.max(maxX, lon);
        minY = Math.min(minY, lat); maxY = Math.max(maxY, lat);
      }
    }
  }
  const spanX = maxX - minX || 1;
  const spanY = maxY - minY || 1;
  const scale = Math.min((width - 2 * pad) / spanX, (height - 2 * pad) / spanY);
  return {
    x: (lon) => pad + (lon - minX) * scale,
    y: (lat) => height - pad - (lat - minY) * scale,   // latitude grows upward
  };
}

function ringsOf(geometry: GeoJson["features"][number]["geometry"]): number[][][] {
  if (geometry.type === "Polygon") return geometry.coordinates as number[][][];
  return (geometry.coordinates as number[][][][]).flat();
}

function featurePath(feature: GeoJson["features"][number], proj: Projector): string {
  const parts: string[] = [];
  for (const ring of ringsOf(feature.geometry)) {
    const points = ring.map(([lon, lat]) => `${fmt(proj.x(lon))},${fmt(proj.y(lat))}`);
    parts.push(`M${points.join("L")}Z`);
  }
  return parts.join("");
}

/** Neighborhood map colored by a per-region value (choropleth). */
export function choropleth(geo: GeoJson, values: Record<string, number>,
                           width = 420, height = 320,
                           formatValue: (v: number) => string = fmt): string {
  const proj = projector(geo, width, height);
  const present = Object.values(values);
  const lo = Math.min(...present);
  const hi = Math.max(...present);
  const span = hi - lo || 1;
  const shapes = geo.features.map((feature) => {
    const id = feature.properties.id;
    const name = feature.properties.name ?? id;
    const value = values[id];
    const fill = value === undefined ? "#ddd" : rampColor((value - lo) / span);
    const title = value === undefined ? `${name}: no data`
      : `${name}: ${formatValue(value)}`;
    return `<path d="${featurePath(feature, proj)}" fill="${fill}" stroke="#555" `
      + `stroke-width="0.8" fill-rule="evenodd" data-region="${escapeHtml(id)}">`
      + `<title>${escapeHtml(title)}</title></path>`;
  });
  return `<svg viewBox="0 0 ${width} ${height}" class="choropleth" role="img">`
    + shapes.join("") + `</svg>`;
}

/** Map colored by categorical cluster label. */
export function clusterMap(geo: GeoJson, labels: Record<string, number>,
                           width = 420, height = 320): string {
  const proj = projector(geo, width, height);
  const shapes = geo.features.map((feature) => {
    const id = feature.properties.id;
    const label = labels[id];
    const fill = label === undefined ? "#ddd" : clusterColor(label);
    const name = feature.properties.name ?? id;
    const title = label === undefined ? `${name}: unclustered` : `${name}: cluster ${label}`;
    return `<path d="${featurePath(feature, proj)}" fill="${fill}" stroke="#555" `
      + `stroke-width="0.8" fill-rule="evenodd" data-region="${escapeHtml(id)}">`
      + `<title>${escapeHtml(title)}</title></path>`;
  });
  return `<svg viewBox="0 0 ${width} ${height}" class="cluster-map" role="img">`
    + shapes.join("") + `</svg>`;
}

/** Embedded 2-D points colored by cluster label. */
export function scatter(points: ClusterResponse["points"], width = 420, height = 320): string {
  if (points.length === 0) return `<svg viewBox="0 0 ${width} ${height}"></svg>`;
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const lo = [Math.min(...xs), Math.min(...ys)];
  const hi = [Math.max(...xs), Math.max(...ys)];
  const pad = 14;
  const sx = (width - 2 * pad) / ((hi[0] - lo[0]) || 1);
  const sy = (height - 2 * pad) / ((hi[1] - lo[1]) || 1);
  const dots = points.map((p) => {
    const cx = fmt(pad + (p.x - lo[0]) * sx);
    const cy = fmt(height - pad - (p.y - lo[1]) * sy);
    const title = p.wave === null ? p.key : `${p.key} (wave ${p.wave})`;
    return `<circle cx="${cx}" cy="${cy}" r="4.5" fill="${clusterColor(p.label)}" `
      + `stroke="#333" stroke-width="0.6"><title>${escapeHtml(title)}: cluster ${p.label}</title></circle>`;
  });
  return `<svg viewBox="0 0 ${width} ${height}" class="scatter" role="img">`
    + dots.join("") + `</svg>`;
}

/** Per-cluster box summaries of one vulnerability scale. */
export function clusterBoxes(summaries: ClusterResponse["cluster_summaries"],
                             scale: string, width = 420, height = 180): string {
  const labels = Object.keys(summaries).sort((a, b) => Number(a) - Number(b));
  const stats = labels
    .map((label) => ({ label, s: summaries[label].scales[scale] }))
    .filter((entry): entry is { label: string; s: ScaleSummary } => entry.s !== undefined);
  if (stats.length === 0) return "";
  const lo = Math.min(...stats.map((e) => e.s.min));
  const hi = Math.max(...stats.map((e) => e.s.max));
  const span = hi - lo || 1;
  const pad = 28;
  const x = (v: number) => pad + ((v - lo) / span) * (width - 2 * pad);
  const rowHeight = (height - 20) / stats.length;
  const rows = stats.map((entry, i) => {
    const cy = 10 + rowHeight * (i + 0.5);
    const color = clusterColor(Number(entry.label));
    const { min, max, median, q1, q3 } = entry.s;
    return `<g data-cluster="${entry.label}">`
      + `<line x1="${fmt(x(min))}" y1="${fmt(cy)}" x2="${fmt(x(max))}" y2="${fmt(cy)}" stroke="#777"/>`
      + `<rect x="${fmt(x(q1))}" y="${fmt(cy - rowHeight * 0.28)}" width="${fmt(x(q3) - x(q1))}" `
      + `height="${fmt(rowHeight * 0.56)}" fill="${color}" opacity="0.75" stroke="#333"/>`
      + `<line x1="${fmt(x(median))}" y1="${fmt(cy - rowHeight * 0.32)}" x2="${fmt(x(median))}" `
      + `y2="${fmt(cy + rowHeight * 0.32)}" stroke="#111" stroke-width="1.6"/>`
      + `<text x="4" y="${fmt(cy + 4)}" font-size="11">${entry.label}</text></g>`;
  });
  return `<svg viewBox="0 0 ${width} ${height}" class="boxes" role="img">` + rows.join("") + `</svg>`;
}

/** Horizontal bar chart from facet-table rows aggregated over one key column. */
export function facetBars(summary: SummaryResponse, keyIndex = 0,
                          width = 420, barHeight = 16): string {
  const totals = new Map<string, number>();
  for (const row of summary.rows) {
    const key = String(row[keyIndex]);
    const count = Number(row[row.length - 2]);
    totals.set(key, (totals.get(key) ?? 0) + count);
  }
  const entries = [...totals.entries()].sort((a, b) => {
    const na = Number(a[0]);
    const nb = Number(b[0]);
    if (Number.isFinite(na) && Number.isFinite(nb)) return na - nb;
    return a[0] < b[0] ? -1 : 1;
  });
  const max = Math.max(...entries.map(([, count]) => count), 1);
  const labelWidth = 130;
  const height = entries.length * (barHeight + 4) + 4;
  const bars = entries.map(([key, count], i) => {
    const y = 2 + i * (barHeight + 4);
    const w = ((width - labelWidth - 40) * count) / max;
    return `<g><text x="${labelWidth - 6}" y="${y + barHeight - 4}" text-anchor="end" `
      + `font-size="11">${escapeHtml(key)}</text>`
      + `<rect x="${labelWidth}" y="${y}" width="${fmt(w)}" height="${barHeight}" fill="#3b5ba5"/>`
      + `<text x="${fmt(labelWidth + w + 4)}" y="${y + barHeight - 4}" font-size="11">${count}</text></g>`;
  });
  return `<svg viewBox="0 0 ${width} ${height}" class="facet-bars" role="img">`
    + bars.join("") + `</svg>`;
}

/** Screening results as a table, significant rows first and flagged. */
export function screeningTable(results: ScreeningRow[], selected: string[]): string {
  const rows = results
    .filter((r) => r.test_used !== "skipped")
    .map((r) => {
      const classes = [r.significant ? "significant" : "", selected.includes(r.var_id) ? "pinned" : ""]
        .filter(Boolean).join(" ");
      const p = r.p_value === null ? "" : r.p_value.toExponential(2);
      return `<tr class="${classes}" data-var="${escapeHtml(r.var_id)}">`
        + `<td>${escapeHtml(r.label || r.var_id)}</td><td>${escapeHtml(r.category)}</td>`
        + `<td>${escapeHtml(r.test_used)}</td><td>${p}</td>`
        + `<td>${r.significant ? "yes" : ""}</td></tr>`;
    });
  return `<table class="screening"><thead><tr><th>variable</th><th>category</th>`
    + `<th>test</th><th>p</th><th>significant</th></tr></thead><tbody>`
    + rows.join("") + `</tbody></table>`;
}

/** Per-neighborhood trend panel: one value per wave for a chosen region. */
export function trendLine(values: { wave: number; value: number }[],
                          width = 220, height = 90): string {
  if (values.length === 0) return "";
  const lo = Math.min(...values.map((v) => v.value));
  const hi = Math.max(...values.map((v) => v.value));
  const span = hi - lo || 1;
  const pad = 10;
  const step = (width - 2 * pad) / Math.max(values.length - 1, 1);
  const points = values.map((v, i) =>
    `${fmt(pad + i * step)},${fmt(height - pad - ((v.value - lo) / span) * (height - 2 * pad))}`);
  const dots = values.map((v, i) =>
    `<circle cx="${fmt(pad + i * step)}" cy="${fmt(height - pad - ((v.value - lo) / span) * (height - 2 * pad))}" r="3" fill="#3b5ba5">`
    + `<title>wave ${v.wave}: ${fmt(v.value)}</title></circle>`);
  return `<svg viewBox="0 0 ${width} ${height}" class="trend" role="img">`
    + `<polyline points="${points.join(" ")}" fill="none" stroke="#3b5ba5" stroke-width="1.5"/>`
    + dots.join("") + `</svg>`;
}

/** Legend entry helper shared by the map views. */
export function legend(entries: { label: string; color: string }[]): string {
  const items = entries.map((e) =>
    `<span class="legend-item"><span class="swatch" style="background:${e.color}"></span>`
    + `${escapeHtml(e.label)}</span>`);
  return `<div class="legend">${items.join("")}</div>`;
}

export function ediTable(rows: EdiRow[]): string {
  const body = rows.map((r) =>
    `<tr><td>${escapeHtml(r.neighborhood_name)}</td><td>${fmt(r.value)}%</td>`
    + `<td>${r.n_children}</td></tr>`);
  return `<table class="edi-table"><thead><tr><th>neighborhood</th><th>value</th>`
    + `<th>children</th></tr></thead><tbody>${body.join("")}</tbody></table>`;
}
