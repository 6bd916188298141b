"""Planar geometry: DA-to-neighborhood assignment and census aggregation.

Dissemination areas are mapped to the neighborhood whose boundary contains
the DA centroid (even-odd rule); DA statistics are then combined per
neighborhood according to each variable's aggregation kind.  City-scale
extents make geodesic corrections negligible, so everything is planar.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry, OverlapAmbiguity, ZeroPopulationWeight
from .model import CensusProfile, CensusVariable

Ring = list[tuple[float, float]]


@dataclass(frozen=True)
class Polygon:
    """One exterior ring plus optional holes; rings are closed (first == last)."""

    exterior: tuple[tuple[float, float], ...]
    holes: tuple[tuple[tuple[float, float], ...], ...] = ()

    def __post_init__(self):
        for ring in (self.exterior,) + self.holes:
            if len(ring) < 4:
                raise DegenerateGeometry(f"ring with {len(ring)} points; need >= 4 (closed)")
            if ring[0] != ring[-1]:
                raise DegenerateGeometry("ring is not closed (first point != last point)")


@dataclass(frozen=True)
class GeometrySet:
    """Region id -> list of polygons (multi-polygons hold several)."""

    entries: dict[str, tuple[Polygon, ...]] = field(default_factory=dict)

    def ids(self) -> list[str]:
        return sorted(self.entries)


def _ring_area_centroid(ring) -> tuple[float, float, float]:
    """Signed shoelace area and area-weighted centroid of one closed ring."""
    pts = np.asarray(ring, dtype=float)
    x, y = pts[:-1, 0], pts[:-1, 1]
    xn, yn = pts[1:, 0], pts[1:, 1]
    cross = x * yn - xn * y
    area = cross.sum() / 2.0
    if area == 0.0:
        return 0.0, 0.0, 0.0
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return area, cx, cy


def centroid(poly: Polygon | list[Polygon] | tuple[Polygon, ...]) -> tuple[float, float]:
    """Area-weighted centroid; holes subtract from their polygon's mass."""
    polys = [poly] if isinstance(poly, Polygon) else list(poly)
    total_area = 0.0
    moment_x = 0.0
    moment_y = 0.0
    for p in polys:
        area, cx, cy = _ring_area_centroid(p.exterior)
        weight = abs(area)
        total_area += weight
        moment_x += weight * cx
        moment_y += weight * cy
        for hole in p.holes:
            area, cx, cy = _ring_area_centroid(hole)
            weight = abs(area)
            total_area -= weight
            moment_x -= weight * cx
            moment_y -= weight * cy
    if total_area <= 0.0:
        raise DegenerateGeometry("polygon has zero area")
    return moment_x / total_area, moment_y / total_area


def _point_in_ring(x: float, y: float, ring) -> bool:
    """Even-odd crossing count against one ring; boundary handled separately."""
    inside = False
    for (x1, y1), (x2, y2) in zip(ring[:-1], ring[1:]):
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < x_cross:
                inside = not inside
    return inside


def _point_on_ring(x: float, y: float, ring, eps: float = 1e-12) -> bool:
    for (x1, y1), (x2, y2) in zip(ring[:-1], ring[1:]):
        if min(x1, x2) - eps <= x <= max(x1, x2) + eps and min(y1, y2) - eps <= y <= max(y1, y2) + eps:
            cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
            span = max(abs(x2 - x1), abs(y2 - y1), 1.0)
            if abs(cross) <= eps * span:
                return True
    return False


def point_in_polygon(point: tuple[float, float], poly: Polygon) -> bool:
    """Strict even-odd containment; a point inside a hole is outside."""
    x, y = point
    inside = _point_in_ring(x, y, poly.exterior)
    for hole in poly.holes:
        if _point_in_ring(x, y, hole):
            inside = not inside
    return inside


def point_on_boundary(point: tuple[float, float], poly: Polygon) -> bool:
    x, y = point
    if _point_on_ring(x, y, poly.exterior):
        return True
    return any(_point_on_ring(x, y, hole) for hole in poly.holes)


def _contains(point, polys) -> bool:
    return any(point_in_polygon(point, p) for p in polys)


def _touches(point, polys) -> bool:
    return any(point_on_boundary(point, p) for p in polys)


def assign_da(da_geo: GeometrySet, nbhd_geo: GeometrySet) -> dict[str, str | None]:
    """Assign each DA to the neighborhood containing its centroid.

    A centroid strictly inside more than one neighborhood raises
    OverlapAmbiguity; a centroid on a shared boundary goes to the first
    neighborhood in lexicographic id order, deterministically.  The result
    is invariant under any reordering of the inputs.
    """
    nbhd_ids = nbhd_geo.ids()
    assignments: dict[str, str | None] = {}
    for da_id in da_geo.ids():
        c = centroid(da_geo.entries[da_id])
        touching = [nid for nid in nbhd_ids if _touches(c, nbhd_geo.entries[nid])]
        if touching:
            assignments[da_id] = touching[0]
            continue
        strict = [nid for nid in nbhd_ids if _contains(c, nbhd_geo.entries[nid])]
        if len(strict) > 1:
            raise OverlapAmbiguity(da_id, strict)
        assignments[da_id] = strict[0] if strict else None
    return assignments


@dataclass(frozen=True)
class AggregatedCensus:
    """Neighborhood profiles plus the variables whose values are approximate."""

    profiles: tuple[CensusProfile, ...]
    approximate: frozenset[str]
    unassigned_das: tuple[str, ...]


def aggregate(assignments: dict[str, str | None],
              da_table,
              catalog: list[CensusVariable],
              weight_var: str = "population") -> AggregatedCensus:
    """Combine DA rows into neighborhood census profiles.

    Aggregation by kind: counts sum; percents, rates and means are
    population-weighted means; medians are population-weighted means of DA
    medians and flagged approximate (true pooled medians are unrecoverable
    from DA summaries); ratios are recomputed from linked numerator and
    denominator aggregates when the catalog links them, else weighted means.
    Missing cells are excluded pairwise.
    """
    by_id = {v.var_id: v for v in catalog}
    groups: dict[str, list[str]] = {}
    unassigned: list[str] = []
    for da_id in sorted(da_table.rows):
        nid = assignments.get(da_id)
        if nid is None:
            unassigned.append(da_id)
        else:
            groups.setdefault(nid, []).append(da_id)

    approximate: set[str] = set()
    profiles: list[CensusProfile] = []

    def _aggregate_var(var: CensusVariable, da_ids: list[str], nid: str) -> float | None:
        pairs = [(da_table.rows[d].get(var.var_id), da_table.rows[d].get(weight_var))
                 for d in da_ids]
        values = [(v, w) for v, w in pairs if v is not None]
        if not values:
            return None
        if var.kind == "count":
            return float(sum(v for v, _ in values))
        if var.kind == "ratio" and var.numerator and var.denominator:
            num = _aggregate_var(by_id[var.numerator], da_ids, nid)
            den = _aggregate_var(by_id[var.denominator], da_ids, nid)
            if num is None or den is None or den == 0:
                return None
            return num / den
        # weighted kinds: percent, rate, mean, median, unlinked ratio
        weighted = [(v, w) for v, w in values if w is not None and w > 0]
        if not weighted:
            raise ZeroPopulationWeight(nid, var.var_id)
        total_w = sum(w for _, w in weighted)
        result = sum(v * w for v, w in weighted) / total_w
        if var.kind == "median":
            approximate.add(var.var_id)
        return result

    for nid in sorted(groups):
        da_ids = groups[nid]
        values: dict[str, float] = {}
        for var_id in da_table.var_ids:
            var = by_id[var_id]
            agg = _aggregate_var(var, da_ids, nid)
            if agg is not None:
                values[var_id] = agg
        profiles.append(CensusProfile(neighborhood=nid, values=values))

    return AggregatedCensus(
        profiles=tuple(profiles),
        approximate=frozenset(approximate),
        unassigned_das=tuple(unassigned),
    )


# --- GeoJSON interchange -------------------------------------------------------

def geometry_set_from_geojson(doc: dict) -> GeometrySet:
    """Build a GeometrySet from a FeatureCollection (property ``id`` keys regions)."""
    entries: dict[str, tuple[Polygon, ...]] = {}
    for feature in doc.get("features", []):
        region_id = str(feature.get("properties", {}).get("id"))
        geom = feature.get("geometry", {})
        polys: list[Polygon] = []
        if geom.get("type") == "Polygon":
            polys.append(_polygon_from_coords(geom["coordinates"]))
        elif geom.get("type") == "MultiPolygon":
            polys.extend(_polygon_from_coords(c) for c in geom["coordinates"])
        else:
            raise DegenerateGeometry(f"unsupported geometry type {geom.get('type')!r}")
        if region_id in entries:
            raise DegenerateGeometry(f"duplicate region id {region_id!r}")
        entries[region_id] = tuple(polys)
    return GeometrySet(entries=entries)


def _polygon_from_coords(coords) -> Polygon:
    rings = [tuple((float(x), float(y)) for x, y in ring) for ring in coords]
    return Polygon(exterior=rings[0], holes=tuple(rings[1:]))


def geojson_from_geometry_set(geo: GeometrySet, names: dict[str, str] | None = None) -> dict:
    features = []
    for region_id in geo.ids():
        polys = geo.entries[region_id]
        coords = [[list(map(list, p.exterior))] + [list(map(list, h)) for h in p.holes]
                  for p in polys]
        if len(polys) == 1:
            geometry = {"type": "Polygon", "coordinates": coords[0]}
        else:
            geometry = {"type": "MultiPolygon", "coordinates": coords}
        props = {"id": region_id}
        if names and region_id in names:
            props["name"] = names[region_id]
        features.append({"type": "Feature", "properties": props, "geometry": geometry})
    return {"type": "FeatureCollection", "features": features}
