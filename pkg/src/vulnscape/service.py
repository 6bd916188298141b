"""HTTP facade over the analysis pipeline for the exploration dashboard.

Endpoints mirror the library operations one-to-one so the dashboard never
computes statistics itself.  Uploaded registration data lives in
per-session memory only and is never persisted.
"""

from __future__ import annotations

import io as _io
import threading
import uuid
from dataclasses import replace
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import io as vio
from .clustering import cluster_embedding, default_k, rank_labels, reduce_a_labels, stability
from .embedding import EmbeddingConfig, build_matrix, mode_label, pca, tsne, umap
from .errors import (
    EmptyInput,
    KExceedsN,
    NoRunAvailable,
    ValidationError,
    VulnscapeError,
)
from .hopkins import HopkinsConfig, hopkins_per_cluster
from .model import Dataset, EDI_MEASURES, dataset_from_edi
from .pipeline import stage_seed
from .retention import FACETS, FilterPolicy, DEFAULT_RULES, apply_filters, build_journeys, distributions
from .stats import ScreeningConfig, VariableTestResult, screen


class EmbedRequest(BaseModel):
    mode: str = "single_wave"            # single_wave | all_wave
    method: str = "tsne"
    wave: int | None = None
    seed: int = 0
    perplexity: float | None = None
    n_neighbors: int | None = None
    min_dist: float | None = None
    standardize: bool = True


class ClusterRequest(EmbedRequest):
    k: int | None = None
    restarts: int = 50
    ranking_scale: str = "two_or_more"
    ranking_statistic: str = "mean"


class ValidateRequest(ClusterRequest):
    sample_fraction: float = 0.3
    min_sample: int = 3
    repeats: int = 100
    exponent: str = "d"
    space: str = "raw"                   # raw | embedded


class ScreenRequest(ClusterRequest):
    alpha: float = 0.05
    correction: str = "none"
    normality_test: str = "shapiro_wilk"
    homogeneity_test: str = "brown_forsythe"


def suggest_variables(results: list[VariableTestResult], top_n: int = 10) -> list[str]:
    """Rank significant variables for exploration: the single best variable
    of each category first (diversity pass, categories ordered by their best
    p), then the remainder by ascending p."""
    significant = sorted((r for r in results if r.significant),
                         key=lambda r: (r.p_value, r.var_id))
    if not significant:
        raise NoRunAvailable("no significant variables to suggest")
    picked: list[str] = []
    seen_categories: set[str] = set()
    for r in significant:
        if r.category not in seen_categories:
            picked.append(r.var_id)
            seen_categories.add(r.category)
    for r in significant:
        if r.var_id not in picked:
            picked.append(r.var_id)
    return picked[:top_n]


class SessionStore:
    """Per-session uploaded registration records; in memory only."""

    def __init__(self):
        self._lock = threading.Lock()
        self._sessions: dict[str, dict] = {}

    def create(self, payload: dict) -> str:
        session_id = uuid.uuid4().hex
        with self._lock:
            self._sessions[session_id] = payload
        return session_id

    def get(self, session_id: str) -> dict | None:
        with self._lock:
            return self._sessions.get(session_id)


def create_app(data_dir=None, dataset: Dataset | None = None,
               geojson: dict | None = None) -> FastAPI:
    """Build the service; data comes from ``data_dir`` (edi.csv,
    census_da.csv + catalog.csv + GeoJSON boundaries) unless a dataset is
    injected directly."""
    app = FastAPI(title="vulnscape", docs_url=None, redoc_url=None)

    if dataset is None and data_dir is not None:
        dataset, geojson = _load_data_dir(Path(data_dir))
    if dataset is None:
        raise EmptyInput("service needs a data directory or an in-memory dataset")

    state = {
        "dataset": dataset,
        "geojson": geojson,
        "screenings": {},          # scheme digest -> results
        "last_screening": None,
        "analysis_lock": threading.Lock(),
        "cache": {},
    }
    sessions = SessionStore()

    @app.exception_handler(VulnscapeError)
    async def _vulnscape_error(request: Request, exc: VulnscapeError):
        status = 422 if isinstance(exc, (ValidationError, KExceedsN)) else 409
        if isinstance(exc, NoRunAvailable):
            status = 409
        return JSONResponse(status_code=status,
                            content={"error": {"code": exc.code, "message": str(exc)}})

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/edi")
    def edi(wave: int = Query(...), scale: str = Query("one_or_more")):
        ds: Dataset = state["dataset"]
        if scale not in EDI_MEASURES:
            return JSONResponse(status_code=422, content={
                "error": {"code": "unknown_scale", "message": f"unknown scale {scale!r}"}})
        rows = [{
            "neighborhood_id": r.neighborhood.id,
            "neighborhood_name": r.neighborhood.name,
            "wave": r.wave,
            "n_children": r.n_children,
            "value": r.value(scale),
        } for r in ds.edi if r.wave == wave]
        if not rows:
            return JSONResponse(status_code=422, content={
                "error": {"code": "missing_wave", "message": f"no records for wave {wave}"}})
        return {"wave": wave, "scale": scale,
                "rows": sorted(rows, key=lambda r: r["neighborhood_id"]),
                "waves": state["dataset"].waves(), "scales": list(EDI_MEASURES)}

    def _embedding(req: EmbedRequest):
        ds: Dataset = state["dataset"]
        wave = None if req.mode == "all_wave" else (req.wave or max(ds.waves()))
        cfg = EmbeddingConfig(
            method=req.method, seed=req.seed,
            perplexity=req.perplexity,
            n_neighbors=req.n_neighbors or 15,
            min_dist=req.min_dist or 0.1,
            standardize=req.standardize,
        )
        matrix, keys = build_matrix(ds, wave, standardize=cfg.standardize)
        if cfg.method == "tsne":
            emb = tsne(matrix, cfg, keys=keys)
        elif cfg.method == "umap":
            emb = umap(matrix, cfg, keys=keys)
        else:
            emb = pca(matrix, keys=keys)
        return replace(emb, mode=mode_label(wave)), matrix, wave

    @app.post("/api/embed")
    def embed_endpoint(req: EmbedRequest):
        emb, _, wave = _embedding(req)
        return {
            "mode": emb.mode,
            "method": emb.config.method,
            "wave": wave,
            "points": [{"key": k[0], "wave": k[1], "x": float(x), "y": float(y)}
                       for k, (x, y) in zip(emb.source_keys, emb.points)],
            "objective_trace": [{"iteration": i, "objective": o}
                                for i, o in emb.objective_trace],
        }

    def _cluster(req: ClusterRequest):
        ds: Dataset = state["dataset"]
        if req.k is not None and req.k < 1:
            raise KExceedsN(req.k, len(ds.neighborhoods))
        emb, matrix, wave = _embedding(req)
        k = req.k if req.k is not None else default_k(emb.mode, emb.config.method)
        solution = cluster_embedding(emb, k, stage_seed(req.seed, f"kmeans:{emb.mode}"),
                                     restarts=req.restarts)
        solution = rank_labels(solution, ds.edi_by_key(),
                               ranking_scale=req.ranking_scale,
                               statistic=req.ranking_statistic)
        return emb, matrix, solution, wave

    def _cached(kind: str, req: BaseModel, compute):
        """Config-digest cache; a hit is honored only after full comparison,
        so a digest collision falls back to recomputing."""
        key = (kind, req.model_dump_json())
        with state["analysis_lock"]:
            hit = state["cache"].get(key)
        if hit is not None and hit[0] == req:
            return hit[1]
        response = compute()
        with state["analysis_lock"]:
            state["cache"][key] = (req, response)
        return response

    @app.post("/api/cluster")
    def cluster_endpoint(req: ClusterRequest):
        return _cached("cluster", req, lambda: _cluster_response(req))

    def _cluster_response(req: ClusterRequest):
        ds: Dataset = state["dataset"]
        emb, _, solution, wave = _cluster(req)
        by_key = ds.edi_by_key()
        summaries = {}
        for label in range(solution.k):
            member_keys = [k for k, lab in zip(solution.keys, solution.labels) if lab == label]
            per_scale = {}
            for scale in EDI_MEASURES:
                vals = sorted(by_key[(k[0], k[1])].value(scale) for k in member_keys)
                if vals:
                    per_scale[scale] = {
                        "min": vals[0], "max": vals[-1],
                        "median": float(np.median(vals)),
                        "q1": float(np.quantile(vals, 0.25)),
                        "q3": float(np.quantile(vals, 0.75)),
                    }
            summaries[label] = {"size": len(member_keys), "scales": per_scale}
        neighborhood_labels = (
            {k[0]: int(lab) for k, lab in zip(solution.keys, solution.labels)}
            if wave is not None else reduce_a_labels(solution))
        return {
            "mode": solution.mode, "method": solution.method, "k": solution.k,
            "wave": wave, "wcss": solution.wcss, "seed": req.seed,
            "points": [{"key": k[0], "wave": k[1], "x": float(x), "y": float(y),
                        "label": int(lab)}
                       for k, (x, y), lab in zip(solution.keys, solution.points,
                                                 solution.labels)],
            "neighborhood_labels": neighborhood_labels,
            "cluster_summaries": summaries,
        }

    @app.get("/api/stability")
    def stability_endpoint(method: str = "tsne", seed: int = 0,
                           k: int = 3, k_all: int | None = None):
        ds: Dataset = state["dataset"]
        solutions = {}
        for wave in ds.waves():
            req = ClusterRequest(mode="single_wave", wave=wave, method=method,
                                 seed=seed, k=k)
            _, _, sol, _ = _cluster(req)
            solutions[wave] = sol
        req = ClusterRequest(mode="all_wave", method=method, seed=seed, k=k_all)
        _, _, a_solution, _ = _cluster(req)
        report = stability(solutions, a_solution)
        return {
            "waves": list(report.waves),
            "rows": [{
                "neighborhood": n,
                "trajectory": list(report.trajectories[n]),
                "transitions": report.transitions[n],
                "a_label": report.a_labels[n],
            } for n in sorted(report.trajectories)],
            "a_cluster_instability": {str(k_): v for k_, v
                                      in report.a_cluster_instability.items()},
        }

    @app.post("/api/validate")
    def validate_endpoint(req: ValidateRequest):
        emb, matrix, solution, _ = _cluster(req)
        cfg = HopkinsConfig(sample_fraction=req.sample_fraction,
                            min_sample=req.min_sample, repeats=req.repeats,
                            seed=stage_seed(req.seed, f"hopkins:{emb.mode}"),
                            exponent=req.exponent)
        points = matrix if req.space == "raw" else emb.points
        report = hopkins_per_cluster(points, solution.labels, cfg)
        def row(scope, label, t):
            return {"scope": scope, "label": label, "m": t.m, "n": t.n,
                    "repeats": len(t.h_values), "h_av": t.h_av,
                    "p_value": t.p_value, "skipped": t.skipped}
        return {
            "mode": emb.mode, "method": emb.config.method, "space": req.space,
            "clusters": [row("cluster", int(lab), t)
                         for lab, t in sorted(report.per_cluster.items())],
            "overall": row("overall", None, report.overall),
        }

    @app.post("/api/census/screen")
    def screen_endpoint(req: ScreenRequest):
        ds: Dataset = state["dataset"]
        if not ds.census:
            raise NoRunAvailable("no census profiles loaded")
        cfg = ScreeningConfig(alpha=req.alpha, correction=req.correction,
                              normality_test=req.normality_test,
                              homogeneity_test=req.homogeneity_test)
        _, _, solution, wave = _cluster(req)
        if wave is not None:
            labels = {k[0]: int(lab) for k, lab in zip(solution.keys, solution.labels)}
        else:
            labels = reduce_a_labels(solution)
        results = screen(list(ds.census), labels, cfg, list(ds.catalog) or None)
        with state["analysis_lock"]:
            state["last_screening"] = results
        return {
            "alpha": req.alpha, "correction": req.correction,
            "mode": solution.mode, "k": solution.k,
            "results": [{
                "var_id": r.var_id, "label": r.label, "category": r.category,
                "test_used": r.test_used, "statistic": r.statistic,
                "p_value": r.p_value, "significant": r.significant,
                "skip_reason": r.skip_reason,
            } for r in results],
            "significant": [r.var_id for r in results if r.significant],
        }

    @app.get("/api/census/suggest")
    def suggest_endpoint(top_n: int = 10):
        with state["analysis_lock"]:
            results = state["last_screening"]
        if results is None:
            raise NoRunAvailable("run /api/census/screen first")
        return {"suggested": suggest_variables(results, top_n)}

    @app.post("/api/class/upload")
    async def upload(request: Request):
        body = await request.body()
        records = vio.load_registrations(_io.StringIO(body.decode("utf-8")))
        kept, rejected = apply_filters(records, FilterPolicy())
        journeys = build_journeys(kept, DEFAULT_RULES)
        session_id = sessions.create({
            "records": records, "kept": kept, "rejected": rejected,
            "journeys": journeys,
        })
        reasons: dict[str, int] = {}
        for r in rejected:
            reasons[r.reason] = reasons.get(r.reason, 0) + 1
        return {"session": session_id, "n_records": len(records),
                "n_kept": len(kept), "n_journeys": len(journeys),
                "rejections": reasons,
                "rejected_rows": [{"row": r.row, "client_id": r.record.client_id,
                                   "reason": r.reason} for r in rejected[:100]]}

    @app.get("/api/class/summary")
    def class_summary(session: str, facet: str = Query(...)):
        payload = sessions.get(session)
        if payload is None:
            raise NoRunAvailable(f"unknown session {session!r}")
        if facet not in FACETS:
            return JSONResponse(status_code=422, content={
                "error": {"code": "unknown_facet",
                          "message": f"facet must be one of {FACETS}"}})
        table = distributions(payload["journeys"], facet)
        return {"facet": facet, "key_columns": list(table.key_columns),
                "normalizer": list(table.normalizer),
                "rows": [list(r) for r in table.rows]}

    @app.get("/api/geo/neighborhoods")
    def geo():
        if state["geojson"] is None:
            raise NoRunAvailable("no neighborhood boundaries loaded")
        return state["geojson"]

    return app


def _load_data_dir(data_dir: Path) -> tuple[Dataset, dict | None]:
    from .geo import aggregate, assign_da, geometry_set_from_geojson

    records = vio.load_edi(data_dir / "edi.csv")
    census = []
    catalog = []
    geojson = None
    nbhd_path = data_dir / "neighborhoods.geojson"
    if nbhd_path.exists():
        geojson = vio.load_geojson(nbhd_path)
    census_path = data_dir / "census_da.csv"
    catalog_path = data_dir / "catalog.csv"
    da_path = data_dir / "da.geojson"
    if census_path.exists() and catalog_path.exists():
        catalog, table = vio.load_census(census_path, catalog_path)
        if da_path.exists() and geojson is not None:
            da_geo = geometry_set_from_geojson(vio.load_geojson(da_path))
            nbhd_geo = geometry_set_from_geojson(geojson)
            assignments = assign_da(da_geo, nbhd_geo)
            census = list(aggregate(assignments, table, catalog).profiles)
    return dataset_from_edi(records, census=census, catalog=catalog), geojson


def serve(port: int, data_dir, host: str = "127.0.0.1") -> None:
    """Run the service until interrupted."""
    import uvicorn

    app = create_app(data_dir=data_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
