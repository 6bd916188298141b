"""End-to-end orchestration with a single reproducibility manifest.

The top-down run embeds, clusters, ranks, validates, and screens every
wave plus the pooled all-wave view; the bottom-up run filters records,
builds journeys, and emits every distribution table.  One master seed
fans out to per-stage seeds by stage-name hashing, so inserting a stage
never reshuffles the others, and outputs are identical for any worker
count.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import io as vio
from .clustering import (
    ClusterSolution,
    StabilityReport,
    cluster_embedding,
    default_k,
    rank_labels,
    reduce_a_labels,
    stability,
    write_solution_csv,
    write_stability_csv,
)
from .embedding import (
    Embedding,
    EmbeddingConfig,
    build_matrix,
    embed,
    mode_label,
    pca,
    tsne,
    umap,
    write_embedding_csv,
    write_trace_csv,
)
from .errors import EmptyInput
from .hopkins import HopkinsConfig, HopkinsReport, hopkins_per_cluster, write_hopkins_csv
from .model import Dataset
from .retention import (
    FACETS,
    FilterPolicy,
    GroupingRules,
    DEFAULT_RULES,
    apply_filters,
    build_journeys,
    distributions,
    enrollment_rates,
    write_facet_csv,
    write_journeys_csv,
    write_rates_csv,
    write_rejections_csv,
)
from .stats import ScreeningConfig, screen, write_screening_csv


def stage_seed(master: int, stage: str) -> int:
    """Derive a 64-bit per-stage seed from the master seed and stage name."""
    digest = hashlib.blake2b(f"{master}:{stage}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@dataclass
class RunManifest:
    kind: str
    seed: int
    configs: dict = field(default_factory=dict)
    dataset_digests: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)       # name -> {path, sha256}
    timings: dict = field(default_factory=dict)         # stage -> seconds
    workers: int = 1
    created: str = ""

    def write(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def load(path) -> "RunManifest":
        with open(path, "r", encoding="utf-8") as fh:
            return RunManifest(**json.load(fh))

    def equivalent_to(self, other: "RunManifest") -> bool:
        """Equality over everything that determines outputs (not timings,
        worker count, or wall-clock)."""
        keys = ("kind", "seed", "configs", "dataset_digests", "artifacts")
        return all(getattr(self, k) == getattr(other, k) for k in keys)


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _register(manifest: RunManifest, out_dir: Path, name: str) -> None:
    manifest.artifacts[name] = {
        "path": name,
        "sha256": _sha256_file(out_dir / name),
    }


@dataclass
class TopdownResult:
    embeddings: dict[str, Embedding]
    solutions: dict[str, ClusterSolution]
    hopkins: dict[str, HopkinsReport]
    stability: StabilityReport
    screening: dict[str, list]
    manifest: RunManifest


def run_topdown(dataset: Dataset,
                embedding_config: EmbeddingConfig = EmbeddingConfig(),
                k_single: int | None = None,
                k_all: int | None = None,
                hopkins_config: HopkinsConfig = HopkinsConfig(),
                screening_config: ScreeningConfig = ScreeningConfig(),
                seed: int = 0,
                out_dir=None,
                workers: int = 1,
                restarts: int = 50,
                hopkins_space: str = "raw") -> TopdownResult:
    """Single-wave runs for every wave plus the all-wave run, with ranking,
    Hopkins validation, cross-wave stability, and census screening.

    Per-stage seeds derive from ``seed``; outputs are bit-identical for any
    ``workers`` value because every job is independently seeded and files
    are written serially after all jobs complete.  Hopkins runs per cluster
    on the standardized source coordinates by default (``hopkins_space=
    "embedded"`` switches to the projected points).
    """
    waves = dataset.waves()
    if not waves:
        raise EmptyInput("dataset has no EDI records")
    if hopkins_space not in ("raw", "embedded"):
        raise EmptyInput(f"unknown hopkins_space {hopkins_space!r}")
    edi_by_key = dataset.edi_by_key()
    timings: dict[str, float] = {}

    def run_mode(wave: int | None) -> tuple[str, Embedding, ClusterSolution, HopkinsReport]:
        tag = "all" if wave is None else f"w{wave}"
        t0 = time.perf_counter()
        cfg = replace(embedding_config, seed=stage_seed(seed, f"embed:{tag}"))
        matrix, keys = build_matrix(dataset, wave, standardize=cfg.standardize)
        if cfg.method == "tsne":
            embedding = tsne(matrix, cfg, keys=keys)
        elif cfg.method == "umap":
            embedding = umap(matrix, cfg, keys=keys)
        else:
            embedding = pca(matrix, keys=keys)
        embedding = replace(embedding, mode=mode_label(wave))
        k = (k_all if wave is None else k_single)
        if k is None:
            k = default_k(embedding.mode, embedding.config.method)
        solution = cluster_embedding(embedding, k, stage_seed(seed, f"kmeans:{tag}"),
                                     restarts=restarts)
        solution = rank_labels(solution, edi_by_key)
        hop_cfg = replace(hopkins_config, seed=stage_seed(seed, f"hopkins:{tag}"))
        hop_points = matrix if hopkins_space == "raw" else embedding.points
        report = hopkins_per_cluster(hop_points, solution.labels, hop_cfg)
        timings[tag] = time.perf_counter() - t0
        return tag, embedding, solution, report

    modes: list[int | None] = list(waves) + [None]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_mode, modes))
    else:
        outcomes = [run_mode(w) for w in modes]

    embeddings = {tag: e for tag, e, _, _ in outcomes}
    solutions = {tag: s for tag, _, s, _ in outcomes}
    reports = {tag: h for tag, _, _, h in outcomes}

    t0 = time.perf_counter()
    s_solutions = {w: solutions[f"w{w}"] for w in waves}
    stability_report = stability(s_solutions, solutions["all"])
    timings["stability"] = time.perf_counter() - t0

    screening: dict[str, list] = {}
    if dataset.census:
        t0 = time.perf_counter()
        latest = max(waves)
        s_labels = {key[0]: int(label) for key, label
                    in zip(solutions[f"w{latest}"].keys, solutions[f"w{latest}"].labels)}
        a_labels = reduce_a_labels(solutions["all"])
        profiles = list(dataset.census)
        catalog = list(dataset.catalog) or None
        screening["s_latest"] = screen(profiles, s_labels, screening_config, catalog)
        screening["a"] = screen(profiles, a_labels, screening_config, catalog)
        timings["screening"] = time.perf_counter() - t0

    manifest = RunManifest(
        kind="topdown",
        seed=seed,
        configs={
            "embedding": asdict(embedding_config),
            "k_single": k_single,
            "k_all": k_all,
            "hopkins": asdict(hopkins_config),
            "hopkins_space": hopkins_space,
            "screening": asdict(screening_config),
            "restarts": restarts,
        },
        dataset_digests={"edi": _sha256_text(vio.dumps_edi(dataset.edi))},
        workers=workers,
        created=dt.datetime.now(dt.timezone.utc).isoformat(),
    )

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for tag in sorted(embeddings):
            write_embedding_csv(embeddings[tag], out / f"embedding_{tag}.csv")
            _register(manifest, out, f"embedding_{tag}.csv")
            if embeddings[tag].objective_trace:
                write_trace_csv(embeddings[tag], out / f"trace_{tag}.csv")
                _register(manifest, out, f"trace_{tag}.csv")
            write_solution_csv(solutions[tag], out / f"solution_{tag}.csv")
            _register(manifest, out, f"solution_{tag}.csv")
            write_hopkins_csv(reports[tag], out / f"hopkins_{tag}.csv")
            _register(manifest, out, f"hopkins_{tag}.csv")
        write_stability_csv(stability_report, out / "stability.csv")
        _register(manifest, out, "stability.csv")
        for scheme in sorted(screening):
            write_screening_csv(screening[scheme], out / f"screening_{scheme}.csv")
            _register(manifest, out, f"screening_{scheme}.csv")
        manifest.timings = timings
        manifest.write(out / "manifest.json")

    manifest.timings = timings
    return TopdownResult(embeddings=embeddings, solutions=solutions, hopkins=reports,
                         stability=stability_report, screening=screening, manifest=manifest)


@dataclass
class BottomupResult:
    journeys: list
    rejections: list
    tables: dict
    rates: dict | None
    manifest: RunManifest


def run_bottomup(records: list,
                 policy: FilterPolicy = FilterPolicy(),
                 rules: GroupingRules = DEFAULT_RULES,
                 out_dir=None,
                 populations: dict[str, int] | None = None,
                 rate_group: str = "General Activities",
                 workers: int = 1) -> BottomupResult:
    """Filter, build journeys, and emit the full retention suite.

    The manifest is written even when the kept set is empty; distribution
    tables raise EmptyInput in that case and are simply absent.
    """
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    kept, rejections = apply_filters(records, policy)
    journeys = build_journeys(kept, rules)
    timings["journeys"] = time.perf_counter() - t0

    tables: dict[str, object] = {}
    t0 = time.perf_counter()
    if journeys:
        facet_jobs = list(FACETS)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                built = list(pool.map(lambda f: (f, distributions(journeys, f)), facet_jobs))
        else:
            built = [(f, distributions(journeys, f)) for f in facet_jobs]
        tables = dict(built)
    timings["distributions"] = time.perf_counter() - t0

    rates = None
    if populations is not None and journeys:
        rates = enrollment_rates(journeys, rate_group, populations)

    manifest = RunManifest(
        kind="bottomup",
        seed=0,
        configs={
            "policy": {
                "min_account_created": policy.min_account_created.isoformat(),
                "min_birth_date": policy.min_birth_date.isoformat(),
                "require_completed": policy.require_completed,
                "min_max_registrants_exclusive": policy.min_max_registrants_exclusive,
            },
            "rules": [list(r) for r in rules.rules],
            "default_group": rules.default_group,
            "rate_group": rate_group,
        },
        dataset_digests={"registrations": _digest_records(records)},
        workers=workers,
        created=dt.datetime.now(dt.timezone.utc).isoformat(),
    )

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_journeys_csv(journeys, out / "journeys.csv")
        _register(manifest, out, "journeys.csv")
        write_rejections_csv(rejections, out / "rejections.csv")
        _register(manifest, out, "rejections.csv")
        for facet in sorted(tables):
            write_facet_csv(tables[facet], out / f"facet_{facet}.csv")
            _register(manifest, out, f"facet_{facet}.csv")
        if rates is not None:
            write_rates_csv(rates, rate_group, out / "rates.csv")
            _register(manifest, out, "rates.csv")
        manifest.timings = timings
        manifest.write(out / "manifest.json")

    manifest.timings = timings
    return BottomupResult(journeys=journeys, rejections=rejections, tables=tables,
                          rates=rates, manifest=manifest)


def _digest_records(records) -> str:
    import io as _io

    buf = _io.StringIO()
    vio.write_registrations(records, buf)
    return _sha256_text(buf.getvalue())
