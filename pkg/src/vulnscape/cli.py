"""Batch front door: every pipeline capability as a subcommand.

Exit codes: 0 success, 1 validation error (bad flags or bad data), 2
runtime error.  Data goes to stdout or ``--out`` files; diagnostics go to
stderr.  Stochastic subcommands require an explicit ``--seed`` so no run
is ever irreproducible by accident.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import io as vio
from .clustering import (
    cluster_embedding,
    default_k,
    rank_labels,
    stability,
    write_solution_csv,
    write_stability_csv,
)
from .embedding import EmbeddingConfig, build_matrix, mode_label, pca, tsne, umap, \
    write_embedding_csv, write_trace_csv
from .errors import ValidationError, VulnscapeError
from .geo import aggregate, assign_da, geometry_set_from_geojson
from .hopkins import HopkinsConfig, hopkins_per_cluster, write_hopkins_csv
from .model import EDI_MEASURES, dataset_from_edi
from .pipeline import run_bottomup, stage_seed
from .retention import DEFAULT_RULES, FilterPolicy, apply_filters, build_journeys, \
    enrollment_rates, load_rules, write_rates_csv
from .stats import ScreeningConfig, pearson, screen, write_screening_csv


class _Parser(argparse.ArgumentParser):
    """argparse that honors the 0/1/2 exit-code contract and shows defaults."""

    def __init__(self, *args, **kwargs):
        kwargs.setdefault("formatter_class", argparse.ArgumentDefaultsHelpFormatter)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _data_root() -> Path | None:
    root = os.environ.get("VULNSCAPE_DATA_DIR")
    return Path(root) if root else None


def _default_path(name: str) -> str | None:
    root = _data_root()
    if root and (root / name).exists():
        return str(root / name)
    return None


def _add_edi_arg(parser):
    parser.add_argument("--edi", default=_default_path("edi.csv"),
                        help="EDI CSV path (default: $VULNSCAPE_DATA_DIR/edi.csv)")


def _add_mode_args(parser):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--wave", type=int, help="single-wave mode for this wave")
    group.add_argument("--all-wave", action="store_true", help="pool all waves")


def _add_embedding_args(parser):
    parser.add_argument("--method", choices=("tsne", "umap", "pca"), default="tsne")
    parser.add_argument("--seed", type=int, required=True,
                        help="master seed (required: runs must be reproducible)")
    parser.add_argument("--perplexity", type=float, default=None)
    parser.add_argument("--iterations", type=int, default=1000)
    parser.add_argument("--learning-rate", default="auto")
    parser.add_argument("--n-neighbors", type=int, default=15)
    parser.add_argument("--min-dist", type=float, default=0.1)
    parser.add_argument("--epochs", type=int, default=500)
    parser.add_argument("--no-standardize", dest="standardize", action="store_false")


def _embedding_config(args) -> EmbeddingConfig:
    lr = args.learning_rate
    if lr != "auto":
        lr = float(lr)
    return EmbeddingConfig(
        method=args.method, seed=0, perplexity=args.perplexity,
        iterations=args.iterations, learning_rate=lr,
        n_neighbors=args.n_neighbors, min_dist=args.min_dist,
        epochs=args.epochs, standardize=args.standardize,
    )


def _load_dataset(args, census=False):
    if not args.edi:
        raise ValidationError("no EDI path given (flag --edi or VULNSCAPE_DATA_DIR)")
    records = vio.load_edi(args.edi)
    profiles, catalog = [], []
    if census:
        catalog, profiles = _load_census_profiles(args)
    return dataset_from_edi(records, census=profiles, catalog=catalog)


def _load_census_profiles(args):
    census_path = getattr(args, "census", None) or _default_path("census_da.csv")
    catalog_path = getattr(args, "catalog", None) or _default_path("catalog.csv")
    if not census_path or not catalog_path:
        raise ValidationError("census screening needs --census and --catalog")
    if getattr(args, "level", "da") == "neighborhood":
        catalog = vio.load_catalog(catalog_path)
        return catalog, vio.load_profiles(census_path, catalog)
    da_path = getattr(args, "da_geo", None) or _default_path("da.geojson")
    nbhd_path = getattr(args, "nbhd_geo", None) or _default_path("neighborhoods.geojson")
    if not da_path or not nbhd_path:
        raise ValidationError("DA-level census needs --da-geo and --nbhd-geo "
                              "(or --level neighborhood for pre-aggregated data)")
    catalog, table = vio.load_census(census_path, catalog_path)
    assignments = assign_da(geometry_set_from_geojson(vio.load_geojson(da_path)),
                            geometry_set_from_geojson(vio.load_geojson(nbhd_path)))
    return catalog, list(aggregate(assignments, table, catalog).profiles)


def _embed_once(dataset, args, wave):
    cfg = replace(_embedding_config(args), seed=stage_seed(args.seed, f"embed:{mode_label(wave)}"))
    matrix, keys = build_matrix(dataset, wave, standardize=cfg.standardize)
    if cfg.method == "tsne":
        emb = tsne(matrix, cfg, keys=keys)
    elif cfg.method == "umap":
        emb = umap(matrix, cfg, keys=keys)
    else:
        emb = pca(matrix, keys=keys)
    return replace(emb, mode=mode_label(wave)), matrix


def _cluster_once(dataset, args, wave):
    emb, matrix = _embed_once(dataset, args, wave)
    k = args.k if args.k is not None else default_k(emb.mode, emb.config.method)
    solution = cluster_embedding(emb, k, stage_seed(args.seed, f"kmeans:{emb.mode}"),
                                 restarts=args.restarts)
    solution = rank_labels(solution, dataset.edi_by_key(),
                           ranking_scale=args.ranking_scale,
                           statistic=args.ranking_statistic)
    return emb, matrix, solution


def _wave_of(args, dataset):
    if getattr(args, "all_wave", False):
        return None
    if args.wave is not None:
        return args.wave
    return max(dataset.waves())


# --- subcommand handlers ------------------------------------------------------------

def _cmd_ingest(args) -> int:
    dataset = _load_dataset(args, census=bool(args.census))
    summary = {
        "neighborhoods": len(dataset.neighborhoods),
        "edi_records": len(dataset.edi),
        "waves": dataset.waves(),
        "census_profiles": len(dataset.census),
        "catalog_variables": len(dataset.catalog),
    }
    if args.registrations:
        records = vio.load_registrations(args.registrations)
        kept, rejected = apply_filters(records, FilterPolicy())
        summary["registrations"] = {"total": len(records), "kept": len(kept),
                                    "rejected": len(rejected)}
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_embed(args) -> int:
    dataset = _load_dataset(args)
    emb, _ = _embed_once(dataset, args, _wave_of(args, dataset))
    write_embedding_csv(emb, args.out)
    if args.trace_out and emb.objective_trace:
        write_trace_csv(emb, args.trace_out)
    print(json.dumps({"rows": len(emb.points), "mode": emb.mode, "out": args.out}))
    return 0


def _cmd_cluster(args) -> int:
    dataset = _load_dataset(args)
    _, _, solution = _cluster_once(dataset, args, _wave_of(args, dataset))
    write_solution_csv(solution, args.out)
    print(json.dumps({"k": solution.k, "wcss": solution.wcss, "out": args.out}))
    return 0


def _cmd_validate(args) -> int:
    dataset = _load_dataset(args)
    wave = _wave_of(args, dataset)
    emb, matrix, solution = _cluster_once(dataset, args, wave)
    cfg = HopkinsConfig(sample_fraction=args.sample_fraction, min_sample=args.min_sample,
                        repeats=args.repeats, exponent=args.exponent,
                        seed=stage_seed(args.seed, f"hopkins:{emb.mode}"))
    points = matrix if args.space == "raw" else emb.points
    report = hopkins_per_cluster(points, solution.labels, cfg)
    write_hopkins_csv(report, args.out)
    print(json.dumps({"overall_h_av": report.overall.h_av,
                      "overall_p": report.overall.p_value, "out": args.out}))
    return 0


def _cmd_screen(args) -> int:
    dataset = _load_dataset(args, census=True)
    _, _, solution = _cluster_once(dataset, args, _wave_of(args, dataset))
    if solution.mode == "all_wave":
        from .clustering import reduce_a_labels
        labels = reduce_a_labels(solution)
    else:
        labels = {k[0]: int(lab) for k, lab in zip(solution.keys, solution.labels)}
    cfg = ScreeningConfig(alpha=args.alpha, correction=args.correction)
    results = screen(list(dataset.census), labels, cfg, list(dataset.catalog) or None)
    write_screening_csv(results, args.out)
    print(json.dumps({"tested": sum(1 for r in results if r.test_used != "skipped"),
                      "significant": [r.var_id for r in results if r.significant],
                      "out": args.out}))
    return 0


def _cmd_stability(args) -> int:
    dataset = _load_dataset(args)
    solutions = {}
    for wave in dataset.waves():
        _, _, solutions[wave] = _cluster_once(dataset, args, wave)
    args.k = args.k_all
    _, _, a_solution = _cluster_once(dataset, args, None)
    report = stability(solutions, a_solution)
    write_stability_csv(report, args.out)
    print(json.dumps({"neighborhoods": len(report.trajectories),
                      "a_cluster_instability": {str(k): v for k, v in
                                                report.a_cluster_instability.items()},
                      "out": args.out}))
    return 0


def _cmd_retention(args) -> int:
    records = vio.load_registrations(args.registrations)
    rules = load_rules(args.rules) if args.rules else DEFAULT_RULES
    populations = None
    if args.edi:
        dataset = _load_dataset(args)
        populations = dataset.children_by_neighborhood()
    result = run_bottomup(records, FilterPolicy(), rules, out_dir=args.out_dir,
                          populations=populations, rate_group=args.rate_group)
    print(json.dumps({"kept": len(result.journeys), "rejected": len(result.rejections),
                      "tables": sorted(result.tables), "out_dir": args.out_dir}))
    return 0


def _cmd_link(args) -> int:
    records = vio.load_registrations(args.registrations)
    rules = load_rules(args.rules) if args.rules else DEFAULT_RULES
    dataset = _load_dataset(args)
    kept, _ = apply_filters(records, FilterPolicy())
    journeys = build_journeys(kept, rules)
    wave = args.wave if args.wave is not None else max(dataset.waves())
    populations = dataset.children_by_neighborhood(wave)
    rates = enrollment_rates(journeys, args.group, populations)
    edi_values = {r.neighborhood.id: r.value(args.scale)
                  for r in dataset.edi if r.wave == wave}
    shared = sorted(set(rates) & set(edi_values))
    r, p = pearson([rates[n] for n in shared], [edi_values[n] for n in shared])
    if args.out:
        write_rates_csv(rates, args.group, args.out)
    print(json.dumps({"group": args.group, "scale": args.scale, "wave": wave,
                      "n": len(shared), "r": r, "p_value": p}))
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    serve(port=args.port, data_dir=args.data_dir, host=args.host)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="vulnscape",
                     description="Neighborhood vulnerability analytics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load and validate datasets", parents=[])
    _add_edi_arg(p)
    p.add_argument("--census", default=None)
    p.add_argument("--catalog", default=None)
    p.add_argument("--da-geo", dest="da_geo", default=None)
    p.add_argument("--nbhd-geo", dest="nbhd_geo", default=None)
    p.add_argument("--level", choices=("da", "neighborhood"), default="da")
    p.add_argument("--registrations", default=None)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("embed", help="project EDI vectors to 2-D")
    _add_edi_arg(p)
    _add_mode_args(p)
    _add_embedding_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--trace-out", dest="trace_out", default=None)
    p.set_defaults(func=_cmd_embed)

    for name, handler in (("cluster", _cmd_cluster), ("validate", _cmd_validate),
                          ("screen", _cmd_screen)):
        p = sub.add_parser(name, help=f"{name} over an embedding")
        _add_edi_arg(p)
        _add_mode_args(p)
        _add_embedding_args(p)
        p.add_argument("--k", type=int, default=None,
                       help="cluster count (default 3 single-wave, 6/4 all-wave)")
        p.add_argument("--restarts", type=int, default=50)
        p.add_argument("--ranking-scale", choices=EDI_MEASURES, default="two_or_more")
        p.add_argument("--ranking-statistic", choices=("mean", "median"), default="mean")
        if name == "validate":
            p.add_argument("--sample-fraction", type=float, default=0.3)
            p.add_argument("--min-sample", type=int, default=3)
            p.add_argument("--repeats", type=int, default=100)
            p.add_argument("--exponent", choices=("d", "one"), default="d")
            p.add_argument("--space", choices=("raw", "embedded"), default="raw")
        if name == "screen":
            p.add_argument("--census", default=None)
            p.add_argument("--catalog", default=None)
            p.add_argument("--da-geo", dest="da_geo", default=None)
            p.add_argument("--nbhd-geo", dest="nbhd_geo", default=None)
            p.add_argument("--level", choices=("da", "neighborhood"), default="da")
            p.add_argument("--alpha", type=float, default=0.05)
            p.add_argument("--correction", choices=("none", "benjamini_hochberg"),
                           default="none")
        p.add_argument("--out", required=True)
        p.set_defaults(func=handler)

    p = sub.add_parser("stability", help="S-cluster trajectories across waves")
    _add_edi_arg(p)
    _add_embedding_args(p)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--k-all", dest="k_all", type=int, default=None)
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--ranking-scale", choices=EDI_MEASURES, default="two_or_more")
    p.add_argument("--ranking-statistic", choices=("mean", "median"), default="mean")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_stability, wave=None, all_wave=False)

    p = sub.add_parser("retention", help="bottom-up registration analysis")
    p.add_argument("--registrations", required=True)
    p.add_argument("--rules", default=None)
    _add_edi_arg(p)
    p.add_argument("--rate-group", dest="rate_group", default="General Activities")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=_cmd_retention)

    p = sub.add_parser("link", help="enrollment-rate vs EDI correlation")
    p.add_argument("--registrations", required=True)
    p.add_argument("--rules", default=None)
    _add_edi_arg(p)
    p.add_argument("--group", default="General Activities")
    p.add_argument("--scale", choices=EDI_MEASURES, default="one_or_more")
    p.add_argument("--wave", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_link)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", dest="data_dir",
                   default=os.environ.get("VULNSCAPE_DATA_DIR"))
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 1
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError) as err:
        # bad flags, bad data, or a bad path: the user can fix the invocation
        print(f"vulnscape: {err}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as err:   # runtime failure: report, never traceback-spam
        print(f"vulnscape: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
