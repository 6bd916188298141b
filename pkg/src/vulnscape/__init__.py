"""Neighborhood vulnerability analytics.

Top-down: embed per-wave EDI vectors, cluster and rank neighborhoods,
validate cluster tendency, and screen census variables for what separates
the clusters.  Bottom-up: filter program registrations into per-client
journeys and summarize entry, exit, and retention patterns.
"""

from .clustering import (
    ClusterSolution,
    Dendrogram,
    StabilityReport,
    agglomerative,
    cluster_embedding,
    cut_dendrogram,
    kmeans,
    rank_labels,
    stability,
)
from .embedding import Embedding, EmbeddingConfig, build_matrix, embed, pca, tsne, umap
from .hopkins import HopkinsConfig, HopkinsReport, hopkins_average, hopkins_once, hopkins_per_cluster
from .model import (
    CensusProfile,
    CensusVariable,
    Dataset,
    EdiRecord,
    NeighborhoodId,
    RegistrationRecord,
    dataset_from_edi,
)
from .pipeline import RunManifest, run_bottomup, run_topdown
from .retention import (
    ClientJourney,
    FilterPolicy,
    GroupingRules,
    apply_filters,
    build_journeys,
    classify,
    distributions,
    enrollment_rates,
)
from .stats import ScreeningConfig, anova_oneway, kruskal_wallis, normality, homogeneity, pearson, screen

__version__ = "0.1.0"

__all__ = [
    "CensusProfile", "CensusVariable", "ClientJourney", "ClusterSolution",
    "Dataset", "Dendrogram", "EdiRecord", "Embedding", "EmbeddingConfig",
    "FilterPolicy", "GroupingRules", "HopkinsConfig", "HopkinsReport",
    "NeighborhoodId", "RegistrationRecord", "RunManifest", "ScreeningConfig",
    "StabilityReport", "agglomerative", "anova_oneway", "apply_filters",
    "build_journeys", "build_matrix", "classify", "cluster_embedding",
    "cut_dendrogram", "dataset_from_edi", "distributions", "embed",
    "enrollment_rates", "homogeneity", "hopkins_average", "hopkins_once",
    "hopkins_per_cluster", "kmeans", "kruskal_wallis", "normality", "pca",
    "pearson", "rank_labels", "run_bottomup", "run_topdown", "screen",
    "stability", "tsne", "umap",
]
