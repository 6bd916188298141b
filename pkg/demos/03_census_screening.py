"""
Screening census variables across clusters
==========================================

Aggregates DA-level census data to neighborhoods by centroid containment,
clusters the neighborhoods on wave-6 EDI, and screens all 147 variables
for group differences (ANOVA when normality and homogeneity hold at the
configured level, Kruskal-Wallis otherwise).
"""

from vulnscape.clustering import cluster_embedding, rank_labels
from vulnscape.embedding import EmbeddingConfig, embed
from vulnscape.geo import aggregate, assign_da
from vulnscape.model import dataset_from_edi
from vulnscape.stats import ScreeningConfig, screen
from vulnscape.synthetic import (
    packaged_catalog,
    synthetic_census,
    synthetic_edi,
    synthetic_geometry,
)

records, truth = synthetic_edi(seed=4, spread=1.2)
catalog = packaged_catalog()
da_geo, nbhd_geo = synthetic_geometry(seed=5)
assignments = assign_da(da_geo, nbhd_geo)
assigned = sum(1 for v in assignments.values() if v is not None)
print(f"{assigned}/{len(assignments)} DAs fall inside a neighborhood boundary")

table = synthetic_census(seed=6, assignments=assignments, truth=truth, catalog=catalog)
aggregated = aggregate(assignments, table, catalog)
print(f"aggregated {len(table.rows)} DA rows into {len(aggregated.profiles)} "
      f"neighborhood profiles ({len(aggregated.approximate)} median variables "
      f"flagged approximate)")

dataset = dataset_from_edi(records, census=list(aggregated.profiles), catalog=catalog)
embedding = embed(dataset, EmbeddingConfig(method="tsne", seed=11), wave=6)
solution = rank_labels(cluster_embedding(embedding, 3, seed=11), dataset.edi_by_key())
labels = {key[0]: int(lab) for key, lab in zip(solution.keys, solution.labels)}

results = screen(list(dataset.census), labels, ScreeningConfig(alpha=0.05), catalog)
significant = [r for r in results if r.significant]
print(f"\n{len(significant)} significant variables at alpha = 0.05:")
for r in significant[:10]:
    print(f"  {r.label:55s} {r.test_used:14s} p = {r.p_value:.2e}")

skipped = sum(1 for r in results if r.test_used == "skipped")
routed_kw = sum(1 for r in results if r.test_used == "kruskal_wallis")
print(f"\n{routed_kw} variables routed to Kruskal-Wallis by assumption checks, "
      f"{skipped} skipped")
