"""
Embedding and clustering neighborhood EDI vectors
=================================================

Walks the top-down path on synthetic survey data: build the wave-6
matrix, project it with t-SNE, find the 3 single-wave clusters, and rank
them so cluster 0 is the least vulnerable.
"""

import numpy as np

from vulnscape.clustering import cluster_embedding, rank_labels
from vulnscape.embedding import EmbeddingConfig, embed
from vulnscape.synthetic import synthetic_dataset

dataset, truth = synthetic_dataset(seed=4, spread=1.2)
print(f"{len(dataset.neighborhoods)} neighborhoods, waves {dataset.waves()}")

# Each neighborhood is a point in R^5 (the five vulnerability scales).
embedding = embed(dataset, EmbeddingConfig(method="tsne", seed=42), wave=6)
print(f"projected wave 6 to 2-D; final KL divergence "
      f"{embedding.objective_trace[-1][1]:.4f}")

solution = cluster_embedding(embedding, k=3, seed=42)
solution = rank_labels(solution, dataset.edi_by_key())

for label in range(solution.k):
    members = [key[0] for key, lab in zip(solution.keys, solution.labels) if lab == label]
    values = [dataset.record(m, 6).two_or_more for m in members]
    print(f"cluster {label}: {len(members):2d} neighborhoods, "
          f"mean two-or-more vulnerability {np.mean(values):5.2f}%")

print("\ncluster 0 is the least vulnerable by construction of the ranking")

# The generator's hidden blob assignment should match the clusters exactly
recovered = sum(1 for key, lab in zip(solution.keys, solution.labels)
                if truth[key[0]] == lab)
print(f"label agreement with generator truth: {recovered}/24")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 5))
    scatter = ax.scatter(embedding.points[:, 0], embedding.points[:, 1],
                         c=solution.labels, cmap="viridis", s=60)
    ax.set_title("Wave 6, t-SNE projection, 3 ranked clusters")
    fig.colorbar(scatter, label="cluster")
    fig.savefig("demo_edi_clusters.png", dpi=120)
    print("wrote demo_edi_clusters.png")
except ImportError:
    print("matplotlib not installed; skipping the figure")
