"""k-means over embedded points, vulnerability-rank relabeling, cross-wave
stability, and agglomerative clustering on raw EDI vectors.

Cluster 0 is always the least vulnerable after ranking; single-wave
solutions default to k=3, all-wave solutions to k=6 (t-SNE) or k=4 (UMAP),
matching the structure the source analysis fixed by inspection.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist

from .embedding import Embedding
from .errors import KExceedsN, KeyMismatch, MissingScaleValue, RangeViolation

LINKAGES = ("single", "complete", "average", "ward")

DEFAULT_K_SINGLE_WAVE = 3
DEFAULT_K_ALL_WAVE = {"tsne": 6, "umap": 4, "pca": 6}

KMEANS_TOL = 1e-9
KMEANS_MAX_ITER = 300


@dataclass(frozen=True)
class ClusterSolution:
    labels: np.ndarray                     # per-point label in [0, k)
    centroids: np.ndarray                  # k x 2
    wcss: float
    k: int
    restarts_used: int
    seed: int
    mode: str = "matrix"                   # single_wave(w) | all_wave | matrix
    method: str = ""                       # source embedding method tag
    keys: tuple[tuple[str, int | None], ...] = ()
    points: np.ndarray | None = None
    wcss_trace: tuple[float, ...] = ()     # per-iteration WCSS of the winning restart

    def __post_init__(self):
        if self.labels.min() < 0 or self.labels.max() >= self.k:
            raise RangeViolation("labels", "label outside [0, k)")


@dataclass(frozen=True)
class StabilityReport:
    trajectories: dict[str, tuple[int, ...]]       # neighborhood -> S-labels by wave
    transitions: dict[str, int]
    a_labels: dict[str, int]                       # neighborhood -> reduced A-label
    a_cluster_instability: dict[int, float]
    waves: tuple[int, ...]


@dataclass(frozen=True)
class Dendrogram:
    merges: tuple[tuple[int, int, float, int], ...]  # (cluster a, cluster b, height, size)
    linkage: str
    n: int


def _wcss(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    return float(((points - centroids[labels]) ** 2).sum())


def _kmeans_plusplus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    closest = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total == 0.0:
            centroids[j:] = points[rng.integers(n, size=k - j)]
            break
        probs = closest / total
        centroids[j] = points[rng.choice(n, p=probs)]
        closest = np.minimum(closest, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _lloyd(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray, list[float]]:
    k = len(centroids)
    trace: list[float] = []
    labels = np.zeros(len(points), dtype=int)
    for _ in range(KMEANS_MAX_ITER):
        labels = cdist(points, centroids, "sqeuclidean").argmin(axis=1)
        # repair empty clusters with the point farthest from its centroid
        for j in range(k):
            if not (labels == j).any():
                residual = ((points - centroids[labels]) ** 2).sum(axis=1)
                labels[int(residual.argmax())] = j
        new_centroids = np.array([points[labels == j].mean(axis=0) for j in range(k)])
        trace.append(_wcss(points, labels, new_centroids))
        shift = float(np.abs(new_centroids - centroids).max())
        centroids = new_centroids
        if shift < KMEANS_TOL:
            break
    return labels, centroids, trace


def kmeans(points: np.ndarray, k: int, seed: int, restarts: int = 50,
           mode: str = "matrix", method: str = "",
           keys: tuple[tuple[str, int | None], ...] = ()) -> ClusterSolution:
    """Best-of-restarts Lloyd's algorithm with k-means++ seeding.

    Converges when the centroid shift drops below 1e-9 or after 300
    iterations; the winner is the restart with the lowest WCSS, ties
    resolved by the lowest restart index.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if not 1 <= k <= n:
        raise KExceedsN(k, n)
    best: tuple[float, int, np.ndarray, np.ndarray, list[float]] | None = None
    for restart in range(restarts):
        rng = np.random.default_rng([seed, restart])
        init = _kmeans_plusplus(pts, k, rng)
        labels, centroids, trace = _lloyd(pts, init)
        wcss = _wcss(pts, labels, centroids)
        if best is None or wcss < best[0]:
            best = (wcss, restart, labels, centroids, trace)
    wcss, _, labels, centroids, trace = best
    return ClusterSolution(labels=labels, centroids=centroids, wcss=wcss, k=k,
                           restarts_used=restarts, seed=seed, mode=mode, method=method,
                           keys=tuple(keys), points=pts, wcss_trace=tuple(trace))


def cluster_embedding(embedding: Embedding, k: int | None, seed: int,
                      restarts: int = 50) -> ClusterSolution:
    """k-means over an embedding's 2-D points, carrying provenance along."""
    if k is None:
        k = default_k(embedding.mode, embedding.config.method)
    return kmeans(embedding.points, k, seed, restarts,
                  mode=embedding.mode, method=embedding.config.method,
                  keys=embedding.source_keys)


def default_k(mode: str, method: str) -> int:
    if mode == "all_wave":
        return DEFAULT_K_ALL_WAVE.get(method, DEFAULT_K_ALL_WAVE["tsne"])
    return DEFAULT_K_SINGLE_WAVE


def rank_labels(solution: ClusterSolution, edi_by_key: dict,
                ranking_scale: str = "two_or_more",
                statistic: str = "mean") -> ClusterSolution:
    """Permute labels so cluster 0 is the least vulnerable, ascending.

    The per-cluster statistic (mean or median) of the ranking scale is
    computed over member points; ties keep the original label order, so
    relabeling is idempotent.  Geometry is unchanged.
    """
    if statistic not in ("mean", "median"):
        raise RangeViolation("statistic", f"unknown statistic {statistic!r}")
    if not solution.keys:
        raise MissingScaleValue("<no keys attached>")
    values = []
    for key in solution.keys:
        record = edi_by_key.get((key[0], key[1])) or edi_by_key.get(key[0])
        if record is None:
            raise MissingScaleValue(key)
        values.append(record.value(ranking_scale) if hasattr(record, "value") else float(record))
    values = np.asarray(values, dtype=float)

    stats = []
    for cluster in range(solution.k):
        member = values[solution.labels == cluster]
        if len(member) == 0:
            stats.append((np.inf, cluster))
            continue
        agg = float(np.mean(member)) if statistic == "mean" else float(np.median(member))
        stats.append((agg, cluster))
    order = sorted(range(solution.k), key=lambda c: stats[c])   # (value, original label)
    relabel = {old: new for new, old in enumerate(order)}
    new_labels = np.array([relabel[int(v)] for v in solution.labels], dtype=int)
    new_centroids = solution.centroids[order]
    return replace(solution, labels=new_labels, centroids=new_centroids)


def reduce_a_labels(a_solution: ClusterSolution) -> dict[str, int]:
    """One A-label per neighborhood: majority vote over its pooled wave
    points, ties resolved by the label of the latest wave."""
    votes: dict[str, list[tuple[int | None, int]]] = {}
    for (neighborhood, wave), label in zip(a_solution.keys, a_solution.labels):
        votes.setdefault(neighborhood, []).append((wave, int(label)))
    reduced: dict[str, int] = {}
    for neighborhood, pairs in votes.items():
        counts: dict[int, int] = {}
        for _, label in pairs:
            counts[label] = counts.get(label, 0) + 1
        top = max(counts.values())
        tied = {label for label, c in counts.items() if c == top}
        if len(tied) == 1:
            reduced[neighborhood] = tied.pop()
        else:
            latest = max((w for w, lab in pairs if lab in tied and w is not None), default=None)
            if latest is None:
                reduced[neighborhood] = min(tied)
            else:
                reduced[neighborhood] = next(lab for w, lab in pairs if w == latest and lab in tied)
    return reduced


def stability(s_solutions: dict[int, ClusterSolution],
              a_solution: ClusterSolution) -> StabilityReport:
    """Trajectories of S-labels across waves, grouped by reduced A-label."""
    waves = tuple(sorted(s_solutions))
    neighborhood_sets = [frozenset(k[0] for k in s_solutions[w].keys) for w in waves]
    if len(set(neighborhood_sets)) != 1:
        raise KeyMismatch("single-wave solutions cover different neighborhood sets")
    neighborhoods = sorted(neighborhood_sets[0])

    a_labels = reduce_a_labels(a_solution)
    if set(a_labels) != set(neighborhoods):
        raise KeyMismatch("all-wave solution covers a different neighborhood set")

    trajectories: dict[str, tuple[int, ...]] = {}
    transitions: dict[str, int] = {}
    for neighborhood in neighborhoods:
        path = []
        for w in waves:
            sol = s_solutions[w]
            index = next(i for i, k in enumerate(sol.keys) if k[0] == neighborhood)
            path.append(int(sol.labels[index]))
        trajectories[neighborhood] = tuple(path)
        transitions[neighborhood] = sum(1 for a, b in zip(path, path[1:]) if a != b)

    instability: dict[int, float] = {}
    for label in sorted(set(a_labels.values())):
        members = [n for n in neighborhoods if a_labels[n] == label]
        instability[label] = float(np.mean([transitions[n] for n in members]))
    return StabilityReport(trajectories=trajectories, transitions=transitions,
                           a_labels=a_labels, a_cluster_instability=instability,
                           waves=waves)


# --- agglomerative ----------------------------------------------------------------

def agglomerative(matrix: np.ndarray, linkage: str = "ward") -> Dendrogram:
    """Lance-Williams agglomeration on Euclidean distances.

    Clusters are numbered scipy-style: originals 0..n-1, merges n, n+1, ...
    Ties break deterministically on the smallest (a, b) pair of cluster ids.
    """
    if linkage not in LINKAGES:
        raise RangeViolation("linkage", f"unknown linkage {linkage!r}")
    pts = np.asarray(matrix, dtype=float)
    n = len(pts)
    if n < 2:
        raise RangeViolation("matrix", "agglomeration needs >= 2 points")

    dist = cdist(pts, pts)
    active: dict[int, int] = {i: 1 for i in range(n)}   # cluster id -> size
    index: dict[int, int] = {i: i for i in range(n)}    # cluster id -> matrix row
    d = np.full((2 * n - 1, 2 * n - 1), np.inf)
    d[:n, :n] = dist
    np.fill_diagonal(d, np.inf)

    merges: list[tuple[int, int, float, int]] = []
    next_id = n
    for _ in range(n - 1):
        ids = np.array(sorted(active))
        sub = d[np.ix_(ids, ids)]
        sub[np.tril_indices(len(ids))] = np.inf
        low = sub.min()
        # argwhere scans row-major, so the first hit is the smallest (a, b) pair
        ai, bi = np.argwhere(sub == low)[0]
        a, b, height = int(ids[ai]), int(ids[bi]), float(low)
        size = active[a] + active[b]
        merges.append((a, b, height, size))

        for c in ids:
            c = int(c)
            if c in (a, b):
                continue
            d[next_id, c] = d[c, next_id] = _lance_williams(
                linkage, d[a, c], d[b, c], d[a, b], active[a], active[b], active[c])
        del active[a], active[b]
        active[next_id] = size
        next_id += 1

    return Dendrogram(merges=tuple(merges), linkage=linkage, n=n)


def _lance_williams(linkage: str, dac: float, dbc: float, dab: float,
                    na: int, nb: int, nc: int) -> float:
    if linkage == "single":
        return min(dac, dbc)
    if linkage == "complete":
        return max(dac, dbc)
    if linkage == "average":
        return (na * dac + nb * dbc) / (na + nb)
    # ward on Euclidean distances (recursive update keeps heights comparable
    # to sqrt(2 |A||B| / (|A|+|B|)) * |centroid gap|)
    total = na + nb + nc
    return float(np.sqrt((na + nc) / total * dac**2
                         + (nb + nc) / total * dbc**2
                         - nc / total * dab**2))


def cut_dendrogram(dendrogram: Dendrogram, k: int) -> np.ndarray:
    """Undo the last k-1 merges; labels 0..k-1 in first-appearance order."""
    n = dendrogram.n
    if not 1 <= k <= n:
        raise KExceedsN(k, n)
    parent = list(range(2 * n - 1))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, (a, b, _height, _size) in enumerate(dendrogram.merges[:n - k]):
        new_id = n + i
        parent[find(a)] = new_id
        parent[find(b)] = new_id

    labels = np.empty(n, dtype=int)
    mapping: dict[int, int] = {}
    for i in range(n):
        root = find(i)
        if root not in mapping:
            mapping[root] = len(mapping)
        labels[i] = mapping[root]
    return labels


def write_solution_csv(solution: ClusterSolution, path) -> None:
    from .io import _num, _writer

    with _writer(path) as (fh, writer):
        writer.writerow(["key", "wave", "x", "y", "label"])
        points = solution.points if solution.points is not None else np.zeros((len(solution.labels), 2))
        keys = solution.keys or tuple((str(i), None) for i in range(len(solution.labels)))
        for (key, wave), (px, py), label in zip(keys, points, solution.labels):
            writer.writerow([key, "" if wave is None else wave, _num(px), _num(py), int(label)])


def write_stability_csv(report: StabilityReport, path) -> None:
    from .io import _writer

    with _writer(path) as (fh, writer):
        writer.writerow(["neighborhood"] + [f"w{w}" for w in report.waves]
                        + ["transitions", "a_label"])
        for neighborhood in sorted(report.trajectories):
            writer.writerow([neighborhood]
                            + list(report.trajectories[neighborhood])
                            + [report.transitions[neighborhood], report.a_labels[neighborhood]])
