"""Projection of wave-indexed EDI vectors from R^5 into R^2.

Three projectors share one interface: exact (non-approximate) t-SNE with
per-point bandwidths found by bisection, a simplified UMAP (exact k-NN
graph, random seeded init, batched negative-sampling SGD), and a PCA
baseline.  All are deterministic for a fixed seed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import curve_fit
from scipy.spatial.distance import cdist

from .errors import (
    MissingWave,
    NonFiniteGradient,
    PerplexityTooLarge,
    RangeViolation,
    TooFewPoints,
)
from .model import Dataset

METHODS = ("tsne", "umap", "pca")

EARLY_EXAGGERATION = 12.0
EXAGGERATION_ITERS = 250
CHECKPOINT_EVERY = 50
ENTROPY_TOLERANCE = 1e-5
NEGATIVE_SAMPLES = 5

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class EmbeddingConfig:
    method: str = "tsne"
    seed: int = 0
    perplexity: float | None = None      # default: min(30, floor((n-1)/3))
    iterations: int = 1000
    learning_rate: float | str = "auto"  # auto: max(50, n/12)
    n_neighbors: int = 15                # clamped to n-1
    min_dist: float = 0.1
    epochs: int = 500
    standardize: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise RangeViolation("method", f"unknown method {self.method!r}")
        if self.perplexity is not None and self.perplexity <= 0:
            raise RangeViolation("perplexity", f"{self.perplexity} not positive")
        if self.iterations < 1:
            raise RangeViolation("iterations", "need at least one iteration")
        if self.n_neighbors < 2:
            raise RangeViolation("n_neighbors", "need at least 2 neighbors")
        if self.min_dist <= 0:
            raise RangeViolation("min_dist", f"{self.min_dist} not positive")
        if self.epochs < 1:
            raise RangeViolation("epochs", "need at least one epoch")
        if self.learning_rate != "auto" and not (
                isinstance(self.learning_rate, (int, float)) and self.learning_rate > 0):
            raise RangeViolation("learning_rate", f"{self.learning_rate!r} not positive or 'auto'")


@dataclass(frozen=True)
class Embedding:
    points: np.ndarray                                  # n x 2, finite
    source_keys: tuple[tuple[str, int | None], ...]
    objective_trace: tuple[tuple[int, float], ...]
    config: EmbeddingConfig
    mode: str = "matrix"

    def __post_init__(self):
        if len(self.points) != len(self.source_keys):
            raise RangeViolation("source_keys", "row count differs from key count")
        if not np.isfinite(self.points).all():
            raise RangeViolation("points", "non-finite coordinates")


def mode_label(wave: int | None) -> str:
    return "all_wave" if wave is None else f"single_wave({wave})"


def build_matrix(dataset: Dataset, wave: int | None = None,
                 standardize: bool = True) -> tuple[np.ndarray, list[tuple[str, int]]]:
    """Stack 5-scale EDI vectors into an n x 5 matrix.

    ``wave`` selects the single-wave slice (one row per neighborhood);
    ``None`` pools every (neighborhood, wave) pair.  With ``standardize``
    each column is z-scored; a zero-variance column is left centered at 0
    with a warning.
    """
    by_key = dataset.edi_by_key()
    keys: list[tuple[str, int]] = []
    if wave is not None:
        for nbhd in dataset.neighborhoods:
            if (nbhd.id, wave) not in by_key:
                raise MissingWave(nbhd.id, wave)
            keys.append((nbhd.id, wave))
    else:
        keys = sorted(by_key)
    rows = np.array([by_key[k].scale_vector() for k in keys], dtype=float)
    if standardize:
        mean = rows.mean(axis=0)
        std = rows.std(axis=0)
        flat = std == 0.0
        if flat.any():
            warnings.warn(
                f"zero-variance EDI column(s) at index {np.flatnonzero(flat).tolist()}; "
                "left centered at 0", stacklevel=2)
            std = np.where(flat, 1.0, std)
        rows = (rows - mean) / std
    return rows, keys


# --- t-SNE ---------------------------------------------------------------------

def default_perplexity(n: int) -> float:
    return float(min(30, (n - 1) // 3))


def _conditional_probabilities(sq_dists: np.ndarray, perplexity: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-point Gaussian affinities with bandwidths bisected to the target entropy.

    Returns (P_conditional, betas); each row of P sums to 1 and has Shannon
    entropy within 1e-5 of log(perplexity).
    """
    n = len(sq_dists)
    target = math.log(perplexity)
    p_cond = np.zeros((n, n))
    betas = np.ones(n)
    for i in range(n):
        d = np.delete(sq_dists[i], i)
        beta, row = _bisect_beta(d, target)
        betas[i] = beta
        p_cond[i, np.arange(n) != i] = row
    return p_cond, betas


def _row_entropy(d: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    logits = -d * beta
    logits -= logits.max()
    p = np.exp(logits)
    total = p.sum()
    p /= total
    nonzero = p > 0
    entropy = float(-(p[nonzero] * np.log(p[nonzero])).sum())
    return entropy, p


def _bisect_beta(d: np.ndarray, target: float) -> tuple[float, np.ndarray]:
    beta = 1.0
    lo, hi = 0.0, math.inf
    # bracket: entropy decreases as beta grows
    for _ in range(100):
        entropy, _ = _row_entropy(d, beta)
        if entropy > target:
            lo = beta
            beta = beta * 2.0 if math.isinf(hi) else (beta + hi) / 2.0
        else:
            hi = beta
            beta = beta / 2.0 if lo == 0.0 else (beta + lo) / 2.0
    entropy, p = _row_entropy(d, beta)
    if abs(entropy - target) > ENTROPY_TOLERANCE:
        raise RangeViolation(
            "perplexity",
            f"bandwidth bisection stalled at entropy {entropy:.6f} vs target {target:.6f} "
            "(duplicate points?)")
    return beta, p


def _resolve_learning_rate(config: EmbeddingConfig, n: int) -> float:
    if config.learning_rate == "auto":
        return max(50.0, n / 12.0)
    return float(config.learning_rate)


def tsne(matrix: np.ndarray, config: EmbeddingConfig,
         keys=None, init: np.ndarray | None = None) -> Embedding:
    """Exact t-SNE to 2-D.

    Early exaggeration x12 drives the first 250 iterations with momentum
    0.5, then plain affinities with momentum 0.8.  The KL divergence
    against the true (unexaggerated) affinities is recorded every 50
    iterations.  Bit-identical for a fixed seed.
    """
    x = np.asarray(matrix, dtype=float)
    n = len(x)
    if n < 4:
        raise TooFewPoints(f"t-SNE needs >= 4 points, got {n}")
    perplexity = config.perplexity if config.perplexity is not None else default_perplexity(n)
    if perplexity > (n - 1) / 3:
        raise PerplexityTooLarge(perplexity, n)

    sq = cdist(x, x, "sqeuclidean")
    p_cond, _ = _conditional_probabilities(sq, perplexity)
    p = (p_cond + p_cond.T) / (2.0 * n)
    p = np.maximum(p, _EPS)

    rng = np.random.default_rng(config.seed)
    if init is None:
        # PCA shape at tiny scale stabilizes the global layout; seeded jitter
        # keeps runs distinct across seeds
        base = pca(x).points
        scale = base[:, 0].std()
        y = (base / scale if scale > 0 else base) * 1e-4
        y = y + rng.normal(0.0, 0.5e-4, size=(n, 2))
    else:
        y = np.array(init, dtype=float)
    lr = _resolve_learning_rate(config, n)
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    trace: list[tuple[int, float]] = []

    for it in range(1, config.iterations + 1):
        exaggerate = it <= EXAGGERATION_ITERS
        momentum = 0.5 if it <= EXAGGERATION_ITERS else 0.8
        p_eff = p * EARLY_EXAGGERATION if exaggerate else p

        num = 1.0 / (1.0 + cdist(y, y, "sqeuclidean"))
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), _EPS)

        pq = (p_eff - q) * num
        grad = 4.0 * (np.diag(pq.sum(axis=1)) - pq) @ y
        if not np.isfinite(grad).all():
            finite = grad[np.isfinite(grad)]
            detail = (f"max finite |grad| = {np.abs(finite).max():.3e}" if finite.size
                      else "every gradient entry non-finite")
            raise NonFiniteGradient(it, detail)

        flip = update * grad < 0.0
        gains = np.where(flip, gains + 0.2, gains * 0.8)
        # the cap stops slow adaptive-gain runaway on near-converged layouts
        gains = np.clip(gains, 0.01, 5.0)
        update = momentum * update - lr * gains * grad
        y = y + update

        if it % CHECKPOINT_EVERY == 0 or it == config.iterations:
            kl = float((p * np.log(p / q)).sum())
            if not trace or trace[-1][0] != it:
                trace.append((it, kl))

    return Embedding(points=y, source_keys=_as_keys(keys, n),
                     objective_trace=tuple(trace),
                     config=replace(config, method="tsne", perplexity=perplexity))


# --- UMAP ----------------------------------------------------------------------

def _smooth_knn(dist_row: np.ndarray, rho: float, target: float) -> float:
    """Bisect sigma so the smoothed neighbor weights sum to log2(k)."""
    lo, hi = 0.0, math.inf
    sigma = 1.0
    for _ in range(64):
        total = float(np.exp(-np.maximum(dist_row - rho, 0.0) / sigma).sum())
        if total > target:
            hi = sigma
            sigma = sigma / 2.0 if lo == 0.0 else (sigma + lo) / 2.0
        else:
            lo = sigma
            sigma = sigma * 2.0 if math.isinf(hi) else (sigma + hi) / 2.0
    return max(sigma, 1e-12)


def fit_curve_params(min_dist: float) -> tuple[float, float]:
    """Fit (a, b) of the low-dimensional kernel 1/(1 + a d^(2b)) from min_dist."""
    xv = np.linspace(0.0, 3.0, 300)
    yv = np.where(xv < min_dist, 1.0, np.exp(-(xv - min_dist)))

    def kernel(x, a, b):
        return 1.0 / (1.0 + a * x ** (2.0 * b))

    (a, b), _ = curve_fit(kernel, xv, yv, p0=(1.0, 1.0), maxfev=10000)
    return float(a), float(b)


def fuzzy_graph(x: np.ndarray, n_neighbors: int) -> np.ndarray:
    """Symmetric fuzzy-union membership matrix from the exact k-NN graph."""
    n = len(x)
    dists = cdist(x, x)
    np.fill_diagonal(dists, np.inf)    # self is never its own neighbor
    order = np.argsort(dists, axis=1, kind="stable")
    w = np.zeros((n, n))
    target = math.log2(n_neighbors)
    for i in range(n):
        neighbors = order[i, :n_neighbors]
        d = dists[i, neighbors]
        rho = d[0]
        sigma = _smooth_knn(d, rho, target)
        w[i, neighbors] = np.exp(-np.maximum(d - rho, 0.0) / sigma)
    return w + w.T - w * w.T


def umap(matrix: np.ndarray, config: EmbeddingConfig,
         keys=None, init: np.ndarray | None = None) -> Embedding:
    """Simplified UMAP to 2-D.

    Exact k-NN graph, fuzzy union a + b - ab, curve parameters fit from
    min_dist, random seeded init, and per-epoch batched stochastic
    gradient steps on the cross-entropy with 5 negative samples per
    positive edge.  Deterministic for a fixed seed.
    """
    x = np.asarray(matrix, dtype=float)
    n = len(x)
    if n < 3:
        raise TooFewPoints(f"UMAP needs >= 3 points, got {n}")
    k = min(config.n_neighbors, n - 1)
    if n <= k:
        raise TooFewPoints(f"UMAP needs n > n_neighbors, got n={n}, k={k}")

    graph = fuzzy_graph(x, k)
    a, b = fit_curve_params(config.min_dist)
    heads, tails = np.nonzero(graph)
    weights = graph[heads, tails]
    epochs_per_sample = weights.max() / weights
    next_due = epochs_per_sample.copy()

    rng = np.random.default_rng(config.seed)
    y = rng.uniform(-10.0, 10.0, size=(n, 2)) if init is None else np.array(init, dtype=float)
    trace: list[tuple[int, float]] = []

    for epoch in range(1, config.epochs + 1):
        alpha = 1.0 - (epoch - 1) / config.epochs
        due = next_due <= epoch
        if due.any():
            next_due[due] += epochs_per_sample[due]
            h = heads[due]
            t = tails[due]
            delta = y[h] - y[t]
            sq = (delta**2).sum(axis=1)
            sq_safe = np.where(sq > 0.0, sq, 1.0)
            coeff = np.where(sq > 0.0,
                             -2.0 * a * b * sq_safe ** (b - 1.0) / (1.0 + a * sq_safe**b),
                             0.0)
            attract = np.clip(coeff[:, None] * delta, -4.0, 4.0)
            np.add.at(y, h, alpha * attract)
            np.add.at(y, t, -alpha * attract)

            negatives = rng.integers(0, n, size=(len(h), NEGATIVE_SAMPLES))
            for s in range(NEGATIVE_SAMPLES):
                other = negatives[:, s]
                delta = y[h] - y[other]
                sq = (delta**2).sum(axis=1)
                coeff = 2.0 * b / ((0.001 + sq) * (1.0 + a * sq**b))
                coeff = np.where(other == h, 0.0, coeff)
                repulse = np.clip(coeff[:, None] * delta, -4.0, 4.0)
                np.add.at(y, h, alpha * repulse)

        if epoch % CHECKPOINT_EVERY == 0 or epoch == config.epochs:
            if not trace or trace[-1][0] != epoch:
                trace.append((epoch, _cross_entropy(graph, y, a, b)))

    return Embedding(points=y, source_keys=_as_keys(keys, n),
                     objective_trace=tuple(trace),
                     config=replace(config, method="umap", n_neighbors=k))


def _cross_entropy(graph: np.ndarray, y: np.ndarray, a: float, b: float) -> float:
    sq = cdist(y, y, "sqeuclidean")
    q = 1.0 / (1.0 + a * np.maximum(sq, _EPS) ** b)
    np.fill_diagonal(q, 0.0)
    v = graph
    with np.errstate(divide="ignore", invalid="ignore"):
        attract = np.where(v > 0, v * np.log(np.maximum(q, _EPS)), 0.0)
        repel = np.where(v < 1, (1.0 - v) * np.log(np.maximum(1.0 - q, _EPS)), 0.0)
    return float(-(attract + repel)[np.triu_indices(len(y), 1)].sum())


# --- PCA ------------------------------------------------------------------------

def pca(matrix: np.ndarray, keys=None) -> Embedding:
    """Top-2 principal component scores via SVD of the centered matrix.

    Sign convention: the largest-magnitude loading of each component is
    positive.  Degenerate (all-equal) input yields zero coordinates.
    """
    x = np.asarray(matrix, dtype=float)
    n = len(x)
    if n < 2:
        raise TooFewPoints(f"PCA needs >= 2 points, got {n}")
    centered = x - x.mean(axis=0)
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    take = min(2, vt.shape[0])
    y = np.zeros((n, 2))
    for comp in range(take):
        loading = vt[comp]
        pivot = int(np.abs(loading).argmax())
        sign = 1.0 if loading[pivot] >= 0.0 else -1.0
        y[:, comp] = sign * u[:, comp] * s[comp]
    return Embedding(points=y, source_keys=_as_keys(keys, n),
                     objective_trace=(), config=EmbeddingConfig(method="pca"))


# --- front door -------------------------------------------------------------------

def embed(dataset: Dataset, config: EmbeddingConfig, wave: int | None = None,
          init: np.ndarray | None = None) -> Embedding:
    """Build the EDI matrix for the requested mode and project it."""
    matrix, keys = build_matrix(dataset, wave, standardize=config.standardize)
    if config.method == "tsne":
        emb = tsne(matrix, config, keys=keys, init=init)
    elif config.method == "umap":
        emb = umap(matrix, config, keys=keys, init=init)
    else:
        emb = pca(matrix, keys=keys)
    return replace(emb, mode=mode_label(wave))


def _as_keys(keys, n: int) -> tuple[tuple[str, int | None], ...]:
    if keys is None:
        return tuple((str(i), None) for i in range(n))
    if len(keys) != n:
        raise RangeViolation("keys", f"{len(keys)} keys for {n} rows")
    return tuple((str(k[0]), k[1]) for k in keys)


def write_embedding_csv(embedding: Embedding, path) -> None:
    from .io import _num, _writer

    with _writer(path) as (fh, writer):
        writer.writerow(["key", "wave", "x", "y"])
        for (key, wave), (px, py) in zip(embedding.source_keys, embedding.points):
            writer.writerow([key, "" if wave is None else wave, _num(px), _num(py)])


def write_trace_csv(embedding: Embedding, path) -> None:
    from .io import _num, _writer

    with _writer(path) as (fh, writer):
        writer.writerow(["iteration", "objective"])
        for iteration, objective in embedding.objective_trace:
            writer.writerow([iteration, _num(objective)])
