"""Hopkins clustering-tendency statistic with a null-distribution test.

H compares nearest-neighbor distances of uniform probe points against
those of sampled data points: H near 0.5 means the cloud is spatially
random, H above 0.5 indicates sub-clustering, H below 0.5 regular
spacing.  H_av averages the statistic over seeded repeats and is tested
against the Beta(m, m) null of complete spatial randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateCloud, RangeViolation, TooFewPoints


@dataclass(frozen=True)
class HopkinsConfig:
    sample_fraction: float = 0.3
    min_sample: int = 3
    repeats: int = 100
    seed: int = 0
    exponent: str = "d"          # "d": distances to the d-th power; "one": raw

    def __post_init__(self):
        if not 0.0 < self.sample_fraction <= 1.0:
            raise RangeViolation("sample_fraction", f"{self.sample_fraction} outside (0, 1]")
        if self.min_sample < 1:
            raise RangeViolation("min_sample", f"{self.min_sample} below 1")
        if self.repeats < 1:
            raise RangeViolation("repeats", f"{self.repeats} below 1")
        if self.exponent not in ("d", "one"):
            raise RangeViolation("exponent", f"unknown exponent {self.exponent!r}")

    def sample_size(self, n: int) -> int:
        m = max(self.min_sample, round(self.sample_fraction * n))
        if m > n:
            raise TooFewPoints(f"derived sample size {m} exceeds n={n}")
        return m


@dataclass(frozen=True)
class ClusterTendency:
    """Hopkins repeats for one scope (a cluster or the full point set)."""

    h_values: tuple[float, ...]
    h_av: float | None
    p_value: float | None
    m: int
    n: int
    skipped: bool = False


@dataclass(frozen=True)
class HopkinsReport:
    per_cluster: dict[int, ClusterTendency] = field(default_factory=dict)
    overall: ClusterTendency | None = None
    config: HopkinsConfig = field(default_factory=HopkinsConfig)

    def mean_cluster_h(self) -> float | None:
        """Mean of per-cluster H_av over the clusters that were not skipped."""
        values = [t.h_av for t in self.per_cluster.values() if not t.skipped]
        if not values:
            return None
        return float(np.mean(values))


def _prepared(points: np.ndarray) -> np.ndarray:
    """Drop dimensions with a degenerate bounding box."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise RangeViolation("points", "expected an n x d matrix")
    spans = pts.max(axis=0) - pts.min(axis=0)
    keep = spans > 0.0
    if not keep.any():
        raise DegenerateCloud("all points identical")
    return pts[:, keep]


def hopkins_once(points, config: HopkinsConfig, repeat_seed: int) -> float:
    """One Hopkins draw: H = sum(u^e) / (sum(u^e) + sum(w^e)).

    u are nearest-neighbor distances from uniform probes (drawn in the
    data bounding box) to the data; w are nearest-neighbor distances from
    sampled data points to the rest of the data.
    """
    pts = _prepared(points)
    n, d = pts.shape
    if n < 4:
        raise TooFewPoints(f"Hopkins needs >= 4 points, got {n}")
    m = config.sample_size(n)
    rng = np.random.default_rng(repeat_seed)

    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    uniform = rng.uniform(lo, hi, size=(m, d))
    chosen = rng.choice(n, size=m, replace=False)

    u = cdist(uniform, pts).min(axis=1)
    w_all = cdist(pts[chosen], pts)
    w_all[np.arange(m), chosen] = np.inf     # exclude self-distance
    w = w_all.min(axis=1)

    return hopkins_statistic(u, w, d if config.exponent == "d" else 1)


def hopkins_statistic(u, w, exponent_power: int) -> float:
    """The ratio sum(u^e) / (sum(u^e) + sum(w^e)); 0.5 when u and w match."""
    u_sum = float((np.asarray(u) ** exponent_power).sum())
    w_sum = float((np.asarray(w) ** exponent_power).sum())
    if u_sum + w_sum == 0.0:
        raise DegenerateCloud("all nearest-neighbor distances zero")
    return u_sum / (u_sum + w_sum)


def hopkins_average(points, config: HopkinsConfig = HopkinsConfig()) -> tuple[float, float]:
    """H_av over seeded repeats and its two-sided p-value.

    Under complete spatial randomness a single H follows Beta(m, m); the
    mean of `repeats` independent draws is tested with a normal
    approximation using Var(Beta(m, m)) / repeats.
    """
    tendency = _tendency(points, config)
    return tendency.h_av, tendency.p_value


def _tendency(points, config: HopkinsConfig) -> ClusterTendency:
    pts = np.asarray(points, dtype=float)
    values = [hopkins_once(pts, config, config.seed + i) for i in range(config.repeats)]
    m = config.sample_size(len(pts))
    h_av = float(np.mean(values))
    # Var(Beta(m, m)) = 1 / (4 (2m + 1))
    se = math.sqrt(1.0 / (4.0 * (2.0 * m + 1.0)) / config.repeats)
    z = (h_av - 0.5) / se
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return ClusterTendency(h_values=tuple(values), h_av=h_av, p_value=float(p),
                           m=m, n=len(pts))


def hopkins_per_cluster(points, labels, config: HopkinsConfig = HopkinsConfig()) -> HopkinsReport:
    """Per-cluster H_av / p plus the overall point set.

    Clusters with fewer than 4 points cannot support the statistic and are
    reported as skipped rather than raising.
    """
    pts = np.asarray(points, dtype=float)
    lab = np.asarray(labels)
    per_cluster: dict[int, ClusterTendency] = {}
    for cluster in sorted(set(int(v) for v in lab)):
        member = pts[lab == cluster]
        if len(member) < 4:
            per_cluster[cluster] = ClusterTendency(
                h_values=(), h_av=None, p_value=None, m=0, n=len(member), skipped=True)
            continue
        try:
            per_cluster[cluster] = _tendency(member, config)
        except DegenerateCloud:
            per_cluster[cluster] = ClusterTendency(
                h_values=(), h_av=None, p_value=None, m=0, n=len(member), skipped=True)
    overall = _tendency(pts, config)
    return HopkinsReport(per_cluster=per_cluster, overall=overall, config=config)


def write_hopkins_csv(report: HopkinsReport, path) -> None:
    from .io import _num, _writer

    with _writer(path) as (fh, writer):
        writer.writerow(["scope", "label", "m", "repeats", "H_av", "p_value", "skipped"])
        for label, t in sorted(report.per_cluster.items()):
            writer.writerow([
                "cluster", label, t.m, len(t.h_values),
                "" if t.h_av is None else _num(t.h_av),
                "" if t.p_value is None else _num(t.p_value),
                "true" if t.skipped else "false",
            ])
        if report.overall is not None:
            t = report.overall
            writer.writerow(["overall", "", t.m, len(t.h_values),
                             "" if t.h_av is None else _num(t.h_av),
                             "" if t.p_value is None else _num(t.p_value),
                             "true" if t.skipped else "false"])
