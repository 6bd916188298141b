"""Group-difference screening of census variables and linear correlation.

Variables are screened across cluster labels with one-way ANOVA when the
parametric assumptions (per-group normality, homogeneity of variances)
hold at the configured level, falling back to the non-parametric
Kruskal-Wallis test otherwise.  All test statistics are computed here;
scipy supplies only the distribution functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import (
    AllValuesTied,
    ConstantInput,
    DegenerateInput,
    LabelWithoutProfile,
    RangeViolation,
    SampleTooSmall,
)
from .model import CensusProfile, CensusVariable

NORMALITY_TESTS = ("shapiro_wilk", "anderson_darling")
HOMOGENEITY_TESTS = ("brown_forsythe", "bartlett")
CORRECTIONS = ("none", "benjamini_hochberg")


@dataclass(frozen=True)
class ScreeningConfig:
    alpha: float = 0.05
    normality_test: str = "shapiro_wilk"
    homogeneity_test: str = "brown_forsythe"
    correction: str = "none"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise RangeViolation("alpha", f"{self.alpha} not strictly between 0 and 1")
        if self.normality_test not in NORMALITY_TESTS:
            raise RangeViolation("normality_test", f"unknown test {self.normality_test!r}")
        if self.homogeneity_test not in HOMOGENEITY_TESTS:
            raise RangeViolation("homogeneity_test", f"unknown test {self.homogeneity_test!r}")
        if self.correction not in CORRECTIONS:
            raise RangeViolation("correction", f"unknown correction {self.correction!r}")


@dataclass(frozen=True)
class AssumptionFlags:
    """Pass/fail per group for normality (None = untestable), and homogeneity."""

    normality: tuple[bool | None, ...] = ()
    homogeneity: bool | None = None


@dataclass(frozen=True)
class VariableTestResult:
    var_id: str
    test_used: str                      # anova | kruskal_wallis | skipped
    statistic: float | None
    p_value: float | None
    group_sizes: tuple[int, ...]
    assumption_flags: AssumptionFlags = field(default_factory=AssumptionFlags)
    significant: bool = False
    skip_reason: str | None = None
    label: str = ""
    category: str = ""


def _as_groups(groups) -> list[np.ndarray]:
    return [np.asarray(g, dtype=float) for g in groups]


def anova_oneway(groups) -> tuple[float, float, int, int]:
    """Classical one-way ANOVA: F = MSB/MSW, p from the F survival function."""
    gs = _as_groups(groups)
    if len(gs) < 2 or any(len(g) < 2 for g in gs):
        raise DegenerateInput("ANOVA needs >= 2 groups with >= 2 values each")
    n_total = sum(len(g) for g in gs)
    grand = sum(g.sum() for g in gs) / n_total
    ss_between = sum(len(g) * (g.mean() - grand) ** 2 for g in gs)
    ss_within = sum(((g - g.mean()) ** 2).sum() for g in gs)
    df_between = len(gs) - 1
    df_within = n_total - len(gs)
    if ss_within == 0.0 and ss_between == 0.0:
        raise DegenerateInput("zero within- and between-group variance")
    if ss_within == 0.0:
        return math.inf, 0.0, df_between, df_within
    f_stat = (ss_between / df_between) / (ss_within / df_within)
    p = float(special.fdtrc(df_between, df_within, f_stat))
    return float(f_stat), p, df_between, df_within


def kruskal_wallis(groups) -> tuple[float, float]:
    """Rank-based H with tie correction; p from chi-square with k-1 df."""
    gs = _as_groups(groups)
    if len(gs) < 2 or any(len(g) < 1 for g in gs):
        raise DegenerateInput("Kruskal-Wallis needs >= 2 nonempty groups")
    pooled = np.concatenate(gs)
    n_total = len(pooled)
    if n_total < 3:
        raise DegenerateInput("needs at least 3 values in total")
    ranks = _rank_with_ties(pooled)
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float((counts.astype(float) ** 3 - counts).sum())
    correction = 1.0 - tie_term / (n_total**3 - n_total)
    if correction == 0.0:
        raise AllValuesTied("every pooled value is identical")
    offset = 0
    h = 0.0
    for g in gs:
        r = ranks[offset:offset + len(g)]
        h += r.sum() ** 2 / len(g)
        offset += len(g)
    h = (12.0 / (n_total * (n_total + 1)) * h - 3.0 * (n_total + 1)) / correction
    p = float(special.chdtrc(len(gs) - 1, max(h, 0.0)))
    return float(h), p


def _rank_with_ties(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=float)
    ranks[order] = np.arange(1, len(values) + 1, dtype=float)
    # average ranks over tied values
    unique, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    sums = np.zeros(len(unique))
    np.add.at(sums, inverse, ranks)
    return sums[inverse] / counts[inverse]


def normality(sample, method: str = "shapiro_wilk") -> tuple[float, float]:
    """Univariate normality test; p is monotone in the statistic."""
    x = np.asarray(sample, dtype=float)
    if len(x) < 3:
        raise SampleTooSmall(len(x), 3)
    if np.ptp(x) == 0.0:
        raise DegenerateInput("all sample values identical")
    if method == "shapiro_wilk":
        return _shapiro_wilk(x)
    if method == "anderson_darling":
        return _anderson_darling(x)
    raise RangeViolation("normality_test", f"unknown test {method!r}")


def _shapiro_wilk(x: np.ndarray) -> tuple[float, float]:
    """Shapiro-Wilk W via Royston's AS R94 approximation (3 <= n <= 5000)."""
    n = len(x)
    if n > 5000:
        raise SampleTooSmall(n, 3)  # approximation not calibrated past 5000
    xs = np.sort(x)
    m = special.ndtri((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    ssq_m = float((m**2).sum())
    if n == 3:
        a = np.array([-math.sqrt(0.5), 0.0, math.sqrt(0.5)])
    else:
        u = 1.0 / math.sqrt(n)
        c = m / math.sqrt(ssq_m)
        a_n = (c[-1] + 0.221157 * u - 0.147981 * u**2 - 2.071190 * u**3
               + 4.434685 * u**4 - 2.706056 * u**5)
        a = np.empty(n)
        if n <= 5:
            phi = (ssq_m - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_n**2)
            a[1:-1] = m[1:-1] / math.sqrt(phi)
            a[-1] = a_n
            a[0] = -a_n
        else:
            a_n1 = (c[-2] + 0.042981 * u - 0.293762 * u**2 - 1.752461 * u**3
                    + 5.682633 * u**4 - 3.582633 * u**5)
            phi = (ssq_m - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (
                1.0 - 2.0 * a_n**2 - 2.0 * a_n1**2)
            a[2:-2] = m[2:-2] / math.sqrt(phi)
            a[-1], a[-2] = a_n, a_n1
            a[0], a[1] = -a_n, -a_n1
    w = float((a @ xs) ** 2 / ((xs - xs.mean()) ** 2).sum())
    w = min(w, 1.0)

    if n == 3:
        p = 6.0 / math.pi * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return w, float(min(max(p, 0.0), 1.0))
    if w == 1.0:
        return w, 1.0
    if n <= 11:
        gamma = -2.273 + 0.459 * n
        lw = -math.log(gamma - math.log(1.0 - w))
        mu = 0.5440 - 0.39978 * n + 0.025054 * n**2 - 0.0006714 * n**3
        sigma = math.exp(1.3822 - 0.77857 * n + 0.062767 * n**2 - 0.0020322 * n**3)
    else:
        ln_n = math.log(n)
        lw = math.log(1.0 - w)
        mu = -1.5861 - 0.31082 * ln_n - 0.083751 * ln_n**2 + 0.0038915 * ln_n**3
        sigma = math.exp(-0.4803 - 0.082676 * ln_n + 0.0030302 * ln_n**2)
    z = (lw - mu) / sigma
    p = 0.5 * math.erfc(z / math.sqrt(2.0))
    return w, float(min(max(p, 0.0), 1.0))


def _anderson_darling(x: np.ndarray) -> tuple[float, float]:
    """Anderson-Darling with both parameters estimated (case-3 critical values)."""
    n = len(x)
    xs = np.sort(x)
    s = xs.std(ddof=1)
    z = special.ndtr((xs - xs.mean()) / s)
    z = np.clip(z, 1e-300, 1.0 - 1e-16)
    i = np.arange(1, n + 1)
    a_sq = -n - ((2 * i - 1) * (np.log(z) + np.log1p(-z[::-1]))).sum() / n
    a_star = a_sq * (1.0 + 0.75 / n + 2.25 / n**2)
    if a_star >= 0.6:
        p = math.exp(1.2937 - 5.709 * a_star + 0.0186 * a_star**2)
    elif a_star > 0.34:
        p = math.exp(0.9177 - 4.279 * a_star - 1.38 * a_star**2)
    elif a_star > 0.2:
        p = 1.0 - math.exp(-8.318 + 42.796 * a_star - 59.938 * a_star**2)
    else:
        p = 1.0 - math.exp(-13.436 + 101.14 * a_star - 223.73 * a_star**2)
    return float(a_star), float(min(max(p, 0.0), 1.0))


def homogeneity(groups, method: str = "brown_forsythe") -> tuple[float, float]:
    """Equality-of-variances test across groups."""
    gs = _as_groups(groups)
    if len(gs) < 2 or any(len(g) < 2 for g in gs):
        raise DegenerateInput("homogeneity needs >= 2 groups with >= 2 values each")
    if method == "brown_forsythe":
        # median-centered Levene: ANOVA on absolute deviations from group medians
        z = [np.abs(g - np.median(g)) for g in gs]
        f_stat, p, _, _ = anova_oneway(z)
        return f_stat, p
    if method == "bartlett":
        variances = [g.var(ddof=1) for g in gs]
        if any(v == 0.0 for v in variances):
            raise DegenerateInput("a group has zero variance")
        k = len(gs)
        n_total = sum(len(g) for g in gs)
        pooled = sum((len(g) - 1) * v for g, v in zip(gs, variances)) / (n_total - k)
        t = (n_total - k) * math.log(pooled) - sum(
            (len(g) - 1) * math.log(v) for g, v in zip(gs, variances))
        c = 1.0 + (sum(1.0 / (len(g) - 1) for g in gs) - 1.0 / (n_total - k)) / (3.0 * (k - 1))
        stat = t / c
        return float(stat), float(special.chdtrc(k - 1, max(stat, 0.0)))
    raise RangeViolation("homogeneity_test", f"unknown test {method!r}")


def pearson(x, y) -> tuple[float, float]:
    """Sample Pearson correlation with Student-t p-value."""
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if len(xv) != len(yv):
        raise RangeViolation("length", "x and y lengths differ")
    n = len(xv)
    if n < 3:
        raise SampleTooSmall(n, 3)
    if np.ptp(xv) == 0.0 or np.ptp(yv) == 0.0:
        raise ConstantInput("constant input series")
    xc = xv - xv.mean()
    yc = yv - yv.mean()
    r = float((xc @ yc) / math.sqrt((xc @ xc) * (yc @ yc)))
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(special.stdtr(n - 2, -abs(t)))
    return r, p


def screen(profiles: list[CensusProfile],
           labels: dict[str, int],
           config: ScreeningConfig = ScreeningConfig(),
           catalog: list[CensusVariable] | None = None) -> list[VariableTestResult]:
    """Screen every census variable for differences across cluster labels.

    Groups are built per cluster with missing values excluded pairwise; a
    variable is skipped when any group has fewer than 2 usable values or
    the pooled values are degenerate.  Assumptions route each variable to
    ANOVA or Kruskal-Wallis; significance is marked after the configured
    multiple-testing correction.  Results sort by ascending p.
    """
    by_neighborhood = {p.neighborhood: p for p in profiles}
    for neighborhood in labels:
        if neighborhood not in by_neighborhood:
            raise LabelWithoutProfile(neighborhood)
    clusters = sorted(set(labels.values()))
    if catalog is not None:
        var_ids = [v.var_id for v in catalog]
        meta = {v.var_id: v for v in catalog}
    else:
        var_ids = sorted({v for p in profiles for v in p.values})
        meta = {}

    results: list[VariableTestResult] = []
    for var_id in var_ids:
        groups = []
        for cluster in clusters:
            values = [by_neighborhood[n].get(var_id)
                      for n in sorted(labels) if labels[n] == cluster]
            groups.append(np.array([v for v in values if v is not None], dtype=float))
        sizes = tuple(len(g) for g in groups)
        var = meta.get(var_id)
        base = dict(var_id=var_id, group_sizes=sizes,
                    label=var.label if var else "", category=var.category if var else "")

        if sum(sizes) == 0:
            results.append(VariableTestResult(
                test_used="skipped", statistic=None, p_value=None,
                skip_reason="missing_everywhere", **base))
            continue
        if any(s < 2 for s in sizes):
            results.append(VariableTestResult(
                test_used="skipped", statistic=None, p_value=None,
                skip_reason="group_too_small", **base))
            continue
        pooled = np.concatenate(groups)
        if np.ptp(pooled) == 0.0:
            results.append(VariableTestResult(
                test_used="skipped", statistic=None, p_value=None,
                skip_reason="degenerate_input", **base))
            continue

        normal_flags: list[bool | None] = []
        for g in groups:
            if len(g) < 3 or np.ptp(g) == 0.0:
                normal_flags.append(None)
            else:
                _, p_norm = normality(g, config.normality_test)
                normal_flags.append(p_norm >= config.alpha)
        try:
            _, p_hom = homogeneity(groups, config.homogeneity_test)
            homogeneous: bool | None = p_hom >= config.alpha
        except DegenerateInput:
            homogeneous = None

        flags = AssumptionFlags(normality=tuple(normal_flags), homogeneity=homogeneous)
        parametric = homogeneous is True and all(f is True for f in normal_flags)
        try:
            if parametric:
                stat, p, _, _ = anova_oneway(groups)
                test_used = "anova"
            else:
                stat, p = kruskal_wallis(groups)
                test_used = "kruskal_wallis"
        except (DegenerateInput, AllValuesTied) as err:
            results.append(VariableTestResult(
                test_used="skipped", statistic=None, p_value=None,
                assumption_flags=flags, skip_reason=err.code, **base))
            continue
        results.append(VariableTestResult(
            test_used=test_used, statistic=stat, p_value=p,
            assumption_flags=flags, **base))

    results = _mark_significance(results, config)
    results.sort(key=lambda r: (r.p_value is None, r.p_value if r.p_value is not None else 0.0, r.var_id))
    return results


def _mark_significance(results: list[VariableTestResult],
                       config: ScreeningConfig) -> list[VariableTestResult]:
    tested = [r for r in results if r.p_value is not None]
    if config.correction == "benjamini_hochberg" and tested:
        m = len(tested)
        ordered = sorted(tested, key=lambda r: r.p_value)
        threshold = 0.0
        for i, r in enumerate(ordered, start=1):
            if r.p_value <= i * config.alpha / m:
                threshold = r.p_value
        significant = {r.var_id for r in tested if r.p_value <= threshold} if threshold > 0 else set()
    else:
        significant = {r.var_id for r in tested if r.p_value < config.alpha}
    out = []
    for r in results:
        if r.var_id in significant:
            out.append(VariableTestResult(
                var_id=r.var_id, test_used=r.test_used, statistic=r.statistic,
                p_value=r.p_value, group_sizes=r.group_sizes,
                assumption_flags=r.assumption_flags, significant=True,
                skip_reason=r.skip_reason, label=r.label, category=r.category))
        else:
            out.append(r)
    return out


def write_screening_csv(results: list[VariableTestResult], path) -> None:
    from .io import _num, _writer

    with _writer(path) as (fh, writer):
        writer.writerow(["var_id", "label", "category", "test_used",
                         "statistic", "p_value", "significant", "flags"])
        for r in results:
            flag_bits = []
            for i, f in enumerate(r.assumption_flags.normality):
                flag_bits.append(f"norm{i}={_flag(f)}")
            flag_bits.append(f"hom={_flag(r.assumption_flags.homogeneity)}")
            if r.skip_reason:
                flag_bits.append(f"skip={r.skip_reason}")
            writer.writerow([
                r.var_id, r.label, r.category, r.test_used,
                "" if r.statistic is None else _num(r.statistic),
                "" if r.p_value is None else _num(r.p_value),
                "true" if r.significant else "false",
                ";".join(flag_bits),
            ])


def _flag(value: bool | None) -> str:
    return "na" if value is None else ("pass" if value else "fail")
