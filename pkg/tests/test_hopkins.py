import numpy as np
import pytest

from vulnscape.errors import DegenerateCloud, TooFewPoints
from vulnscape.hopkins import (
    ClusterTendency,
    HopkinsConfig,
    hopkins_average,
    hopkins_once,
    hopkins_per_cluster,
    hopkins_statistic,
)


def grid_10x10():
    gx, gy = np.meshgrid(np.arange(10.0), np.arange(10.0))
    return np.column_stack([gx.ravel(), gy.ravel()])


def two_tight_blobs(seed=0, n_per=100, sigma=0.01, gap=10.0):
    rng = np.random.default_rng(seed)
    return np.vstack([rng.normal(0.0, sigma, size=(n_per, 2)),
                      rng.normal(gap, sigma, size=(n_per, 2))])


def test_statistic_is_half_when_u_equals_w():
    u = np.array([0.3, 0.7, 1.1])
    assert hopkins_statistic(u, u, 2) == 0.5
    assert hopkins_statistic(u, u, 1) == 0.5


def test_statistic_all_zero_distances_degenerate():
    with pytest.raises(DegenerateCloud):
        hopkins_statistic(np.zeros(3), np.zeros(3), 1)


def test_hopkins_once_in_unit_interval():
    rng = np.random.default_rng(0)
    pts = rng.uniform(size=(50, 3))
    for repeat in range(5):
        h = hopkins_once(pts, HopkinsConfig(), repeat)
        assert 0.0 <= h <= 1.0


def test_hopkins_blobs_strongly_clustered():
    # Monte Carlo oracle regime: tight blobs push H toward 1
    h_av, p = hopkins_average(two_tight_blobs(), HopkinsConfig(seed=1))
    assert h_av > 0.8
    assert p < 0.01


def test_hopkins_grid_regular():
    h_av, p = hopkins_average(grid_10x10(), HopkinsConfig(seed=2))
    assert h_av < 0.45
    assert p < 0.01


def test_hopkins_uniform_near_half():
    pts = np.random.default_rng(22).uniform(size=(1000, 5))
    h_av, p = hopkins_average(pts, HopkinsConfig())
    assert 0.45 <= h_av <= 0.55


def test_hopkins_sample_size_rule():
    cfg = HopkinsConfig(sample_fraction=0.3, min_sample=3)
    assert cfg.sample_size(100) == 30
    assert cfg.sample_size(8) == 3        # max(3, round(2.4))
    with pytest.raises(TooFewPoints):
        HopkinsConfig(min_sample=50).sample_size(10)


def test_hopkins_too_few_points():
    with pytest.raises(TooFewPoints):
        hopkins_once(np.zeros((3, 2)) + np.arange(3)[:, None], HopkinsConfig(), 0)


def test_hopkins_identical_points_degenerate():
    with pytest.raises(DegenerateCloud):
        hopkins_once(np.ones((10, 2)), HopkinsConfig(), 0)


def test_hopkins_translation_and_scale_invariance_same_seed():
    pts = np.random.default_rng(3).uniform(size=(60, 2))
    cfg = HopkinsConfig(seed=9, repeats=20)
    base, _ = hopkins_average(pts, cfg)
    shifted, _ = hopkins_average(pts + 1000.0, cfg)
    scaled, _ = hopkins_average(pts * 37.0, cfg)
    assert base == pytest.approx(shifted, abs=1e-12)
    assert base == pytest.approx(scaled, abs=1e-12)


def test_hopkins_exponent_d_equals_one_on_1d_data():
    pts = np.random.default_rng(4).uniform(size=(40, 1))
    h_d = hopkins_once(pts, HopkinsConfig(exponent="d"), 5)
    h_one = hopkins_once(pts, HopkinsConfig(exponent="one"), 5)
    assert h_d == h_one


def test_hopkins_degenerate_dimension_dropped():
    rng = np.random.default_rng(5)
    pts = np.column_stack([rng.uniform(size=50), np.full(50, 3.0)])
    # behaves exactly like the 1-D cloud
    flat = pts[:, :1]
    assert hopkins_once(pts, HopkinsConfig(), 7) == hopkins_once(flat, HopkinsConfig(), 7)


def test_beta_null_mean_is_half():
    # the CSR null used for p-values is Beta(m, m): mean 0.5, and the
    # variance formula matches 1/(4(2m+1))
    rng = np.random.default_rng(6)
    m = 9
    draws = rng.beta(m, m, size=10_000)
    variance = 1.0 / (4.0 * (2 * m + 1))
    se = np.sqrt(variance / len(draws))
    assert abs(draws.mean() - 0.5) < 3.0 * se
    assert draws.var(ddof=1) == pytest.approx(variance, rel=0.1)


def test_csr_repeats_mean_near_half():
    # data-level calibration: fresh uniform clouds center near 0.5; the
    # bounding-box sampling window leaves a small known negative bias, so
    # the band is loose rather than 1/sqrt(N)-tight
    rng = np.random.default_rng(7)
    cfg = HopkinsConfig(sample_fraction=0.05, repeats=1)
    values = [hopkins_once(rng.uniform(size=(200, 2)), cfg, 30_000 + i)
              for i in range(2000)]
    assert abs(np.mean(values) - 0.5) < 0.01


def test_per_cluster_skips_small_clusters():
    pts = np.vstack([two_tight_blobs(7, n_per=20), [[50.0, 50.0], [51.0, 51.0], [52.0, 52.0]]])
    labels = np.array([0] * 20 + [1] * 20 + [2] * 3)
    report = hopkins_per_cluster(pts, labels, HopkinsConfig(seed=3))
    assert report.per_cluster[2].skipped
    assert not report.per_cluster[0].skipped
    assert not report.per_cluster[1].skipped
    assert report.overall is not None and report.overall.h_av is not None


def test_per_cluster_merge_moves_h_toward_half():
    # two adjacent regularly-spaced parts: each alone is regular (H < 0.5),
    # merged across the gap the pattern looks more random (H closer to 0.5)
    rng = np.random.default_rng(8)
    gx, gy = np.meshgrid(np.arange(5.0), np.arange(5.0))
    part_a = np.column_stack([gx.ravel(), gy.ravel()]) + rng.uniform(-0.1, 0.1, (25, 2))
    part_b = part_a + np.array([7.0, 0.0])
    merged = np.vstack([part_a, part_b])
    cfg = HopkinsConfig(seed=4)
    h_a, _ = hopkins_average(part_a, cfg)
    h_b, _ = hopkins_average(part_b, cfg)
    h_m, _ = hopkins_average(merged, cfg)
    assert abs(h_m - 0.5) < min(abs(h_a - 0.5), abs(h_b - 0.5))


def test_report_deterministic_for_seed():
    pts = np.random.default_rng(9).uniform(size=(40, 2))
    labels = np.array([0] * 20 + [1] * 20)
    cfg = HopkinsConfig(seed=11, repeats=25)
    a = hopkins_per_cluster(pts, labels, cfg)
    b = hopkins_per_cluster(pts, labels, cfg)
    assert a.per_cluster[0].h_values == b.per_cluster[0].h_values
    assert a.overall.h_av == b.overall.h_av


def test_mean_cluster_h_ignores_skipped():
    report_cluster = {
        0: ClusterTendency(h_values=(0.4,), h_av=0.4, p_value=0.5, m=3, n=10),
        1: ClusterTendency(h_values=(0.6,), h_av=0.6, p_value=0.5, m=3, n=10),
        2: ClusterTendency(h_values=(), h_av=None, p_value=None, m=0, n=2, skipped=True),
    }
    from vulnscape.hopkins import HopkinsReport
    report = HopkinsReport(per_cluster=report_cluster, overall=None)
    assert report.mean_cluster_h() == pytest.approx(0.5)
