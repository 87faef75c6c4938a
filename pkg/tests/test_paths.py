import math

import numpy as np
import pytest

from losspaths.landscape import W1, W2, GaussianMixture2D, ScalarLandscape
from losspaths.paths import (FourierPath, PathLossConfig, barrier_survey,
                             nn_path_config, optimize_path, path_loss,
                             path_loss_grad, sample_pairs, sin_table,
                             synthetic_path_config)


class FlatLandscape(ScalarLandscape):
    """Constant zero field; isolates the arc-length penalty."""

    def __init__(self, dim):
        self.dim = dim

    def value(self, point):
        return 0.0

    def gradient(self, point):
        return np.zeros(self.dim)


class SlopeWithCliff(ScalarLandscape):
    """f(x) = x, undefined left of the cliff; provokes non-finite values."""

    dim = 1

    def __init__(self, cliff=-0.1):
        self.cliff = cliff

    def value(self, point):
        x = float(point[0])
        return math.nan if x < self.cliff else x

    def gradient(self, point):
        return np.ones(1)


# ---------------------------------------------------------------------------
# path geometry
# ---------------------------------------------------------------------------

def test_endpoints_are_fixed_for_any_coefficients():
    rng = np.random.default_rng(2)
    wi, wj = rng.standard_normal(5), rng.standard_normal(5)
    path = FourierPath(wi, wj, n_fourier=4, n_points=9,
                       coefficients=rng.standard_normal((4, 5)))
    np.testing.assert_array_equal(path.path_point(0.0), wj)
    np.testing.assert_array_equal(path.path_point(1.0), wi)
    pts = path.points()
    np.testing.assert_array_equal(pts[0], wj)
    np.testing.assert_array_equal(pts[-1], wi)


def test_first_harmonic_shifts_the_midpoint_by_its_coefficient():
    wi = np.array([1.0, 0.0])
    wj = np.array([0.0, 1.0])
    e = np.array([0.25, -0.5])
    path = FourierPath(wi, wj, n_fourier=1, n_points=5, coefficients=e[None, :])
    np.testing.assert_allclose(path.path_point(0.5), 0.5 * (wi + wj) + e,
                               rtol=1e-14)


def test_grid_points_match_single_point_evaluation():
    rng = np.random.default_rng(6)
    path = FourierPath(rng.standard_normal(3), rng.standard_normal(3),
                       n_fourier=3, n_points=11,
                       coefficients=rng.standard_normal((3, 3)))
    pts = path.points()
    for t, p in zip(path.grid, pts):
        np.testing.assert_allclose(p, path.path_point(t), atol=1e-12)


def test_path_point_rejects_out_of_range_t():
    path = FourierPath(np.zeros(2), np.ones(2))
    with pytest.raises(ValueError):
        path.path_point(1.5)
    with pytest.raises(ValueError):
        path.path_point(-0.01)


def test_zero_coefficients_give_the_straight_line():
    wi, wj = np.array([2.0, 0.0]), np.array([0.0, 2.0])
    m = 21
    path = FourierPath(wi, wj, n_fourier=5, n_points=m)
    pts = path.points()
    expect = path.grid[:, None] * wi + (1 - path.grid)[:, None] * wj
    np.testing.assert_allclose(pts, expect, atol=1e-14)
    report = path_loss(path, FlatLandscape(2), lam=1.0)
    # straight-line arc penalty collapses to |wi - wj|^2 / (M - 1)
    assert report.arc_penalty == pytest.approx(8.0 / (m - 1), rel=1e-12)
    assert report.total_loss == pytest.approx(8.0 / (m - 1), rel=1e-12)


def test_sin_table_shape_and_values():
    grid = np.linspace(0.0, 1.0, 5)
    table = sin_table(2, grid)
    assert table.shape == (2, 5)
    np.testing.assert_allclose(table[0], np.sin(np.pi * grid), atol=1e-15)
    np.testing.assert_allclose(table[1], np.sin(2 * np.pi * grid), atol=1e-14)


# ---------------------------------------------------------------------------
# path loss and its gradient
# ---------------------------------------------------------------------------

def test_straight_line_height_between_published_minima():
    path = FourierPath(W1, W2, n_fourier=1, n_points=100)
    report = path_loss(path, GaussianMixture2D(), lam=0.0)
    assert report.height == pytest.approx(1.102, abs=0.005)
    assert report.total_loss == pytest.approx(float(report.point_losses.sum()))


def test_lambda_zero_total_is_plain_sum():
    rng = np.random.default_rng(4)
    path = FourierPath(W1, W2, n_fourier=3, n_points=30,
                       coefficients=0.1 * rng.standard_normal((3, 2)))
    report = path_loss(path, GaussianMixture2D(), lam=0.0)
    assert report.total_loss == pytest.approx(float(report.point_losses.sum()),
                                              rel=1e-14)
    scaled = path_loss(path, GaussianMixture2D(), lam=2.5)
    assert scaled.total_loss == pytest.approx(
        report.total_loss + 2.5 * scaled.arc_penalty, rel=1e-12)


def test_path_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    land = GaussianMixture2D()
    coeffs = 0.2 * rng.standard_normal((3, 2))
    lam = 0.7

    def total(b):
        p = FourierPath(W1, W2, n_fourier=3, n_points=20, coefficients=b)
        return path_loss(p, land, lam).total_loss

    path = FourierPath(W1, W2, n_fourier=3, n_points=20, coefficients=coeffs)
    grad = path_loss_grad(path, land, lam)
    assert grad.shape == (3, 2)
    h = 1e-6
    for n in range(3):
        for d in range(2):
            bp, bm = coeffs.copy(), coeffs.copy()
            bp[n, d] += h
            bm[n, d] -= h
            fd = (total(bp) - total(bm)) / (2 * h)
            assert abs(grad[n, d] - fd) < 1e-5 * max(1.0, abs(fd))


def test_penalty_gradient_closed_form_on_flat_field():
    # on a constant field only the arc term is left; for one harmonic the
    # straight-line part telescopes away and d/db = 2 lam sum(dsin^2) b
    wi, wj = np.array([3.0, -1.0]), np.array([0.0, 0.5])
    b = np.array([[0.4, -0.2]])
    path = FourierPath(wi, wj, n_fourier=1, n_points=12, coefficients=b)
    lam = 1.3
    dsin = np.diff(np.sin(np.pi * path.grid))
    expect = 2.0 * lam * float(np.sum(dsin ** 2)) * b
    np.testing.assert_allclose(path_loss_grad(path, FlatLandscape(2), lam),
                               expect, rtol=1e-12)
    np.testing.assert_array_equal(
        path_loss_grad(path, FlatLandscape(2), 0.0), np.zeros((1, 2)))


def test_path_loss_reports_nonfinite_point():
    path = FourierPath(np.array([1.0]), np.array([0.0]), n_fourier=1,
                       n_points=5)
    with pytest.raises(ValueError, match="t = "):
        path_loss(path, SlopeWithCliff(cliff=0.6), lam=0.0)


def test_dimension_mismatch_is_rejected():
    path = FourierPath(np.zeros(3), np.ones(3))
    with pytest.raises(ValueError):
        path_loss(path, GaussianMixture2D(), lam=0.0)
    with pytest.raises(ValueError):
        path_loss_grad(path, GaussianMixture2D(), lam=0.0)


# ---------------------------------------------------------------------------
# path optimization
# ---------------------------------------------------------------------------

def test_optimized_path_clears_the_ridge_on_the_synthetic_surface():
    land = GaussianMixture2D()
    straight = path_loss(FourierPath(W1, W2, n_fourier=1, n_points=100),
                         land, lam=0.0)
    path, report, trace = optimize_path(W1, W2, land,
                                        synthetic_path_config(100.0))
    assert report.height <= straight.height
    assert report.height < 0.70
    assert len(trace["height"]) == 201
    assert trace["height"][report.iteration] == report.height
    assert report.height == min(trace["height"])
    # the returned path reproduces the reported profile
    recheck = path_loss(path, land, lam=report.lam)
    np.testing.assert_allclose(recheck.point_losses, report.point_losses,
                               atol=1e-12)


def test_best_iterate_never_loses_to_the_straight_line():
    land = GaussianMixture2D()
    for lam in (0.0, 10.0, 1000.0):
        _, report, trace = optimize_path(
            W1, W2, land, synthetic_path_config(lam, iterations=40))
        assert report.height <= trace["height"][0]


def test_degenerate_identical_endpoints():
    land = GaussianMixture2D()
    cfg = synthetic_path_config(10.0, iterations=20)
    _, report, _ = optimize_path(W1, W1, land, cfg)
    assert report.height <= land.value(W1) + 1e-12


def test_optimization_aborts_on_nonfinite_iterate():
    cfg = PathLossConfig(lam=0.0, n_fourier=2, n_points=10, iterations=50,
                         learning_rate=0.05)
    _, report, trace = optimize_path(np.zeros(1), np.zeros(1),
                                     SlopeWithCliff(cliff=-0.1), cfg)
    assert trace.get("aborted") is True
    assert len(trace["height"]) < 51
    assert np.isfinite(report.height)


def test_nonfinite_straight_line_raises():
    cfg = PathLossConfig(lam=0.0, n_fourier=1, n_points=5, iterations=3)
    with pytest.raises(RuntimeError):
        optimize_path(np.array([1.0]), np.array([0.0]),
                      SlopeWithCliff(cliff=0.6), cfg)


def test_config_factories_and_validation():
    synth = synthetic_path_config(100.0)
    assert (synth.n_points, synth.iterations) == (100, 200)
    nn = nn_path_config()
    assert (nn.n_points, nn.iterations) == (50, 100)
    assert nn.lam == 1e-4
    with pytest.raises(ValueError):
        PathLossConfig(lam=-1.0)
    with pytest.raises(ValueError):
        PathLossConfig(n_points=1)


# ---------------------------------------------------------------------------
# pair surveys
# ---------------------------------------------------------------------------

def test_sample_pairs_distinct_and_deterministic():
    a = sample_pairs(8, 10, seed=5)
    b = sample_pairs(8, 10, seed=5)
    assert a == b
    assert len(a) == 10
    assert len(set(a)) == 10
    assert all(i < j for i, j in a)
    assert sample_pairs(8, 10, seed=6) != a
    # cannot ask for more pairs than exist
    assert len(sample_pairs(3, 10, seed=0)) == 3
    with pytest.raises(ValueError):
        sample_pairs(1, 1, seed=0)


def test_barrier_survey_reports_one_path_per_pair():
    rng = np.random.default_rng(14)
    vectors = [rng.uniform(-0.6, 0.6, size=2) for _ in range(4)]
    land = GaussianMixture2D()
    cfg = synthetic_path_config(10.0, iterations=15)
    reports = barrier_survey(vectors, land, n_pairs=3, seed=2, config=cfg)
    assert len(reports) == 3
    pairs = sample_pairs(4, 3, seed=2)
    assert [r.pair for r in reports] == pairs
    for r, (i, j) in zip(reports, pairs):
        # endpoints sit on the evaluation grid, so H bounds their losses
        assert r.height >= land.value(vectors[i]) - 1e-12
        assert r.height >= land.value(vectors[j]) - 1e-12
        assert len(r.point_losses) == cfg.n_points
    again = barrier_survey(vectors, land, n_pairs=3, seed=2, config=cfg)
    assert [r.height for r in again] == [r.height for r in reports]
