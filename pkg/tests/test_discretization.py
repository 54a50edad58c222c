import numpy as np
import pytest

from spa_inattention.discretization import build_grid, discretize_ar1, interp_weights, snap_down
from spa_inattention.exceptions import DomainError


def test_iid_two_nodes():
    ch = discretize_ar1(0.0, 1.0, 2)
    np.testing.assert_allclose(ch.transition, 0.5, atol=1e-15)


def _stationary_variance(ch):
    vals, vecs = np.linalg.eig(ch.transition.T)
    pi = np.real(vecs[:, np.argmin(np.abs(vals - 1))])
    pi = pi / pi.sum()
    mean = pi @ ch.nodes
    return pi @ (ch.nodes - mean) ** 2


def test_stationary_variance_example():
    ch = discretize_ar1(0.9, 0.1, 5)
    assert _stationary_variance(ch) == pytest.approx(0.01 / 0.19, abs=1e-10)


@pytest.mark.parametrize("rho,sigma,n", [(0.0, 0.2, 3), (0.5, 0.3, 4), (0.95, 0.12, 5), (0.99, 0.05, 9)])
def test_stationary_variance_matches_ar1(rho, sigma, n):
    ch = discretize_ar1(rho, sigma, n)
    assert _stationary_variance(ch) == pytest.approx(sigma**2 / (1 - rho**2), abs=1e-10)
    np.testing.assert_allclose(ch.transition.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(ch.transition >= 0)
    assert ch.initial.sum() == pytest.approx(1.0, abs=1e-12)


def test_chain_rejects_bad_args():
    with pytest.raises(ValueError):
        discretize_ar1(1.0, 0.1, 5)
    with pytest.raises(ValueError):
        discretize_ar1(0.5, 0.1, 1)


def test_build_grid_examples():
    np.testing.assert_array_equal(build_grid(0, 1, 2).points, [0, 1])
    np.testing.assert_allclose(build_grid(0, 100, 5, 1).points, [0, 25, 50, 75, 100], atol=1e-12)
    np.testing.assert_allclose(build_grid(0, 100, 3, 2).points, [0, 25, 100], atol=1e-12)
    with pytest.raises(ValueError):
        build_grid(1, 1, 3)


def test_grid_curvature_concentrates_low():
    g = build_grid(0, 1000, 10, 2.5)
    assert np.all(np.diff(np.diff(g.points)) > 0)
    np.testing.assert_array_equal(g.points, build_grid(0, 1000, 10, 2.5).points)


def test_snap_down_examples():
    g = build_grid(0, 50, 3)
    assert snap_down(25.0, g) == 1
    assert snap_down(30.0, g) == 1
    assert snap_down(50.0, g) == 2
    assert snap_down(1e9, g) == 2
    with pytest.raises(DomainError):
        snap_down(-1.0, g)


def test_interp_weights_reproduce_values():
    pts = build_grid(0, 100, 6, 2).points
    x = np.array([0.0, 3.3, 50.0, 99.0, 100.0])
    lo, w = interp_weights(x, pts)
    np.testing.assert_allclose(pts[lo] * (1 - w) + pts[lo + 1] * w, x, rtol=1e-14, atol=1e-12)
