import numpy as np
import pytest

from rnn_sysid.linalg import (DimensionError, fit_loglog_slope, frob,
                              haar_orthogonal, matrix_power_opnorm,
                              operator_norm, spectral_radius)


def test_spectral_radius_diagonal():
    M = np.diag([0.3, -0.7, 0.1])
    assert spectral_radius(M) == pytest.approx(0.7)


def test_spectral_radius_rejects_rectangular():
    with pytest.raises(DimensionError):
        spectral_radius(np.zeros((2, 3)))


def test_operator_norm_matches_svd():
    rng = np.random.default_rng(0)
    for shape in [(5, 5), (8, 3), (3, 8)]:
        M = rng.normal(size=shape)
        sigma = np.linalg.svd(M, compute_uv=False)[0]
        assert operator_norm(M) == pytest.approx(sigma, rel=1e-9)


def test_operator_norm_zero_matrix():
    assert operator_norm(np.zeros((4, 4))) == 0.0


def test_matrix_power_opnorm_vs_dense_power():
    rng = np.random.default_rng(1)
    m = 60
    W = rng.normal(0.0, 1.0 / np.sqrt(m), size=(m, m))
    for k in (1, 2, 5, 9):
        exact = np.linalg.svd(np.linalg.matrix_power(0.9 * W, k),
                              compute_uv=False)[0]
        est = matrix_power_opnorm(W, k, scale=0.9, iters=20)
        assert est == pytest.approx(exact, rel=1e-6)


def test_matrix_power_opnorm_k_zero_is_identity_norm():
    W = np.random.default_rng(2).normal(size=(7, 7))
    assert matrix_power_opnorm(W, 0) == 1.0


def test_haar_orthogonal_is_orthogonal():
    Q = haar_orthogonal(12, np.random.default_rng(3))
    np.testing.assert_allclose(Q.T @ Q, np.eye(12), atol=1e-12)


def test_frob():
    assert frob(np.array([[3.0, 4.0]])) == pytest.approx(5.0)


def test_fit_loglog_slope_recovers_power_law():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    y = 3.0 * x**-0.5
    assert fit_loglog_slope(x, y) == pytest.approx(-0.5, abs=1e-12)


def test_fit_loglog_slope_rejects_nonpositive():
    with pytest.raises(ValueError):
        fit_loglog_slope([1.0, 2.0], [0.0, 1.0])
