import numpy as np
import pytest

from marketnet import kernels
from marketnet.kernels import available_backends, load_backend

from _oracles import garch_loglik_loop

BACKENDS = available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return load_backend(request.param)


def test_backend_selection():
    assert "python" in BACKENDS
    assert kernels.BACKEND in ("cython", "python")
    with pytest.raises(ValueError):
        load_backend("fortran")


def test_lasso_kernel_solves_ols_at_zero_penalty(backend):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((300, 6))
    y = X @ np.array([1.0, -0.5, 0, 0, 0.3, 0]) + 0.1 * rng.standard_normal(300)
    G, c = X.T @ X / 300, X.T @ y / 300
    beta = np.zeros(6)
    sweeps, change, ok = backend.lasso_cd_gram(G, c, 0.0, beta, 1e-12, 10_000)
    assert ok and change <= 1e-12
    np.testing.assert_allclose(beta, np.linalg.solve(G, c), atol=1e-9)


def test_lasso_kernel_zero_above_lambda_max(backend):
    rng = np.random.default_rng(1)
    X = rng.standard_normal((100, 5))
    y = rng.standard_normal(100)
    G, c = X.T @ X / 100, X.T @ y / 100
    beta = np.zeros(5)
    backend.lasso_cd_gram(G, c, float(np.abs(c).max()) * 1.01, beta, 1e-10, 100)
    assert np.all(beta == 0)


def test_lasso_kernel_reports_non_convergence(backend):
    rng = np.random.default_rng(2)
    X = rng.standard_normal((50, 10))
    X[:, 1] = X[:, 0] + 1e-3 * rng.standard_normal(50)
    y = X[:, 0] + rng.standard_normal(50)
    G, c = X.T @ X / 50, X.T @ y / 50
    _, _, ok = backend.lasso_cd_gram(G, c, 1e-6, np.zeros(10), 1e-14, 2)
    assert not ok


def test_jacobi_kernel_matches_lapack(backend):
    rng = np.random.default_rng(3)
    A = rng.standard_normal((12, 12))
    A = A + A.T
    w, V, off, sweeps = backend.jacobi_eigh(A.copy(), 1e-12, 100)
    assert off <= 1e-12
    np.testing.assert_allclose(np.sort(w), np.linalg.eigvalsh(A), atol=1e-10)
    np.testing.assert_allclose((V * w) @ V.T, A, atol=1e-10)
    np.testing.assert_allclose(V.T @ V, np.eye(12), atol=1e-10)


def test_garch_kernel_matches_plain_loop(backend):
    rng = np.random.default_rng(4)
    y = 0.01 * rng.standard_normal(300)
    theta = np.array([1e-4, 0.3, -0.2, 2e-5, 0.1, 0.8])
    h0 = float(np.var(y))
    ll, g, e, h = backend.garch_loglik(y, theta, h0, True)
    assert ll == pytest.approx(garch_loglik_loop(y, theta, h0), rel=1e-12)
    assert g.shape == (6,)
    assert e.shape == h.shape == (300,)


def test_garch_kernel_nonpositive_variance_is_minus_inf(backend):
    y = np.linspace(-1, 1, 60)
    ll, *_ = backend.garch_loglik(y, np.array([0, 0, 0, -1.0, 0.0, 0.0]), 0.1, False)
    assert ll == -np.inf


def test_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("compiled kernels not built")
    cy, py = load_backend("cython"), load_backend("python")
    rng = np.random.default_rng(5)

    X = rng.standard_normal((200, 15))
    y = X[:, :3].sum(1) + rng.standard_normal(200)
    G, c = X.T @ X / 200, X.T @ y / 200
    b1, b2 = np.zeros(15), np.zeros(15)
    cy.lasso_cd_gram(G, c, 0.05, b1, 1e-10, 1000)
    py.lasso_cd_gram(G, c, 0.05, b2, 1e-10, 1000)
    np.testing.assert_allclose(b1, b2, atol=1e-12)

    A = rng.standard_normal((10, 10))
    A = A + A.T
    np.testing.assert_allclose(np.sort(cy.jacobi_eigh(A.copy(), 1e-12, 100)[0]),
                               np.sort(py.jacobi_eigh(A.copy(), 1e-12, 100)[0]), atol=1e-11)

    yy = 0.02 * rng.standard_normal(500)
    th = np.array([0.0, 0.1, 0.05, 1e-5, 0.07, 0.9])
    l1, g1, *_ = cy.garch_loglik(yy, th, float(yy.var()), True)
    l2, g2, *_ = py.garch_loglik(yy, th, float(yy.var()), True)
    assert l1 == pytest.approx(l2, rel=1e-12)
    np.testing.assert_allclose(g1, g2, rtol=1e-9)

    Z = rng.standard_normal((300, 4))
    Qbar = np.cov(Z, rowvar=False, bias=True)
    np.testing.assert_allclose(cy.dcc_correlations(Z, Qbar, 0.05, 0.9),
                               py.dcc_correlations(Z, Qbar, 0.05, 0.9), atol=1e-12)
    assert cy.dcc_loglik(Z, Qbar, 0.05, 0.9) == pytest.approx(py.dcc_loglik(Z, Qbar, 0.05, 0.9), rel=1e-11)


def test_dcc_kernel_first_correlation_is_qbar(backend):
    rng = np.random.default_rng(6)
    Z = rng.standard_normal((50, 3))
    Qbar = np.cov(Z, rowvar=False, bias=True)
    R = backend.dcc_correlations(Z, Qbar, 0.05, 0.9)
    d = np.sqrt(np.diag(Qbar))
    np.testing.assert_allclose(R[0], Qbar / np.outer(d, d), atol=1e-12)
