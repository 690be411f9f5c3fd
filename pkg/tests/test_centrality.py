import numpy as np
import pytest

from marketnet import centrality as cen
from marketnet.errors import MarketNetError
from marketnet.ggm import PartialCorrNetwork

from _oracles import dense_leading, random_symmetric


def _net(P, year=None):
    P = np.asarray(P, dtype=float)
    return PartialCorrNetwork(P, [f"v{i}" for i in range(len(P))], year=year)


def test_degree_examples():
    P = np.array([[0, 0.3, -0.1], [0.3, 0, 0], [-0.1, 0, 0]])
    deg, absdeg = cen.degree_centrality(_net(P))
    assert deg[0] == pytest.approx(0.2) and absdeg[0] == pytest.approx(0.4)
    deg, absdeg = cen.degree_centrality(_net(np.zeros((3, 3))))
    assert np.all(deg == 0) and np.all(absdeg == 0)


def test_two_node_spectrum_and_centrality():
    spec = cen.full_spectrum(_net([[0, 0.4], [0.4, 0]]))
    np.testing.assert_allclose(spec.eigenvalues, [0.4, -0.4], atol=1e-14)
    f, degenerate = cen.eigencentrality(spec)
    np.testing.assert_allclose(f, [2 ** -0.5, 2 ** -0.5], atol=1e-12)
    # |l2| = |l1| for a bipartite pair, so the dominant modulus is not unique
    assert degenerate


def test_path_graph_spectrum():
    spec = cen.full_spectrum(_net([[0, 1, 0], [1, 0, 1], [0, 1, 0]]))
    # ordered by modulus, positive first among equal moduli
    np.testing.assert_allclose(spec.eigenvalues, [np.sqrt(2), -np.sqrt(2), 0], atol=1e-12)


def test_trace_identity_and_reconstruction():
    rng = np.random.default_rng(0)
    A = random_symmetric(rng, 8)
    spec = cen.full_spectrum(A)
    assert spec.eigenvalues.sum() == pytest.approx(np.trace(A), abs=1e-10)
    W = spec.eigenvectors
    np.testing.assert_allclose((W * spec.eigenvalues) @ W.T, A, atol=1e-9)
    assert np.all(np.diff(np.abs(spec.eigenvalues)) <= 1e-12)
    for k in range(8):
        assert np.linalg.norm(A @ W[:, k] - spec.eigenvalues[k] * W[:, k]) <= 1e-8


def test_star_graph_centrality():
    P = np.zeros((5, 5))
    P[0, 1:] = P[1:, 0] = 1.0
    f, _ = cen.eigencentrality(cen.full_spectrum(P))
    assert f[0] == pytest.approx(2 ** -0.5, abs=1e-12)
    np.testing.assert_allclose(f[1:], 1 / (2 * np.sqrt(2)), atol=1e-12)


def test_two_equal_components_degenerate():
    A = random_symmetric(np.random.default_rng(1), 3, density=1.0)
    A = np.abs(A)
    P2 = np.block([[A, np.zeros((3, 3))], [np.zeros((3, 3)), A]])
    _, deg = cen.eigencentrality(cen.full_spectrum(P2))
    assert deg


def test_null_network_errors():
    with pytest.raises(MarketNetError, match="null network"):
        cen.eigencentrality(cen.full_spectrum(np.zeros((3, 3))))
    sp = cen.shock_propagation(np.zeros((3, 3)), 0, 1.0, 4)
    assert sp.null_network and np.all(sp.powers == 0)


def test_shock_one_step():
    sp = cen.shock_propagation(np.array([[0, 0.5], [0.5, 0]]), 0, 2.0, 1)
    np.testing.assert_allclose(sp.powers[0], [0.0, 1.0])


def test_shock_error_ratio_converges_to_gap():
    rng = np.random.default_rng(2)
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    lam = np.array([0.9, 0.5, -0.2])
    P = (Q * lam) @ Q.T
    P = 0.5 * (P + P.T)
    np.fill_diagonal(P, 0.0)  # keep it a valid hollow adjacency
    spec = cen.full_spectrum(P)
    sp = cen.shock_propagation(P, 0, 1.0, 30, spec)
    target = abs(spec.eigenvalues[1] / spec.eigenvalues[0])
    assert sp.error_ratios[-1] == pytest.approx(target, rel=0.05)


def test_shock_orthogonal_to_leading_vector():
    # W1 of [[0,1],[1,0]] is (1,1)/sqrt2; a shock on (1,-1) never aligns
    P = np.array([[0, 1.0, 0], [1.0, 0, 0], [0, 0, 0]])
    spec = cen.full_spectrum(P)
    W1 = spec.eigenvectors[:, 0]
    j = int(np.argmin(np.abs(W1)))
    assert abs(W1[j]) < 1e-12
    sp = cen.shock_propagation(P, j, 1.0, 10, spec)
    assert sp.alpha1 == pytest.approx(0.0, abs=1e-12)


def test_leading_vector_matches_dense_solver():
    rng = np.random.default_rng(3)
    for _ in range(10):
        A = random_symmetric(rng, int(rng.integers(3, 30)))
        spec = cen.full_spectrum(A)
        if spec.gap_ratio > 0.999:
            continue
        f, _ = cen.eigencentrality(spec)
        lam, v = dense_leading(A)
        assert spec.eigenvalues[0] == pytest.approx(lam, abs=1e-10)
        assert abs(f @ v) >= 1 - 1e-8


def test_report_and_timeseries():
    P = np.array([[0, 0.3, 0.2], [0.3, 0, -0.1], [0.2, -0.1, 0]])
    r = cen.centrality_report(_net(P, year=2006))
    assert r.max_degree_node == "v0" and r.max_degree == pytest.approx(0.5)
    assert r.spectral_radius >= 0
    assert r.mean_degree <= r.mean_abs_degree
    assert np.sum(r.eigencentrality ** 2) == pytest.approx(1.0)
    ts = cen.centrality_timeseries([r])
    assert len(ts) == 1 and ts.loc[0, "year"] == 2006
    assert ts.loc[0, "spectral_radius"] == r.spectral_radius
    assert ts.loc[0, "max_degree_node"] == "v0"
    assert list(r.to_frame().columns) == ["node", "degree", "abs_degree", "eigencentrality"]


def test_degree_histogram():
    h = cen.degree_histogram(np.array([0.05, 0.15, 0.12, 0.31]), 0.1)
    assert h["count"].tolist() == [1, 2, 0, 1]
    np.testing.assert_allclose(h["bin_left"], [0.0, 0.1, 0.2, 0.3], atol=1e-15)
    with pytest.raises(ValueError):
        cen.degree_histogram(np.array([1.0]), 0)


def test_jacobi_rejects_asymmetric():
    with pytest.raises(ValueError):
        cen.jacobi_eigh(np.array([[0, 1.0], [0.5, 0]]))
