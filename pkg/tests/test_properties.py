import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from marketnet import centrality as cen
from marketnet import community as cm
from marketnet import ggm
from marketnet.ingest import UNKNOWN_SECTOR, PricePanel, ReturnsPanel, filter_completeness, filter_min_variance, log_returns

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(0, 2**32 - 1)


def _sym(rng, n, nonneg=False):
    A = rng.uniform(0.0 if nonneg else -1.0, 1.0, (n, n)) * (rng.random((n, n)) < 0.6)
    A = np.triu(A, 1)
    return A + A.T


def _price_panel(rng, T, n, missing):
    prices = np.exp(np.cumsum(0.02 * rng.standard_normal((T, n)), axis=0))
    prices[rng.random((T, n)) < missing] = np.nan
    dates = np.arange(np.datetime64("2020-01-01"), np.datetime64("2020-01-01") + T)
    tickers = [f"T{i}" for i in range(n)]
    return PricePanel(dates, tickers, prices, {t: UNKNOWN_SECTOR for t in tickers})


WINDOW = ("2020-01-01", "2021-12-31")


# -- ingest -----------------------------------------------------------------

@SETTINGS
@given(seeds, st.floats(0.3, 0.95), st.floats(0.3, 0.95))
def test_completeness_filter_monotone(seed, f1, f2):
    rng = np.random.default_rng(seed)
    panel = _price_panel(rng, 80, 6, rng.uniform(0, 0.3))
    lo, hi = sorted((f1, f2))
    assert set(filter_completeness(panel, WINDOW, hi)) <= set(filter_completeness(panel, WINDOW, lo))


@SETTINGS
@given(seeds, st.floats(1e-8, 1e-3), st.floats(1e-8, 1e-3))
def test_variance_filter_monotone(seed, v1, v2):
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((60, 5)) * rng.uniform(1e-5, 3e-2, 5)
    rp = ReturnsPanel(np.arange(np.datetime64("2020-01-01"), np.datetime64("2020-01-01") + 60),
                      [f"T{i}" for i in range(5)], R)
    lo, hi = sorted((v1, v2))
    assert set(filter_min_variance(rp, 20, hi)) <= set(filter_min_variance(rp, 20, lo))


@SETTINGS
@given(seeds, arrays(float, 4, elements=st.floats(1e-3, 1e3)))
def test_log_returns_scale_invariant(seed, c):
    rng = np.random.default_rng(seed)
    panel = _price_panel(rng, 30, 4, 0.05)
    scaled = PricePanel(panel.dates, panel.tickers, panel.prices * c, panel.sectors)
    a, b = log_returns(panel, WINDOW), log_returns(scaled, WINDOW)
    np.testing.assert_array_equal(a.dates, b.dates)
    np.testing.assert_allclose(a.returns, b.returns, atol=1e-12)


@SETTINGS
@given(seeds, st.permutations(range(6)))
def test_survivors_independent_of_ticker_order(seed, perm):
    rng = np.random.default_rng(seed)
    panel = _price_panel(rng, 60, 6, rng.uniform(0, 0.2))
    perm = list(perm)
    shuffled = PricePanel(panel.dates, [panel.tickers[i] for i in perm], panel.prices[:, perm], panel.sectors)
    assert sorted(filter_completeness(panel, WINDOW)) == sorted(filter_completeness(shuffled, WINDOW))


# -- ggm --------------------------------------------------------------------

@SETTINGS
@given(seeds, st.integers(2, 7))
def test_and_rule_network_invariants(seed, n):
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((n, n)) * (rng.random((n, n)) < 0.5)
    X = rng.standard_normal((80, n)) @ (np.eye(n) + L)
    Z, _, _ = ggm.standardize(X)
    fits = ggm.nodewise_estimate(Z)
    net = ggm.combine_and_rule(fits)
    P = net.P
    np.testing.assert_array_equal(P, P.T)
    assert np.all(np.diag(P) == 0) and np.all(np.abs(P) <= 1)
    for i, j, _ in net.edges():
        assert fits[i].betas[j] != 0 and fits[j].betas[i] != 0


# -- centrality -------------------------------------------------------------

@SETTINGS
@given(seeds, st.integers(2, 12), st.floats(-5, 5))
def test_degree_linear(seed, n, c):
    P = _sym(np.random.default_rng(seed), n)
    d, _ = cen.degree_centrality(P)
    dc, _ = cen.degree_centrality(c * P)
    np.testing.assert_allclose(dc, c * d, atol=1e-12)


@SETTINGS
@given(seeds, st.integers(2, 12), st.floats(0.01, 100))
def test_eigencentrality_scale_invariant(seed, n, c):
    P = _sym(np.random.default_rng(seed), n)
    spec = cen.full_spectrum(P)
    assume(spec.eigenvalues[0] != 0 and spec.gap_ratio < 0.99)
    f, _ = cen.eigencentrality(spec)
    g, _ = cen.eigencentrality(cen.full_spectrum(c * P))
    np.testing.assert_allclose(g, f, atol=1e-7)
    assert np.argmax(np.abs(g)) == np.argmax(np.abs(f))


@SETTINGS
@given(seeds, st.integers(2, 12))
def test_perron_nonnegative(seed, n):
    P = _sym(np.random.default_rng(seed), n, nonneg=True)
    spec = cen.full_spectrum(P)
    assume(spec.eigenvalues[0] > 0)
    f, _ = cen.eigencentrality(spec)
    assert np.all(f >= -1e-10)
    assert np.linalg.norm(P @ f - spec.eigenvalues[0] * f) <= 1e-8


@SETTINGS
@given(seeds, st.integers(2, 12), st.booleans())
def test_mean_degree_bound(seed, n, nonneg):
    P = _sym(np.random.default_rng(seed), n, nonneg=nonneg)
    d, a = cen.degree_centrality(P)
    assert d.mean() <= a.mean() + 1e-15
    if nonneg:
        assert d.mean() == a.mean()
    elif np.any(P < 0):
        assert d.mean() < a.mean()


# -- community --------------------------------------------------------------

@SETTINGS
@given(st.integers(0, 500), st.integers(1, 500))
def test_mp_bounds_product(n, T):
    assume(n <= T)
    lm, lp = cm.mp_bounds(n, T)
    assert abs(lm * lp - (1 - n / T) ** 2) <= 1e-12


def _random_corr(rng, n):
    T = int(rng.integers(n + 2, 10 * n + 20))
    X = rng.standard_normal((T, n)) + rng.uniform(0, 1.5) * rng.standard_normal((T, 1))
    return np.atleast_2d(np.corrcoef(X, rowvar=False)), T


@SETTINGS
@given(seeds, st.integers(2, 15))
def test_decomposition_complete(seed, n):
    C, T = _random_corr(np.random.default_rng(seed), n)
    d = cm.rmt_decompose(C, T)
    assert np.max(np.abs(C - (d.Cm + d.Cg + d.Cr))) <= 1e-10


@SETTINGS
@given(seeds, st.integers(2, 12), st.permutations(range(12)))
def test_modularity_relabel_invariant(seed, n, perm):
    rng = np.random.default_rng(seed)
    C, T = _random_corr(rng, n)
    d = cm.rmt_decompose(C, T)
    s = rng.integers(0, 4, n)
    t = np.asarray(perm)[s]
    assert cm.modularity_q2(C, d, s) == cm.modularity_q2(C, d, t)
    if d.has_group:
        assert cm.modularity_q3(C, d, s) == cm.modularity_q3(C, d, t)


@SETTINGS
@given(seeds, st.integers(1, 12))
def test_louvain_beats_singletons(seed, n):
    C, T = _random_corr(np.random.default_rng(seed), n)
    d = cm.rmt_decompose(C, T)
    for obj in ("Q2", "Q3") if d.has_group else ("Q2",):
        p = cm.louvain_maximize(C, d, obj, seed=seed % 1000, restarts=2)
        assert p.modularity >= cm.evaluate(C, d, np.arange(n), obj) - 1e-12
        assert abs(p.modularity - cm.evaluate(C, d, p.assignment, obj)) <= 1e-12
        assert set(p.assignment.tolist()) == set(range(p.n_communities))


@SETTINGS
@given(seeds, st.integers(2, 12))
def test_unweighted_all_in_one_is_zero(seed, n):
    rng = np.random.default_rng(seed)
    A = np.triu((rng.random((n, n)) < 0.5).astype(float), 1)
    A = A + A.T
    assume(A.sum() > 0)
    assert cm.modularity_unweighted(A, np.zeros(n, int)) == 0.0
