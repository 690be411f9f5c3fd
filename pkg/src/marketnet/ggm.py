"""Nodewise-lasso Gaussian graphical model.

Each standardized return column is regressed on all the others with an
L1 penalty chosen by EBIC; the two directed estimates of every pair are then
merged with an AND rule into a symmetric partial-correlation matrix.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConvergenceError
from .ingest import UNKNOWN_SECTOR, ReturnsPanel

logger = logging.getLogger(__name__)

DEFAULT_GAMMA = 0.25
DEFAULT_GRID_SIZE = 50
DEFAULT_GRID_RATIO = 0.01
DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 10_000


@dataclass
class NodewiseFit:
    node: int
    intercept: float
    betas: np.ndarray
    residual_variance: float
    lam: float

    def __post_init__(self):
        if self.residual_variance < 0 or self.lam < 0 or not np.all(np.isfinite(self.betas)):
            raise ValueError(f"invalid nodewise fit for node {self.node}")


@dataclass
class PartialCorrNetwork:
    """Symmetric, hollow partial-correlation adjacency matrix."""

    P: np.ndarray
    tickers: list[str]
    sectors: dict[str, str] = field(default_factory=dict)
    year: int | None = None
    sign_conflicts: int = 0
    clip_events: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        P = self.P
        n = len(self.tickers)
        if P.shape != (n, n):
            raise ValueError("P shape does not match ticker list")
        if not np.array_equal(P, P.T):
            raise ValueError("P must be exactly symmetric")
        if np.any(np.diag(P) != 0):
            raise ValueError("P must have a zero diagonal")
        if np.any(np.abs(P) > 1):
            raise ValueError("partial correlations must lie in [-1, 1]")

    @property
    def n(self) -> int:
        return len(self.tickers)

    def edges(self):
        """Yield ``(i, j, weight)`` for ``i < j`` and non-zero weight."""
        iu, ju = np.nonzero(np.triu(self.P, 1))
        for i, j in zip(iu.tolist(), ju.tolist()):
            yield i, j, float(self.P[i, j])


@dataclass
class ConcentrationMatrix:
    J: np.ndarray

    def __post_init__(self):
        if not np.allclose(self.J, self.J.T, atol=1e-10, rtol=0):
            raise ValueError("J must be symmetric")
        if np.any(np.diag(self.J) <= 0):
            raise ValueError("J must have a strictly positive diagonal")


def standardize(returns: ReturnsPanel | np.ndarray):
    """Centre and scale each column to mean 0 and unit variance.

    Uses the population convention (divide by ``T``), so a column ``(0, 2)``
    maps to ``(-1, 1)`` and ``X_j'X_j / T == 1`` as the lasso objective
    assumes.

    Returns
    -------
    (Z, means, stds)
    """
    X = returns.returns if isinstance(returns, ReturnsPanel) else np.asarray(returns, dtype=float)
    means = X.mean(axis=0)
    centred = X - means
    stds = np.sqrt(np.mean(centred * centred, axis=0))
    bad = np.flatnonzero(~(stds > 0))
    if bad.size:
        raise ValueError(f"zero-variance columns {bad.tolist()}: variance filter violated upstream")
    return centred / stds, means, stds


def soft_threshold(x, lam):
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty at which the lasso solution is identically zero."""
    T = X.shape[0]
    return float(np.max(np.abs(X.T @ y)) / T) if X.shape[1] else 0.0


def lambda_grid(lmax: float, size: int = DEFAULT_GRID_SIZE, ratio: float = DEFAULT_GRID_RATIO) -> np.ndarray:
    """Decreasing log-spaced grid from ``lmax`` to ``ratio * lmax``."""
    if lmax <= 0:
        return np.array([0.0])
    return np.geomspace(lmax, ratio * lmax, size)


def kkt_residual(G: np.ndarray, c: np.ndarray, beta: np.ndarray, lam: float) -> float:
    """Largest violation of the lasso stationarity conditions.

    With gradient ``g = G beta - c``: active coordinates need
    ``g_j = -lam * sign(beta_j)``, inactive ones ``|g_j| <= lam``.
    """
    g = G @ beta - c
    active = beta != 0
    viol = np.where(active, np.abs(g + lam * np.sign(beta)), np.maximum(np.abs(g) - lam, 0.0))
    return float(viol.max()) if viol.size else 0.0


def _solve_gram(G, c, lam, beta, tol, max_iter):
    sweeps, change, ok = kernels.lasso_cd_gram(G, c, float(lam), beta, float(tol), int(max_iter))
    if not ok:
        raise ConvergenceError(
            f"lasso coordinate descent did not converge in {max_iter} sweeps (lambda={lam:.3g})",
            iterate=beta.copy(),
            residual=kkt_residual(G, c, beta, lam),
        )
    return beta


def lasso_cd(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    beta0: np.ndarray | None = None,
) -> np.ndarray:
    """Minimise ``(1/2T)||y - X b||^2 + lam * ||b||_1`` by coordinate descent.

    Covariance updates on ``X'X/T`` with active-set sweeps; the run stops once
    a full sweep moves no coordinate by more than ``tol``.  Raises
    :class:`ConvergenceError` (carrying the last iterate and KKT residual)
    when ``max_iter`` sweeps are exhausted.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    T = X.shape[0]
    G = X.T @ X / T
    c = X.T @ y / T
    beta = np.zeros(X.shape[1]) if beta0 is None else np.array(beta0, dtype=float)
    return _solve_gram(G, c, lam, beta, tol, max_iter)


def lasso_path(G, c, grid, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> np.ndarray:
    """Warm-started solutions along a decreasing penalty grid, one row per grid point."""
    beta = np.zeros(G.shape[0])
    out = np.empty((len(grid), G.shape[0]))
    for k, lam in enumerate(grid):
        _solve_gram(G, c, lam, beta, tol, max_iter)
        out[k] = beta
    return out


def _ebic_select(G, c, yy, T, grid, gamma, tol, max_iter):
    """Return (best index, path, rss/T) over ``grid`` using the Gram form of RSS."""
    p = G.shape[0]
    path = lasso_path(G, c, grid, tol, max_iter)
    # RSS/T = y'y/T - 2 b'c + b'Gb
    rss = yy - 2.0 * path @ c + np.einsum("kj,jl,kl->k", path, G, path)
    rss = np.maximum(rss, 1e-300)
    k = np.count_nonzero(path, axis=1)
    pen = math.log(p) if p > 1 else 0.0
    ebic = T * np.log(rss) + k * math.log(T) + 2.0 * gamma * k * pen
    return int(np.argmin(ebic)), path, rss


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("penalty grid must be a non-empty 1-d sequence")
    if np.any(grid < 0) or np.any(np.diff(grid) > 0):
        raise ValueError("penalty grid must be non-negative and decreasing")
    return grid


def select_lambda_ebic(
    X: np.ndarray,
    y: np.ndarray,
    gamma: float = DEFAULT_GAMMA,
    grid: Sequence[float] | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> float:
    """Penalty on ``grid`` minimising the extended BIC.

    ``EBIC = T log(RSS/T) + k log T + 2 gamma k log p`` where ``k`` is the
    support size and ``p`` the number of predictors.  Ties go to the larger
    penalty.  The default grid is 50 log-spaced points from ``lambda_max``
    down to ``0.01 * lambda_max``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    T = X.shape[0]
    if grid is None:
        grid = lambda_grid(lambda_max(X, y))
    grid = _check_grid(grid)
    G = X.T @ X / T
    c = X.T @ y / T
    best, _, _ = _ebic_select(G, c, float(y @ y) / T, T, grid, gamma, tol, max_iter)
    return float(grid[best])


def _cv_select(X, y, grid, folds, tol, max_iter):
    """Index on ``grid`` with the lowest mean held-out squared error.

    Folds are contiguous blocks of rows, which keeps the split deterministic
    and respects time order.  Ties go to the larger penalty.
    """
    T = X.shape[0]
    if folds < 2 or folds > T:
        raise ValueError(f"need 2 <= folds <= T, got folds={folds}, T={T}")
    bounds = np.linspace(0, T, folds + 1).astype(int)
    err = np.zeros(len(grid))
    for k in range(folds):
        test = np.zeros(T, dtype=bool)
        test[bounds[k]:bounds[k + 1]] = True
        Xtr, ytr = X[~test], y[~test]
        m = Xtr.shape[0]
        path = lasso_path(Xtr.T @ Xtr / m, Xtr.T @ ytr / m, grid, tol, max_iter)
        resid = y[test][None, :] - path @ X[test].T
        err += np.mean(resid * resid, axis=1)
    return int(np.argmin(err / folds))


def select_lambda_cv(
    X: np.ndarray,
    y: np.ndarray,
    grid: Sequence[float] | None = None,
    folds: int = 5,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> float:
    """Penalty on ``grid`` minimising ``folds``-fold cross-validated squared error."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if grid is None:
        grid = lambda_grid(lambda_max(X, y))
    grid = _check_grid(grid)
    return float(grid[_cv_select(X, y, grid, folds, tol, max_iter)])


def nodewise_estimate(
    Z: np.ndarray,
    gamma: float = DEFAULT_GAMMA,
    grid: Sequence[float] | None = None,
    grid_size: int = DEFAULT_GRID_SIZE,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    means: np.ndarray | None = None,
    threads: int = 1,
    selection: str = "ebic",
    folds: int = 5,
) -> list[NodewiseFit]:
    """Regress every standardized column on all the others.

    ``grid`` fixes a common penalty grid for all nodes; by default each node
    gets its own ``lambda_max``-anchored grid of ``grid_size`` points.  Betas
    and residual variances are on the standardized scale; ``intercept`` is the
    column mean when ``means`` is given (zero otherwise).  ``selection`` is
    ``"ebic"`` (default) or ``"cv"`` for contiguous ``folds``-fold
    cross-validation.
    """
    if selection not in ("ebic", "cv"):
        raise ValueError(f"unknown penalty selection {selection!r}")
    Z = np.asarray(Z, dtype=float)
    T, n = Z.shape
    if n < 2:
        raise ValueError("need at least two variables")
    S = Z.T @ Z / T
    fixed = None if grid is None else _check_grid(grid)

    def fit(i: int) -> NodewiseFit:
        others = np.r_[0:i, i + 1:n]
        G = np.ascontiguousarray(S[np.ix_(others, others)])
        c = np.ascontiguousarray(S[others, i])
        g = fixed if fixed is not None else lambda_grid(float(np.max(np.abs(c))), grid_size)
        best, path, rss = _ebic_select(G, c, S[i, i], T, g, gamma, tol, max_iter)
        if selection == "cv":
            best = _cv_select(Z[:, others], Z[:, i], g, folds, tol, max_iter)
        betas = np.zeros(n)
        betas[others] = path[best]
        return NodewiseFit(
            node=i,
            intercept=0.0 if means is None else float(means[i]),
            betas=betas,
            residual_variance=float(max(rss[best], 0.0)),
            lam=float(g[best]),
        )

    if threads > 1 and n > 2:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fit, range(n)))
    return [fit(i) for i in range(n)]


def combine_and_rule(
    fits: Sequence[NodewiseFit],
    tickers: Sequence[str] | None = None,
    sectors: dict[str, str] | None = None,
    year: int | None = None,
) -> PartialCorrNetwork:
    """Merge directed nodewise estimates into a symmetric partial-correlation matrix.

    An edge survives only when both regressions select it.  Its weight is the
    signed geometric mean ``sign(b_ij) * sqrt(b_ij * b_ji)``, which equals
    the partial correlation when both regressions are exact.  Opposite-sign
    pairs are dropped and counted as sign conflicts; weights outside
    ``[-1, 1]`` are clipped and counted.
    """
    n = len(fits)
    if sorted(f.node for f in fits) != list(range(n)):
        raise ValueError("fits must cover nodes 0..n-1 exactly once")
    B = np.zeros((n, n))
    for f in fits:
        B[f.node] = f.betas
    np.fill_diagonal(B, 0.0)
    prod = B * B.T
    both = (B != 0) & (B.T != 0)
    conflict = both & (prod < 0)
    keep = both & (prod > 0)
    P = np.where(keep, np.sign(B) * np.sqrt(np.where(keep, prod, 0.0)), 0.0)
    P = np.triu(P, 1)
    clipped = int(np.count_nonzero(np.abs(P) > 1.0))
    P = np.clip(P, -1.0, 1.0)
    P = P + P.T
    n_conflicts = int(np.count_nonzero(np.triu(conflict, 1)))
    if n_conflicts:
        logger.info("AND rule dropped %d sign-conflicting edges", n_conflicts)
    tickers = list(tickers) if tickers is not None else [str(i) for i in range(n)]
    return PartialCorrNetwork(
        P=P,
        tickers=tickers,
        sectors={t: (sectors or {}).get(t, UNKNOWN_SECTOR) for t in tickers},
        year=year,
        sign_conflicts=n_conflicts,
        clip_events=clipped,
    )


def concentration_from_fits(fits: Sequence[NodewiseFit], P: np.ndarray | None = None) -> ConcentrationMatrix:
    """Concentration matrix implied by the residual variances and ``P``.

    ``J_ii = 1 / var(eps_i)`` and ``J_ij = -P_ij sqrt(J_ii J_jj)``.
    """
    fits = sorted(fits, key=lambda f: f.node)
    var = np.array([f.residual_variance for f in fits])
    zero = np.flatnonzero(var <= 0)
    if zero.size:
        raise ValueError(f"perfectly predicted node(s) {zero.tolist()}: residual variance is zero")
    if P is None:
        P = combine_and_rule(fits).P
    d = 1.0 / var
    s = np.sqrt(d)
    J = -P * np.outer(s, s)
    np.fill_diagonal(J, d)
    return ConcentrationMatrix(J)


def estimate_network(
    returns: ReturnsPanel,
    gamma: float = DEFAULT_GAMMA,
    grid: Sequence[float] | None = None,
    grid_size: int = DEFAULT_GRID_SIZE,
    tol: float = DEFAULT_TOL,
    year: int | None = None,
    threads: int = 1,
    selection: str = "ebic",
    folds: int = 5,
) -> tuple[PartialCorrNetwork, list[NodewiseFit]]:
    """Standardize, fit all nodes and combine: the full per-year GGM step."""
    Z, means, _ = standardize(returns)
    fits = nodewise_estimate(Z, gamma=gamma, grid=grid, grid_size=grid_size, tol=tol, means=means, threads=threads,
                             selection=selection, folds=folds)
    net = combine_and_rule(fits, returns.tickers, returns.sectors, year)
    net.meta.update(T=returns.T, n=returns.n, degenerate=returns.n > returns.T, gamma=gamma, selection=selection)
    return net, fits
