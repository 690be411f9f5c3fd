"""ARMA(1,1)-GARCH(1,1) quasi-maximum likelihood and DCC(1,1) correlations.

Univariate fits use a Gaussian likelihood conditioned on the first
observation (``eps_0 = 0``, ``sigma^2_0`` = sample variance).  Constraints are
handled by reparametrisation:

* ``phi = tanh(u1)``, ``psi = tanh(u2)``;
* ``alpha0 = exp(u3)``;
* ``alpha1 + beta1 = p_max * logistic(u4)`` split by ``logistic(u5)``.

The DCC stage uses the same persistence/split map for ``(a, b)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import optimize
from scipy.special import expit, logit

from . import kernels
from .errors import ConvergenceError, MarketNetError
from .ingest import ReturnsPanel

logger = logging.getLogger(__name__)

MIN_OBS = 50
P_MAX = 1.0 - 1e-8
STATIONARITY_MARGIN = 1e-6
GRAD_TOL = 1e-3
VARIANCE_FLOOR = 1e-300

#: (phi, psi, alpha1, beta1) starting points for the multi-start search
GARCH_STARTS = ((0.0, 0.0, 0.05, 0.90), (0.2, -0.2, 0.10, 0.80), (-0.1, 0.1, 0.15, 0.60))
#: (a, b) starting points for the DCC stage
DCC_STARTS = ((0.05, 0.90), (0.02, 0.97), (0.10, 0.75))


@dataclass
class ArmaGarchParams:
    mu: float
    phi: float
    psi: float
    alpha0: float
    alpha1: float
    beta1: float
    loglik: float = float("nan")
    nobs: int = 0
    grad_norm: float = float("nan")
    history: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if self.alpha1 < 0 or self.beta1 < 0:
            raise ValueError("alpha1 and beta1 must be non-negative")
        if not self.alpha1 + self.beta1 < 1:
            raise ValueError("alpha1 + beta1 must be below 1")
        if not abs(self.phi) < 1 or not abs(self.psi) < 1:
            raise ValueError("|phi| and |psi| must be below 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.phi, self.psi, self.alpha0, self.alpha1, self.beta1])

    @property
    def persistence(self) -> float:
        return self.alpha1 + self.beta1

    @property
    def unconditional_variance(self) -> float:
        return self.alpha0 / (1.0 - self.persistence)


@dataclass
class DccFit:
    univariate: list[ArmaGarchParams]
    a: float
    b: float
    Qbar: np.ndarray
    Rt: np.ndarray
    Rmean: np.ndarray
    loglik: float = float("nan")
    tickers: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.a < 0 or self.b < 0 or not self.a + self.b < 1:
            raise ValueError("DCC parameters must satisfy a, b >= 0 and a + b < 1")


# ---------------------------------------------------------------------------
# univariate


def garch_loglik(y: np.ndarray, theta: Sequence[float], h0: float | None = None, grad: bool = True):
    """Log-likelihood (and gradient in ``theta``) of ARMA(1,1)-GARCH(1,1).

    ``theta = (mu, phi, psi, alpha0, alpha1, beta1)``; ``h0`` defaults to the
    sample variance of ``y``.
    """
    y = np.asarray(y, dtype=float)
    h0 = float(np.var(y)) if h0 is None else float(h0)
    ll, g, _, _ = kernels.garch_loglik(y, np.asarray(theta, dtype=float), h0, grad)
    return (ll, g) if grad else ll


def _theta_from_u(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map unconstrained ``u`` to ``theta`` and return the diagonal-ish Jacobian."""
    mu, u1, u2, u3, u4, u5 = u
    phi, psi = math.tanh(u1), math.tanh(u2)
    omega = math.exp(u3)
    s4, s5 = float(expit(u4)), float(expit(u5))
    p = P_MAX * s4
    alpha, beta = p * s5, p * (1.0 - s5)
    theta = np.array([mu, phi, psi, omega, alpha, beta])
    J = np.zeros((6, 6))  # J[i, j] = d theta_i / d u_j
    J[0, 0] = 1.0
    J[1, 1] = 1.0 - phi * phi
    J[2, 2] = 1.0 - psi * psi
    J[3, 3] = omega
    dp = p * (1.0 - s4)
    J[4, 4] = s5 * dp
    J[5, 4] = (1.0 - s5) * dp
    J[4, 5] = p * s5 * (1.0 - s5)
    J[5, 5] = -p * s5 * (1.0 - s5)
    return theta, J


def _u_from_theta(theta: Sequence[float]) -> np.ndarray:
    mu, phi, psi, omega, alpha, beta = (float(v) for v in theta)
    p = alpha + beta
    clip = 1.0 - 1e-12
    phi, psi = np.clip(phi, -clip, clip), np.clip(psi, -clip, clip)
    s4 = np.clip(p / P_MAX, 1e-12, clip)
    s5 = np.clip(alpha / p if p > 0 else 0.5, 1e-12, clip)
    return np.array([mu, math.atanh(phi), math.atanh(psi), math.log(omega), logit(s4), logit(s5)])


def fit_arma_garch(
    y: np.ndarray,
    init: ArmaGarchParams | None = None,
    starts: Sequence[Sequence[float]] = GARCH_STARTS,
    grad_tol: float = GRAD_TOL,
    max_iter: int = 500,
) -> ArmaGarchParams:
    """Gaussian QMLE of ARMA(1,1)-GARCH(1,1) by BFGS on transformed parameters.

    The series is rescaled to unit variance for the search and the estimates
    mapped back, which leaves the likelihood equivariant.  Every start in
    ``starts`` (plus ``init`` if given) is run and the best kept.

    Raises
    ------
    ValueError
        Fewer than ``MIN_OBS`` observations or a constant series.
    ConvergenceError
        No start reaches a gradient norm below ``grad_tol`` (per observation,
        transformed scale); ``iterate`` holds the best parameters.
    """
    y = np.asarray(y, dtype=float)
    T = y.shape[0]
    if T < MIN_OBS:
        raise ValueError(f"need at least {MIN_OBS} observations, got {T}")
    if not np.all(np.isfinite(y)):
        raise ValueError("series has non-finite values")
    scale = float(np.std(y))
    if not scale > 1e-12 * max(float(np.max(np.abs(y))), 1e-300):
        raise ValueError("constant series")
    x = y / scale
    h0 = float(np.var(x))
    m = T - 1

    def objective(u):
        theta, J = _theta_from_u(u)
        ll, g, _, _ = kernels.garch_loglik(x, theta, h0, True)
        if not math.isfinite(ll) or not np.all(np.isfinite(g)):
            return math.inf, np.zeros(6)
        return -ll / m, -(J.T @ g) / m

    candidates = []
    mean0 = float(np.mean(x))
    for phi, psi, a1, b1 in starts:
        candidates.append(np.array([mean0, phi, psi, 1.0 - a1 - b1, a1, b1]))
    init_ll = -math.inf
    if init is not None:
        th = init.as_array().copy()
        th[0] /= scale
        th[3] /= scale * scale
        init_ll = -objective(_u_from_theta(th))[0] * m
        candidates.append(th)

    best = None
    for theta0 in candidates:
        u0 = _u_from_theta(theta0)
        hist: list[float] = [-objective(u0)[0] * m]
        res = optimize.minimize(
            objective,
            u0,
            jac=True,
            method="BFGS",
            options={"gtol": 1e-7, "maxiter": max_iter},
            callback=lambda uk, h=hist: h.append(-objective(uk)[0] * m),
        )
        f, g = objective(res.x)
        gnorm = float(np.linalg.norm(g))
        if math.isfinite(f) and (best is None or f < best[0]):
            best = (f, res.x, gnorm, hist)

    if best is None:
        raise ConvergenceError("ARMA-GARCH likelihood is not finite at any start")
    f, u, gnorm, hist = best
    theta, _ = _theta_from_u(u)
    ll = -f * m
    if init is not None and ll < init_ll:
        theta, ll = init.as_array() / [scale, 1, 1, scale * scale, 1, 1], init_ll
    log_scale = m * math.log(scale)
    params = ArmaGarchParams(
        mu=float(theta[0] * scale),
        phi=float(theta[1]),
        psi=float(theta[2]),
        alpha0=float(theta[3] * scale * scale),
        alpha1=float(theta[4]),
        beta1=float(theta[5]),
        loglik=float(ll - log_scale),
        nobs=m,
        grad_norm=gnorm,
        history=[h - log_scale for h in hist],
    )
    if gnorm > grad_tol:
        raise ConvergenceError(
            f"ARMA-GARCH optimizer stalled: gradient norm {gnorm:.2e} > {grad_tol:.0e}",
            iterate=params.as_array(),
            residual=gnorm,
        )
    return params


def conditional_variance(y: np.ndarray, params: ArmaGarchParams) -> tuple[np.ndarray, np.ndarray]:
    """Filtered ``(eps_t, sigma^2_t)`` for ``t = 1..T-1``."""
    y = np.asarray(y, dtype=float)
    _, _, e, h = kernels.garch_loglik(y, params.as_array(), float(np.var(y)), False)
    return e[1:], h[1:]


def standardized_residuals(y: np.ndarray, params: ArmaGarchParams) -> np.ndarray:
    """``z_t = eps_t / sigma_t`` from the filtered recursions (length ``T - 1``)."""
    e, h = conditional_variance(y, params)
    if not np.all(np.isfinite(h)) or np.any(h <= VARIANCE_FLOOR):
        raise MarketNetError("variance collapse: conditional variance underflows")
    z = e / np.sqrt(h)
    if not residual_health(z):
        logger.warning("standardized residual variance %.3f outside [0.8, 1.2]", float(np.var(z)))
    return z


def residual_health(z: np.ndarray, lo: float = 0.8, hi: float = 1.2) -> bool:
    """True when the sample variance of ``z`` lies in ``[lo, hi]``."""
    v = float(np.var(z, ddof=1)) if len(z) > 1 else 0.0
    return lo <= v <= hi


def mu_table(fits: Mapping[str, ArmaGarchParams], year: int | None = None) -> pd.DataFrame:
    """Ticker / mean-level table with four-decimal strings."""
    def fmt(v: float) -> str:
        s = f"{v:.4f}"
        return "0.0000" if s == "-0.0000" else s

    rows = [{"ticker": t, "mu": fmt(p.mu)} for t, p in fits.items()]
    df = pd.DataFrame(rows, columns=["ticker", "mu"])
    if year is not None:
        df.insert(0, "year", year)
    return df


# ---------------------------------------------------------------------------
# DCC


def _ab_from_v(v) -> tuple[float, float]:
    p = P_MAX * float(expit(v[0]))
    s = float(expit(v[1]))
    return p * s, p * (1.0 - s)


def _v_from_ab(a: float, b: float) -> np.ndarray:
    p = a + b
    return np.array([logit(min(max(p / P_MAX, 1e-12), 1 - 1e-12)), logit(min(max(a / p, 1e-12), 1 - 1e-12))])


def dcc_correlations(Z: np.ndarray, Qbar: np.ndarray, a: float, b: float) -> np.ndarray:
    """``R_t`` path with an exactly unit diagonal."""
    R = kernels.dcc_correlations(np.ascontiguousarray(Z, dtype=float), np.ascontiguousarray(Qbar), float(a), float(b))
    idx = np.arange(R.shape[1])
    R[:, idx, idx] = 1.0
    return R


def fit_dcc(
    Z: np.ndarray,
    a: float | None = None,
    b: float | None = None,
    starts: Sequence[tuple[float, float]] = DCC_STARTS,
    univariate: Sequence[ArmaGarchParams] | None = None,
    tickers: Sequence[str] | None = None,
) -> DccFit:
    """Second-stage DCC(1,1) QMLE on a standardized-residual panel.

    ``Q_t = (1-a-b) Qbar + a z_{t-1} z_{t-1}' + b Q_{t-1}``, ``Q_0 = Qbar``,
    ``R_t = diag(Q_t)^{-1/2} Q_t diag(Q_t)^{-1/2}``.  Passing both ``a`` and
    ``b`` skips estimation.

    Raises
    ------
    ValueError
        Fewer than two columns, or perfectly collinear residuals.
    ConvergenceError
        Optimizer failure, or an estimate on the ``a + b = 1`` boundary.
    """
    Z = np.ascontiguousarray(Z, dtype=float)
    T, n = Z.shape
    if n < 2:
        raise ValueError("DCC needs at least two series")
    Qbar = np.cov(Z, rowvar=False, bias=True)
    d = np.sqrt(np.diag(Qbar))
    if not np.all(d > 0):
        raise ValueError("standardized residual column with zero variance")
    corr = Qbar / np.outer(d, d)
    off = np.abs(corr[~np.eye(n, dtype=bool)])
    if off.max() > 1.0 - 1e-10 or np.linalg.eigvalsh(corr)[0] <= 1e-12:
        raise ValueError("collinear standardized residuals: DCC correlation is singular")

    if a is not None and b is not None:
        if a < 0 or b < 0 or not a + b < 1:
            raise ValueError("fixed DCC parameters must satisfy a, b >= 0, a + b < 1")
        ll = kernels.dcc_loglik(Z, Qbar, float(a), float(b))
        a_hat, b_hat = float(a), float(b)
    else:
        def objective(v):
            aa, bb = _ab_from_v(v)
            val = kernels.dcc_loglik(Z, Qbar, aa, bb)
            return -val / T if math.isfinite(val) else 1e300

        best = None
        for a0, b0 in starts:
            res = optimize.minimize(objective, _v_from_ab(a0, b0), method="BFGS", options={"gtol": 1e-7})
            if math.isfinite(res.fun) and res.fun < 1e299 and (best is None or res.fun < best.fun):
                best = res
        if best is None:
            raise ConvergenceError("DCC likelihood is not finite at any start")
        a_hat, b_hat = _ab_from_v(best.x)
        ll = -best.fun * T
        if a_hat + b_hat >= 1.0 - STATIONARITY_MARGIN:
            raise ConvergenceError(
                f"non-stationary DCC: a + b = {a_hat + b_hat:.8f}",
                iterate=np.array([a_hat, b_hat]),
                residual=a_hat + b_hat,
            )
    Rt = dcc_correlations(Z, Qbar, a_hat, b_hat)
    Rmean = Rt.mean(axis=0)
    return DccFit(
        univariate=list(univariate or []),
        a=a_hat,
        b=b_hat,
        Qbar=Qbar,
        Rt=Rt,
        Rmean=Rmean,
        loglik=float(ll),
        tickers=list(tickers) if tickers is not None else [str(i) for i in range(n)],
    )


@dataclass
class YearCorrelation:
    C: np.ndarray
    tickers: list[str]
    dcc: DccFit
    fits: dict[str, ArmaGarchParams]
    dropped: dict[str, str]
    T: int
    clipped: bool = False


def _psd_project(C: np.ndarray, floor: float = -1e-10) -> tuple[np.ndarray, bool]:
    C = 0.5 * (C + C.T)
    w, V = np.linalg.eigh(C)
    if w[0] >= 0:
        return C, False
    if w[0] < floor:
        raise MarketNetError(f"correlation matrix is not PSD (min eigenvalue {w[0]:.3e})")
    C = (V * np.maximum(w, 0.0)) @ V.T
    d = np.sqrt(np.diag(C))
    C = C / np.outer(d, d)
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, 1.0)
    return C, True


def yearly_correlation(
    panel: ReturnsPanel,
    reduce: str = "mean",
    grad_tol: float = GRAD_TOL,
    restarts: int = len(GARCH_STARTS),
) -> YearCorrelation:
    """ARMA-GARCH per column, DCC on the residuals, one correlation matrix per year.

    ``reduce`` picks the matrix passed on: ``"mean"`` (time-average of
    ``R_t``), ``"last"`` (final ``R_t``) or ``"unconditional"`` (correlation
    of the standardized residuals).  Columns whose univariate fit fails are
    dropped with a warning.  ``restarts`` is the number of fixed starting
    points tried per univariate fit.
    """
    if reduce not in ("mean", "last", "unconditional"):
        raise ValueError(f"unknown reduction {reduce!r}")
    fits: dict[str, ArmaGarchParams] = {}
    zs = []
    dropped: dict[str, str] = {}
    for k, t in enumerate(panel.tickers):
        y = panel.returns[:, k]
        try:
            p = fit_arma_garch(y, starts=GARCH_STARTS[: max(1, restarts)], grad_tol=grad_tol)
            z = standardized_residuals(y, p)
        except (ValueError, MarketNetError) as exc:
            logger.warning("dropping %s: univariate fit failed (%s)", t, exc)
            dropped[t] = str(exc)
            continue
        fits[t] = p
        zs.append(z)
    tickers = list(fits)
    if len(tickers) < 2:
        raise MarketNetError("fewer than two series survive the univariate fits")
    Z = np.column_stack(zs)
    dcc = fit_dcc(Z, univariate=list(fits.values()), tickers=tickers)
    if reduce == "mean":
        C = dcc.Rmean
    elif reduce == "last":
        C = dcc.Rt[-1]
    else:
        d = np.sqrt(np.diag(dcc.Qbar))
        C = dcc.Qbar / np.outer(d, d)
    C, clipped = _psd_project(C)
    np.fill_diagonal(C, 1.0)
    return YearCorrelation(C=C, tickers=tickers, dcc=dcc, fits=fits, dropped=dropped, T=Z.shape[0], clipped=clipped)
