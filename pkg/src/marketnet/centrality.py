"""Degree and eigenvector centrality, spectra and shock propagation on P."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from . import kernels
from .errors import ConvergenceError, MarketNetError
from .ggm import PartialCorrNetwork

JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100
DEGENERACY_THRESHOLD = 0.999
EIGVEC_RESIDUAL_TOL = 1e-8


@dataclass
class Spectrum:
    """Eigenpairs of a symmetric matrix, ordered by decreasing modulus.

    Eigenvalues of equal modulus put the positive one first.  Each
    eigenvector has its largest-modulus coordinate positive.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    off_norm: float = 0.0
    sweeps: int = 0

    @property
    def gap_ratio(self) -> float:
        lam = np.abs(self.eigenvalues)
        if lam.size < 2 or lam[0] == 0:
            return 0.0
        return float(lam[1] / lam[0])

    @property
    def spectral_radius(self) -> float:
        return float(abs(self.eigenvalues[0])) if self.eigenvalues.size else 0.0


@dataclass
class CentralityReport:
    tickers: list[str]
    degree: np.ndarray
    abs_degree: np.ndarray
    eigencentrality: np.ndarray
    lambda1: float
    spectral_radius: float
    degenerate: bool
    year: int | None = None

    @property
    def max_degree_node(self) -> str:
        return self.tickers[int(np.argmax(self.degree))]

    @property
    def max_degree(self) -> float:
        return float(np.max(self.degree))

    @property
    def mean_degree(self) -> float:
        return float(np.mean(self.degree))

    @property
    def mean_abs_degree(self) -> float:
        return float(np.mean(self.abs_degree))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "node": self.tickers,
                "degree": self.degree,
                "abs_degree": self.abs_degree,
                "eigencentrality": self.eigencentrality,
            }
        )


@dataclass
class ShockPropagation:
    powers: np.ndarray  # row k-1 holds P^k delta
    alpha1: float
    leading: np.ndarray  # alpha1 * W1
    errors: np.ndarray  # ||P^k delta / lambda1^k - alpha1 W1||
    lambda1: float
    null_network: bool = False

    @property
    def error_ratios(self) -> np.ndarray:
        e = self.errors
        with np.errstate(divide="ignore", invalid="ignore"):
            return e[1:] / e[:-1]


def _matrix(net) -> np.ndarray:
    return net.P if isinstance(net, PartialCorrNetwork) else np.asarray(net, dtype=float)


def fix_sign(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` so its largest-modulus coordinate (first on ties) is positive."""
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def jacobi_eigh(A: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Full symmetric eigendecomposition by cyclic Jacobi rotations.

    Returns ``(w, V)`` unsorted.  Raises :class:`ConvergenceError` when the
    off-diagonal norm is still above ``tol`` after ``max_sweeps`` sweeps.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(A, A.T, atol=1e-12, rtol=0):
        raise ValueError("matrix must be symmetric")
    A = 0.5 * (A + A.T)
    w, V, off, sweeps = kernels.jacobi_eigh(A, tol, max_sweeps)
    if off > tol:
        raise ConvergenceError(f"Jacobi iteration stalled after {sweeps} sweeps", iterate=w, residual=off)
    return w, V, off, sweeps


def _modulus_order(w: np.ndarray, tol: float) -> np.ndarray:
    """Indices by decreasing ``|w|``; moduli within ``tol`` count as tied and put positives first."""
    order = np.argsort(-np.abs(w), kind="stable")
    out = []
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order) and abs(w[order[j - 1]]) - abs(w[order[j]]) <= tol:
            j += 1
        group = order[i:j]
        out.extend(group[np.argsort(-w[group], kind="stable")])
        i = j
    return np.asarray(out, dtype=int)


def full_spectrum(net, tol: float = JACOBI_TOL) -> Spectrum:
    """All eigenpairs of ``P``; verifies ``||P - W diag(w) W'||_max`` is within ``10 * tol``."""
    P = _matrix(net)
    n = P.shape[0]
    if n == 0:
        return Spectrum(np.empty(0), np.empty((0, 0)))
    w, V, off, sweeps = jacobi_eigh(P, tol)
    order = _modulus_order(w, tol)
    w = w[order]
    V = V[:, order]
    V = V / np.linalg.norm(V, axis=0)
    for k in range(n):
        V[:, k] = fix_sign(V[:, k])
    recon = float(np.max(np.abs(P - (V * w) @ V.T)))
    if recon > 10 * tol:
        raise ConvergenceError(f"eigendecomposition reconstruction error {recon:.2e}", iterate=w, residual=recon)
    return Spectrum(w, V, off, sweeps)


def degree_centrality(net) -> tuple[np.ndarray, np.ndarray]:
    """Row sums of ``P`` and of ``|P|``."""
    P = _matrix(net)
    return P.sum(axis=1), np.abs(P).sum(axis=1)


def eigencentrality(spectrum: Spectrum, threshold: float = DEGENERACY_THRESHOLD) -> tuple[np.ndarray, bool]:
    """Leading eigenvector and whether the dominant eigenvalue looks non-unique."""
    if spectrum.eigenvalues.size == 0 or spectrum.eigenvalues[0] == 0:
        raise MarketNetError("null network: the leading eigenvalue is zero")
    f = spectrum.eigenvectors[:, 0]
    f = fix_sign(f / np.linalg.norm(f))
    return f, spectrum.gap_ratio > threshold


def shock_propagation(net, shocked_node: int, delta: float, k: int, spectrum: Spectrum | None = None) -> ShockPropagation:
    """Propagate a unit-coordinate shock ``delta * e_i`` through powers of ``P``.

    Also returns the projection ``alpha1 = <Delta, W1>`` and the distance of
    each normalised power ``P^k Delta / lambda1^k`` from ``alpha1 W1``.
    """
    P = _matrix(net)
    n = P.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if not 0 <= shocked_node < n:
        raise ValueError(f"shocked node {shocked_node} outside 0..{n - 1}")
    spectrum = spectrum or full_spectrum(P)
    shock = np.zeros(n)
    shock[shocked_node] = delta
    powers = np.empty((k, n))
    x = shock
    for step in range(k):
        x = P @ x
        powers[step] = x
    lam1 = float(spectrum.eigenvalues[0])
    if lam1 == 0.0:
        return ShockPropagation(powers, 0.0, np.zeros(n), np.full(k, np.nan), 0.0, null_network=True)
    W1 = spectrum.eigenvectors[:, 0]
    alpha1 = float(shock @ W1)
    leading = alpha1 * W1
    scale = lam1 ** np.arange(1, k + 1, dtype=float)
    errors = np.linalg.norm(powers / scale[:, None] - leading, axis=1)
    return ShockPropagation(powers, alpha1, leading, errors, lam1)


def centrality_report(net: PartialCorrNetwork, threshold: float = DEGENERACY_THRESHOLD) -> CentralityReport:
    deg, absdeg = degree_centrality(net)
    spec = full_spectrum(net)
    f, degenerate = eigencentrality(spec, threshold)
    resid = float(np.linalg.norm(net.P @ f - spec.eigenvalues[0] * f))
    if resid > EIGVEC_RESIDUAL_TOL:
        raise ConvergenceError(f"eigencentrality residual {resid:.2e}", iterate=f, residual=resid)
    return CentralityReport(
        tickers=list(net.tickers),
        degree=deg,
        abs_degree=absdeg,
        eigencentrality=f,
        lambda1=float(spec.eigenvalues[0]),
        spectral_radius=spec.spectral_radius,
        degenerate=degenerate,
        year=net.year,
    )


TIMESERIES_COLUMNS = [
    "year",
    "spectral_radius",
    "lambda1",
    "abs_lambda1",
    "max_degree",
    "max_degree_node",
    "mean_degree",
    "mean_abs_degree",
    "degenerate",
]


def centrality_timeseries(reports: Sequence[CentralityReport]) -> pd.DataFrame:
    """One row per year with the spectral-radius and degree-summary curves."""
    rows = [
        {
            "year": r.year,
            "spectral_radius": r.spectral_radius,
            "lambda1": r.lambda1,
            "abs_lambda1": abs(r.lambda1),
            "max_degree": r.max_degree,
            "max_degree_node": r.max_degree_node,
            "mean_degree": r.mean_degree,
            "mean_abs_degree": r.mean_abs_degree,
            "degenerate": r.degenerate,
        }
        for r in reports
    ]
    return pd.DataFrame(rows, columns=TIMESERIES_COLUMNS)


def degree_histogram(values: np.ndarray, bin_width: float = 0.1) -> pd.DataFrame:
    """Counts of ``values`` in bins ``[k w, (k+1) w)`` aligned on multiples of ``bin_width``."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return pd.DataFrame({"bin_left": [], "bin_right": [], "count": []})
    lo = int(np.floor(values.min() / bin_width))
    hi = int(np.floor(values.max() / bin_width))
    idx = np.floor(values / bin_width).astype(int) - lo
    counts = np.bincount(idx, minlength=hi - lo + 1)
    left = (np.arange(lo, hi + 1)) * bin_width
    return pd.DataFrame({"bin_left": left, "bin_right": left + bin_width, "count": counts})
