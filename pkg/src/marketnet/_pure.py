"""Pure-Python/NumPy implementations of the numerical kernels.

These mirror the compiled routines in ``_native.pyx`` one-to-one and are used
when the extension is not built (or ``MARKETNET_PURE_PYTHON=1``).  The GARCH
and DCC filters are vectorised with ``scipy.signal.lfilter`` rather than
looped, so they double as an independent route for parity tests.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.signal import lfilter

BACKEND = "python"

_LOG_2PI = math.log(2.0 * math.pi)


def lasso_cd_gram(G, c, lam, beta, tol, max_iter):
    """Coordinate descent on the covariance form of the lasso.

    Minimises ``0.5 * b'Gb - c'b + lam * |b|_1`` in place on ``beta``.
    Alternates full sweeps with sweeps restricted to the active set.

    Returns
    -------
    (n_sweeps, max_change, converged)
    """
    p = G.shape[0]
    r = c - G @ beta
    diag = np.diag(G).copy()
    sweeps = 0
    full = True
    max_change = math.inf
    while sweeps < max_iter:
        sweeps += 1
        idx = range(p) if full else np.flatnonzero(beta).tolist()
        max_change = 0.0
        for j in idx:
            old = beta[j]
            z = r[j] + diag[j] * old
            if z > lam:
                new = (z - lam) / diag[j]
            elif z < -lam:
                new = (z + lam) / diag[j]
            else:
                new = 0.0
            d = new - old
            if d != 0.0:
                beta[j] = new
                r -= G[:, j] * d
                if abs(d) > max_change:
                    max_change = abs(d)
        if max_change < tol:
            if full:
                return sweeps, max_change, True
            full = True
        else:
            full = False
    return sweeps, max_change, False


def jacobi_eigh(A, tol, max_sweeps):
    """Cyclic Jacobi eigenvalue iteration for a symmetric matrix.

    Returns ``(w, V, off, sweeps)`` with unsorted eigenvalues ``w`` and
    eigenvectors in the columns of ``V``.  ``off`` is the Frobenius norm of
    the off-diagonal part at exit.
    """
    a = np.array(A, dtype=float, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    sweeps = 0
    off = _offdiag_norm(a)
    while off > tol and sweeps < max_sweeps:
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                cs = 1.0 / math.sqrt(t * t + 1.0)
                sn = t * cs
                colp = a[:, p].copy()
                colq = a[:, q]
                a[:, p] = cs * colp - sn * colq
                a[:, q] = sn * colp + cs * colq
                rowp = a[p, :].copy()
                rowq = a[q, :]
                a[p, :] = cs * rowp - sn * rowq
                a[q, :] = sn * rowp + cs * rowq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = cs * vp - sn * vq
                v[:, q] = sn * vp + cs * vq
        off = _offdiag_norm(a)
    return np.diag(a).copy(), v, off, sweeps


def _offdiag_norm(a):
    off = a - np.diag(np.diag(a))
    return math.sqrt(float(np.sum(off * off)))


def garch_loglik(y, theta, h0, want_grad):
    """Gaussian log-likelihood of an ARMA(1,1)-GARCH(1,1) model.

    ``theta = (mu, phi, psi, omega, alpha, beta)``.  The recursion starts at
    ``e[0] = 0`` and ``h[0] = h0`` and the likelihood sums ``t = 1..T-1``.

    Returns ``(loglik, grad, e, h)``; ``grad`` is ``None`` unless requested.
    A non-positive or non-finite variance gives ``loglik = -inf``.
    """
    mu, phi, psi, omega, alpha, beta = (float(v) for v in theta)
    y = np.asarray(y, dtype=float)
    T = y.shape[0]
    dev = y - mu
    x = dev[1:] - phi * dev[:-1]
    den = [1.0, psi]
    e = np.zeros(T)
    e[1:] = lfilter([1.0], den, x)
    e2 = e * e
    h = np.empty(T)
    h[0] = h0
    u = omega + alpha * e2[:-1]
    h[1:] = lfilter([1.0], [1.0, -beta], u, zi=[beta * h0])[0]
    if not np.all(np.isfinite(h)) or np.any(h[1:] <= 0.0):
        return -math.inf, None, e, h
    hh = h[1:]
    ee = e[1:]
    ll = -0.5 * float(np.sum(_LOG_2PI + np.log(hh) + ee * ee / hh))
    if not want_grad:
        return ll, None, e, h

    m = T - 1
    de = np.zeros((3, T))
    de[0, 1:] = lfilter([1.0], den, np.full(m, phi - 1.0))
    de[1, 1:] = lfilter([1.0], den, -dev[:-1])
    de[2, 1:] = lfilter([1.0], den, -e[:-1])
    dh = np.zeros((6, T))
    ar = [1.0, -beta]
    for k in range(3):
        dh[k, 1:] = lfilter([1.0], ar, 2.0 * alpha * e[:-1] * de[k, :-1])
    dh[3, 1:] = lfilter([1.0], ar, np.ones(m))
    dh[4, 1:] = lfilter([1.0], ar, e2[:-1])
    dh[5, 1:] = lfilter([1.0], ar, h[:-1])
    w = 1.0 - ee * ee / hh
    grad = np.empty(6)
    for k in range(6):
        g = -0.5 * np.sum(dh[k, 1:] / hh * w)
        if k < 3:
            g -= np.sum(ee * de[k, 1:] / hh)
        grad[k] = g
    return ll, grad, e, h


def dcc_correlations(Z, Qbar, a, b):
    """Conditional correlation path ``R_t`` of a DCC(1,1) recursion."""
    Z = np.asarray(Z, dtype=float)
    T, n = Z.shape
    S = np.einsum("ti,tj->tij", Z, Z).reshape(T, n * n)
    Q = np.empty((T, n * n))
    Q[0] = Qbar.reshape(-1)
    if T > 1:
        u = (1.0 - a - b) * Qbar.reshape(1, -1) + a * S[:-1]
        Q[1:] = lfilter([1.0], [1.0, -b], u, axis=0, zi=(b * Qbar).reshape(1, -1))[0]
    Q = Q.reshape(T, n, n)
    d = np.sqrt(np.einsum("tii->ti", Q))
    return Q / (d[:, :, None] * d[:, None, :])


def dcc_loglik(Z, Qbar, a, b):
    """Correlation part of the DCC quasi log-likelihood."""
    Z = np.asarray(Z, dtype=float)
    R = dcc_correlations(Z, Qbar, a, b)
    try:
        L = np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        return -math.inf
    logdet = 2.0 * np.sum(np.log(np.einsum("tii->ti", L)), axis=1)
    sol = np.linalg.solve(L, Z[:, :, None])[:, :, 0]
    quad = np.sum(sol * sol, axis=1)
    zz = np.sum(Z * Z, axis=1)
    ll = -0.5 * float(np.sum(logdet + quad - zz))
    return ll if math.isfinite(ll) else -math.inf
