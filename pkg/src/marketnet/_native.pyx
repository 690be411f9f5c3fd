# cython: language_level=3
"""Compiled kernels. Same signatures and semantics as ``marketnet._pure``."""
import numpy as np

from libc.math cimport sqrt, log, fabs, INFINITY, isfinite

BACKEND = "cython"

cdef double LOG_2PI = 1.8378770664093453


cdef (int, double, bint) _lasso_core(const double[:, ::1] G, const double[:] c,
                                     double lam, double[::1] beta, double[::1] r,
                                     double tol, int max_iter) noexcept nogil:
    cdef Py_ssize_t p = G.shape[0]
    cdef Py_ssize_t j, k
    cdef int sweeps = 0
    cdef bint full = True
    cdef double max_change = INFINITY
    cdef double old, z, new, d, gjj
    for j in range(p):
        z = c[j]
        for k in range(p):
            z -= G[j, k] * beta[k]
        r[j] = z
    while sweeps < max_iter:
        sweeps += 1
        max_change = 0.0
        for j in range(p):
            old = beta[j]
            if not full and old == 0.0:
                continue
            gjj = G[j, j]
            z = r[j] + gjj * old
            if z > lam:
                new = (z - lam) / gjj
            elif z < -lam:
                new = (z + lam) / gjj
            else:
                new = 0.0
            d = new - old
            if d != 0.0:
                beta[j] = new
                for k in range(p):
                    r[k] -= G[k, j] * d
                if fabs(d) > max_change:
                    max_change = fabs(d)
        if max_change < tol:
            if full:
                return sweeps, max_change, True
            full = True
        else:
            full = False
    return sweeps, max_change, False


def lasso_cd_gram(G, c, double lam, double[::1] beta, double tol, int max_iter):
    cdef const double[:, ::1] Gv = np.ascontiguousarray(G, dtype=np.float64)
    cdef const double[:] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef double[::1] r = np.empty(Gv.shape[0])
    cdef int sweeps
    cdef double max_change
    cdef bint ok
    with nogil:
        sweeps, max_change, ok = _lasso_core(Gv, cv, lam, beta, r, tol, max_iter)
    return sweeps, max_change, bool(ok)


cdef double _offdiag(double[:, ::1] a) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j
    cdef double s = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                s += a[i, j] * a[i, j]
    return sqrt(s)


def jacobi_eigh(A, double tol, int max_sweeps):
    cdef double[:, ::1] a = np.array(A, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = a.shape[0]
    V = np.eye(n)
    cdef double[:, ::1] v = V
    cdef Py_ssize_t p, q, k
    cdef int sweeps = 0
    cdef double apq, theta, t, cs, sn, x, y
    cdef double off
    with nogil:
        off = _offdiag(a)
        while off > tol and sweeps < max_sweeps:
            sweeps += 1
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                    cs = 1.0 / sqrt(t * t + 1.0)
                    sn = t * cs
                    for k in range(n):
                        x = a[k, p]
                        y = a[k, q]
                        a[k, p] = cs * x - sn * y
                        a[k, q] = sn * x + cs * y
                    for k in range(n):
                        x = a[p, k]
                        y = a[q, k]
                        a[p, k] = cs * x - sn * y
                        a[q, k] = sn * x + cs * y
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for k in range(n):
                        x = v[k, p]
                        y = v[k, q]
                        v[k, p] = cs * x - sn * y
                        v[k, q] = sn * x + cs * y
            off = _offdiag(a)
    w = np.array([a[k, k] for k in range(n)], dtype=np.float64)
    return w, V, off, sweeps


def garch_loglik(y_in, theta, double h0, bint want_grad):
    cdef const double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t T = y.shape[0]
    cdef double mu = theta[0], phi = theta[1], psi = theta[2]
    cdef double omega = theta[3], alpha = theta[4], beta = theta[5]
    E = np.zeros(T)
    H = np.empty(T)
    cdef double[::1] e = E
    cdef double[::1] h = H
    cdef double[6] g
    cdef double[3] de_prev
    cdef double[3] de_cur
    cdef double[6] dh_prev
    cdef double[6] dh_cur
    cdef Py_ssize_t t, k
    cdef double ll = 0.0, w, dev, devprev
    cdef bint bad = False
    for k in range(6):
        g[k] = 0.0
        dh_prev[k] = 0.0
    for k in range(3):
        de_prev[k] = 0.0
    h[0] = h0
    with nogil:
        for t in range(1, T):
            dev = y[t] - mu
            devprev = y[t - 1] - mu
            e[t] = dev - phi * devprev - psi * e[t - 1]
            h[t] = omega + alpha * e[t - 1] * e[t - 1] + beta * h[t - 1]
            if not (h[t] > 0.0) or not isfinite(h[t]):
                bad = True
                break
            ll += -0.5 * (LOG_2PI + log(h[t]) + e[t] * e[t] / h[t])
            if want_grad:
                de_cur[0] = (phi - 1.0) - psi * de_prev[0]
                de_cur[1] = -devprev - psi * de_prev[1]
                de_cur[2] = -e[t - 1] - psi * de_prev[2]
                for k in range(3):
                    dh_cur[k] = 2.0 * alpha * e[t - 1] * de_prev[k] + beta * dh_prev[k]
                dh_cur[3] = 1.0 + beta * dh_prev[3]
                dh_cur[4] = e[t - 1] * e[t - 1] + beta * dh_prev[4]
                dh_cur[5] = h[t - 1] + beta * dh_prev[5]
                w = 1.0 - e[t] * e[t] / h[t]
                for k in range(6):
                    g[k] += -0.5 * dh_cur[k] / h[t] * w
                for k in range(3):
                    g[k] -= e[t] * de_cur[k] / h[t]
                for k in range(3):
                    de_prev[k] = de_cur[k]
                for k in range(6):
                    dh_prev[k] = dh_cur[k]
    if bad or not isfinite(ll):
        return -np.inf, None, E, H
    if not want_grad:
        return ll, None, E, H
    return ll, np.array([g[k] for k in range(6)]), E, H


cdef bint _corr_step(double[:, ::1] Q, double[:, ::1] R, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(n):
        if not (Q[i, i] > 0.0):
            return False
    for i in range(n):
        for j in range(n):
            R[i, j] = Q[i, j] / sqrt(Q[i, i] * Q[j, j])
    return True


def dcc_correlations(Z_in, Qbar_in, double a, double b):
    cdef const double[:, ::1] Z = np.ascontiguousarray(Z_in, dtype=np.float64)
    cdef const double[:, ::1] Qbar = np.ascontiguousarray(Qbar_in, dtype=np.float64)
    cdef Py_ssize_t T = Z.shape[0], n = Z.shape[1]
    Rarr = np.empty((T, n, n))
    cdef double[:, :, ::1] Rv = Rarr
    cdef double[:, ::1] Q = np.array(Qbar_in, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] R = np.empty((n, n))
    cdef double c0 = 1.0 - a - b
    cdef Py_ssize_t t, i, j
    with nogil:
        for t in range(T):
            if t > 0:
                for i in range(n):
                    for j in range(n):
                        Q[i, j] = c0 * Qbar[i, j] + a * Z[t - 1, i] * Z[t - 1, j] + b * Q[i, j]
            _corr_step(Q, R, n)
            for i in range(n):
                for j in range(n):
                    Rv[t, i, j] = R[i, j]
    return Rarr


def dcc_loglik(Z_in, Qbar_in, double a, double b):
    cdef const double[:, ::1] Z = np.ascontiguousarray(Z_in, dtype=np.float64)
    cdef const double[:, ::1] Qbar = np.ascontiguousarray(Qbar_in, dtype=np.float64)
    cdef Py_ssize_t T = Z.shape[0], n = Z.shape[1]
    cdef double[:, ::1] Q = np.array(Qbar_in, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] R = np.empty((n, n))
    cdef double[:, ::1] L = np.zeros((n, n))
    cdef double[::1] sol = np.empty(n)
    cdef double c0 = 1.0 - a - b
    cdef double ll = 0.0, s, logdet, quad, zz
    cdef Py_ssize_t t, i, j, k
    cdef bint bad = False
    with nogil:
        for t in range(T):
            if t > 0:
                for i in range(n):
                    for j in range(n):
                        Q[i, j] = c0 * Qbar[i, j] + a * Z[t - 1, i] * Z[t - 1, j] + b * Q[i, j]
            if not _corr_step(Q, R, n):
                bad = True
                break
            # Cholesky R = L L'
            for j in range(n):
                s = R[j, j]
                for k in range(j):
                    s -= L[j, k] * L[j, k]
                if not (s > 0.0):
                    bad = True
                    break
                L[j, j] = sqrt(s)
                for i in range(j + 1, n):
                    s = R[i, j]
                    for k in range(j):
                        s -= L[i, k] * L[j, k]
                    L[i, j] = s / L[j, j]
            if bad:
                break
            logdet = 0.0
            quad = 0.0
            zz = 0.0
            for i in range(n):
                s = Z[t, i]
                for k in range(i):
                    s -= L[i, k] * sol[k]
                sol[i] = s / L[i, i]
                logdet += 2.0 * log(L[i, i])
                quad += sol[i] * sol[i]
                zz += Z[t, i] * Z[t, i]
            ll += -0.5 * (logdet + quad - zz)
    if bad or not isfinite(ll):
        return -np.inf
    return ll
