# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled log-domain kernels for the dual ascent inner loop.

Every sum of exponentials is evaluated as a max-shifted log-sum-exp so
the exponents (which scale with eta) never overflow.  All entry points
release the GIL, so trials can run on a thread pool.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, log


cdef void _update_f(const double[:, ::1] C, const double[::1] logw,
                    double[::1] f, double[::1] g, double eta) nogil:
    cdef Py_ssize_t m = C.shape[0], k = C.shape[1], i, j
    cdef double mx, s, v
    for i in range(m):
        mx = -INFINITY
        for j in range(k):
            v = logw[j] + eta * (g[j] - C[i, j])
            if v > mx:
                mx = v
        s = 0.0
        for j in range(k):
            s += exp(logw[j] + eta * (g[j] - C[i, j]) - mx)
        f[i] = -(mx + log(s)) / eta


cdef void _update_g(const double[:, ::1] C, const double[::1] logu,
                    double[::1] f, double[::1] g, double eta,
                    double[::1] cmax, double[::1] csum) nogil:
    # Two row-major sweeps (max then sum) to stay cache friendly.
    cdef Py_ssize_t m = C.shape[0], k = C.shape[1], i, j
    cdef double v
    for j in range(k):
        cmax[j] = -INFINITY
        csum[j] = 0.0
    for i in range(m):
        for j in range(k):
            v = logu[i] + eta * (f[i] - C[i, j])
            if v > cmax[j]:
                cmax[j] = v
    for i in range(m):
        for j in range(k):
            csum[j] += exp(logu[i] + eta * (f[i] - C[i, j]) - cmax[j])
    for j in range(k):
        g[j] = -(cmax[j] + log(csum[j])) / eta


cdef void _residuals(const double[:, ::1] C, const double[::1] logu, const double[::1] logw,
                     const double[::1] f, const double[::1] g, double eta,
                     double[::1] rowres, double[::1] colres,
                     double[::1] cmax, double[::1] csum) nogil:
    # rowres[i] = 1 - sum_j w_j p_ij ; colres[j] = 1 - sum_i u_i p_ij
    cdef Py_ssize_t m = C.shape[0], k = C.shape[1], i, j
    cdef double mx, s, v
    for i in range(m):
        mx = -INFINITY
        for j in range(k):
            v = logw[j] - eta * (C[i, j] - f[i] - g[j])
            if v > mx:
                mx = v
        s = 0.0
        for j in range(k):
            s += exp(logw[j] - eta * (C[i, j] - f[i] - g[j]) - mx)
        rowres[i] = 1.0 - exp(mx) * s
    for j in range(k):
        cmax[j] = -INFINITY
        csum[j] = 0.0
    for i in range(m):
        for j in range(k):
            v = logu[i] - eta * (C[i, j] - f[i] - g[j])
            if v > cmax[j]:
                cmax[j] = v
    for i in range(m):
        for j in range(k):
            csum[j] += exp(logu[i] - eta * (C[i, j] - f[i] - g[j]) - cmax[j])
    for j in range(k):
        colres[j] = 1.0 - exp(cmax[j]) * csum[j]


cdef double _weighted_norm(const double[::1] u, const double[::1] w,
                           const double[::1] rowres, const double[::1] colres) nogil:
    cdef Py_ssize_t i, j
    cdef double n2 = 0.0
    for i in range(u.shape[0]):
        n2 += u[i] * rowres[i] * rowres[i]
    for j in range(w.shape[0]):
        n2 += w[j] * colres[j] * colres[j]
    return n2 ** 0.5


def update_f(const double[:, ::1] C, const double[::1] logu, const double[::1] logw,
             double[::1] f, double[::1] g, double eta):
    with nogil:
        _update_f(C, logw, f, g, eta)


def update_g(const double[:, ::1] C, const double[::1] logu, const double[::1] logw,
             double[::1] f, double[::1] g, double eta):
    cmax = np.empty(C.shape[1])
    csum = np.empty(C.shape[1])
    cdef double[::1] cmax_v = cmax, csum_v = csum
    with nogil:
        _update_g(C, logu, f, g, eta, cmax_v, csum_v)


def marginal_residuals(const double[:, ::1] C, const double[::1] logu, const double[::1] logw,
                       const double[::1] f, const double[::1] g, double eta):
    rowres = np.empty(C.shape[0])
    colres = np.empty(C.shape[1])
    cmax = np.empty(C.shape[1])
    csum = np.empty(C.shape[1])
    cdef double[::1] r_v = rowres, c_v = colres, cmax_v = cmax, csum_v = csum
    with nogil:
        _residuals(C, logu, logw, f, g, eta, r_v, c_v, cmax_v, csum_v)
    return rowres, colres


def dual_value(const double[:, ::1] C, const double[::1] u, const double[::1] w,
               const double[::1] logu, const double[::1] logw,
               const double[::1] f, const double[::1] g, double eta):
    cdef Py_ssize_t m = C.shape[0], k = C.shape[1], i, j
    cdef double mx = -INFINITY, s = 0.0, lin = 0.0, v
    with nogil:
        for i in range(m):
            for j in range(k):
                v = logu[i] + logw[j] - eta * (C[i, j] - f[i] - g[j])
                if v > mx:
                    mx = v
        for i in range(m):
            for j in range(k):
                s += exp(logu[i] + logw[j] - eta * (C[i, j] - f[i] - g[j]) - mx)
        for i in range(m):
            lin += u[i] * f[i]
        for j in range(k):
            lin += w[j] * g[j]
    return lin - exp(mx) * s / eta + 1.0 / eta


def sinkhorn_loop(const double[:, ::1] C, const double[::1] u, const double[::1] w,
                  const double[::1] logu, const double[::1] logw,
                  double[::1] f, double[::1] g, double eta,
                  double tol, long max_iter):
    """Alternate exact block updates in place; stop on the gradient norm.

    Returns (grad_norm, iterations, converged).
    """
    cdef Py_ssize_t m = C.shape[0], k = C.shape[1]
    rowres = np.empty(m)
    colres = np.empty(k)
    cmax = np.empty(k)
    csum = np.empty(k)
    cdef double[::1] r_v = rowres, c_v = colres, cmax_v = cmax, csum_v = csum
    cdef double norm = INFINITY
    cdef long it = 0
    cdef bint converged = False
    with nogil:
        while it < max_iter:
            it += 1
            _update_f(C, logw, f, g, eta)
            _update_g(C, logu, f, g, eta, cmax_v, csum_v)
            _residuals(C, logu, logw, f, g, eta, r_v, c_v, cmax_v, csum_v)
            norm = _weighted_norm(u, w, r_v, c_v)
            if norm <= tol:
                converged = True
                break
    return norm, it, converged
