"""Pure-numpy fallback for the log-domain inner-loop kernels.

Mirrors the compiled module's interface exactly; selected at import time
by :mod:`entot.kernels` when the extension is unavailable or when
``ENTOT_PURE_PYTHON`` is set.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp


def update_f(C, logu, logw, f, g, eta):
    f[:] = -logsumexp(logw[None, :] + eta * (g[None, :] - C), axis=1) / eta


def update_g(C, logu, logw, f, g, eta):
    g[:] = -logsumexp(logu[:, None] + eta * (f[:, None] - C), axis=0) / eta


def marginal_residuals(C, logu, logw, f, g, eta):
    E = -eta * (C - f[:, None] - g[None, :])
    rowres = 1.0 - np.exp(logsumexp(E + logw[None, :], axis=1))
    colres = 1.0 - np.exp(logsumexp(E + logu[:, None], axis=0))
    return rowres, colres


def dual_value(C, u, w, logu, logw, f, g, eta):
    E = logu[:, None] + logw[None, :] - eta * (C - f[:, None] - g[None, :])
    total = np.exp(logsumexp(E))
    return float(u @ f + w @ g - total / eta + 1.0 / eta)


def sinkhorn_loop(C, u, w, logu, logw, f, g, eta, tol, max_iter):
    norm = np.inf
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        update_f(C, logu, logw, f, g, eta)
        update_g(C, logu, logw, f, g, eta)
        rowres, colres = marginal_residuals(C, logu, logw, f, g, eta)
        norm = float(np.sqrt(u @ rowres**2 + w @ colres**2))
        if norm <= tol:
            converged = True
            break
    return norm, it, converged
