"""Exact population ground truth for finite-support marginals.

The fixed-point equations are solved here by a deliberately plain scaling
iteration (direct sums of exponentials, no log-domain tricks) with a
tighter tolerance than the main solver.  This module shares nothing with
the solver beyond the data model, so it doubles as an independent
cross-implementation oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from entot.measures import DiscreteMeasure


class OracleConvergenceError(RuntimeError):
    """The plain fixed-point iteration failed to reach its tolerance."""


@dataclass(frozen=True)
class PopulationTruth:
    """Exact population coupling, potentials, cost, and regression map."""

    mu: DiscreteMeasure
    nu: DiscreteMeasure
    f_star: np.ndarray
    g_star: np.ndarray
    p_star: np.ndarray
    cost: float
    b_star: np.ndarray
    eta: float


def _pairwise_sq(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = x[:, None, :] - y[None, :, :]
    return (d * d).sum(axis=2)


def compute_truth(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    eta: float,
    tolerance: float = 1e-13,
    max_iterations: int = 500_000,
) -> PopulationTruth:
    """Solve the population fixed-point equations to near machine precision."""
    if mu.dim != nu.dim:
        raise ValueError("dimension mismatch")
    u, w = mu.weights, nu.weights
    C = _pairwise_sq(mu.points, nu.points)
    K = np.exp(-eta * C)
    a = np.ones(mu.size)
    b = np.ones(nu.size)
    norm = math.inf
    for _ in range(max_iterations):
        a = 1.0 / (K @ (w * b))
        b = 1.0 / (K.T @ (u * a))
        p = a[:, None] * K * b[None, :]
        rows = p @ w
        cols = p.T @ u
        norm = math.sqrt(float(u @ (1.0 - rows) ** 2 + w @ (1.0 - cols) ** 2))
        if norm <= tolerance:
            break
    else:
        raise OracleConvergenceError(
            f"fixed-point iteration stalled at gradient norm {norm:.3e}"
        )
    f = np.log(a) / eta
    g = np.log(b) / eta
    shift = float(w @ g)
    f = f + shift
    g = g - shift
    p_star = np.exp(-eta * (C - f[:, None] - g[None, :]))
    uw = u[:, None] * w[None, :]
    dual = float(u @ f + w @ g - (uw * p_star).sum() / eta + 1.0 / eta)
    primal = float((uw * p_star * C).sum() + (uw * p_star * np.log(p_star)).sum() / eta)
    if abs(dual - primal) > 1e-10:
        raise OracleConvergenceError(
            f"primal-dual gap {abs(dual - primal):.3e} exceeds 1e-10"
        )
    rows = p_star @ w
    b_star = (p_star * w[None, :]) @ nu.points / rows[:, None]
    return PopulationTruth(
        mu=mu, nu=nu, f_star=f, g_star=g, p_star=p_star,
        cost=dual, b_star=b_star, eta=eta,
    )


def sample_atom_indices(measure: DiscreteMeasure, n: int, rng: np.random.Generator) -> np.ndarray:
    """Atom indices of n i.i.d. draws by inverse CDF, in fixed atom order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cum = np.cumsum(measure.weights)
    cum[-1] = 1.0  # guard accumulation round-off at the top
    idx = np.searchsorted(cum, rng.random(n), side="right")
    return np.minimum(idx, measure.size - 1)


def sample_from(measure: DiscreteMeasure, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. draws by inverse CDF over the atoms; reproducible per stream."""
    return measure.points[sample_atom_indices(measure, n, rng)]


def truth_regression(truth: PopulationTruth, conditional_means) -> np.ndarray:
    """Population regression h(x_i) = sum_j w_j m(y_j) p(x_i, y_j)."""
    m = np.asarray(conditional_means, dtype=np.float64)
    if m.shape != (truth.nu.size,):
        raise ValueError("need one conditional mean per nu atom")
    return truth.p_star @ (truth.nu.weights * m)
