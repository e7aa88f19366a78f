"""Empirical dual objective, gradient, and log-domain Sinkhorn solver.

The dual objective for measures mu = sum_i u_i delta_{x_i} and
nu = sum_j w_j delta_{y_j} with potentials (f, g) is

    Phi(f, g) = sum_i u_i f_i + sum_j w_j g_j
                - (1/eta) sum_ij u_i w_j exp(-eta(|x_i - y_j|^2 - f_i - g_j))
                + 1/eta.

With uniform weights 1/n this is the empirical objective; with general
weights the same formula evaluates the population objective on a
finite-support truth.  The solver alternates exact block maximizations
(log-domain Sinkhorn updates) and stops on the weighted gradient norm

    |grad Phi|^2 = sum_i u_i (1 - sum_j w_j p_ij)^2
                 + sum_j w_j (1 - sum_i u_i p_ij)^2,

with p_ij = exp(-eta(|x_i - y_j|^2 - f_i - g_j)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from entot import kernels
from entot.measures import Config, DiscreteMeasure, validate_support


class UnboundedSupportError(ValueError):
    """Raised when input measures violate the radius-1/2 support bound."""


@dataclass(frozen=True)
class PotentialPair:
    """Dual potential values on the support points of the two measures.

    ``normalized`` means the weighted mean of ``g`` under the second
    measure is zero, which pins down the translation freedom
    (f, g) -> (f + c, g - c).
    """

    f: np.ndarray
    g: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        f = np.ascontiguousarray(self.f, dtype=np.float64)
        g = np.ascontiguousarray(self.g, dtype=np.float64)
        if f.ndim != 1 or g.ndim != 1:
            raise ValueError("potentials must be vectors")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise ValueError("potentials must be finite")
        f.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)


@dataclass(frozen=True)
class CostMatrixView:
    """Pairwise squared Euclidean distances between two supports."""

    values: np.ndarray
    mu: DiscreteMeasure
    nu: DiscreteMeasure


@dataclass(frozen=True)
class SolveReport:
    """Solver output: converged potentials plus diagnostics.

    Carries the measures and configuration it was produced from so that
    downstream estimators (extensions, cost, maps) need no extra inputs.
    """

    potentials: PotentialPair
    dual_value: float
    gradient_norm: float
    iterations: int
    converged: bool
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    eta: float
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "f": self.potentials.f.tolist(),
            "g": self.potentials.g.tolist(),
            "dual_value": self.dual_value,
            "gradient_norm": self.gradient_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "eta": self.eta,
            "tolerance": self.tolerance,
        }


def cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure) -> CostMatrixView:
    """Squared Euclidean cost between the supports of mu and nu."""
    if mu.dim != nu.dim:
        raise ValueError("dimension mismatch between measures")
    x, y = mu.points, nu.points
    sq = (x**2).sum(axis=1)[:, None] + (y**2).sum(axis=1)[None, :] - 2.0 * x @ y.T
    np.maximum(sq, 0.0, out=sq)
    return CostMatrixView(values=np.ascontiguousarray(sq), mu=mu, nu=nu)


def _check_pair(mu: DiscreteMeasure, nu: DiscreteMeasure, fg: PotentialPair):
    if fg.f.shape != (mu.size,) or fg.g.shape != (nu.size,):
        raise ValueError("potential lengths must match the measure supports")


def dual_objective(mu: DiscreteMeasure, nu: DiscreteMeasure, fg: PotentialPair, eta: float) -> float:
    """Value of the dual objective Phi at (f, g)."""
    _check_pair(mu, nu, fg)
    C = cost_matrix(mu, nu).values
    return kernels.dual_value(
        C, mu.weights, nu.weights, mu.log_weights(), nu.log_weights(), fg.f, fg.g, eta
    )


def dual_gradient(mu: DiscreteMeasure, nu: DiscreteMeasure, fg: PotentialPair, eta: float):
    """Gradient of Phi: (u_i (1 - sum_j w_j p_ij), w_j (1 - sum_i u_i p_ij))."""
    _check_pair(mu, nu, fg)
    C = cost_matrix(mu, nu).values
    rowres, colres = kernels.marginal_residuals(
        C, mu.log_weights(), nu.log_weights(), fg.f, fg.g, eta
    )
    return mu.weights * rowres, nu.weights * colres


def gradient_norm(mu: DiscreteMeasure, nu: DiscreteMeasure, fg: PotentialPair, eta: float) -> float:
    """Weighted norm of the dual gradient (the solver's stopping quantity)."""
    _check_pair(mu, nu, fg)
    C = cost_matrix(mu, nu).values
    rowres, colres = kernels.marginal_residuals(
        C, mu.log_weights(), nu.log_weights(), fg.f, fg.g, eta
    )
    return float(np.sqrt(mu.weights @ rowres**2 + nu.weights @ colres**2))


def recenter(fg: PotentialPair, reference: DiscreteMeasure) -> PotentialPair:
    """Shift to (f + c, g - c) with c the weighted mean of g under reference."""
    if fg.g.shape != (reference.size,):
        raise ValueError("g must be indexed by the reference support")
    c = float(reference.weights @ fg.g)
    return PotentialPair(f=fg.f + c, g=fg.g - c, normalized=True)


def sinkhorn_solve(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    cfg: Config,
    init: PotentialPair | None = None,
) -> SolveReport:
    """Solve the dual problem by alternating exact block updates.

    Refuses measures outside the radius-1/2 ball rather than rescaling
    them (rescaling changes the effective regularization).  After
    convergence the pair is recentered so the weighted mean of g is 0;
    translation invariance makes this free.  Non-convergence within
    ``max_iterations`` is reported, not raised.
    """
    if not (validate_support(mu) and validate_support(nu)):
        raise UnboundedSupportError(
            "supports must lie in the ball of radius 1/2; run normalization first"
        )
    view = cost_matrix(mu, nu)
    if init is not None:
        _check_pair(mu, nu, init)
        f = init.f.copy()
        g = init.g.copy()
    else:
        f = np.zeros(mu.size)
        g = np.zeros(nu.size)
    norm, iters, converged = kernels.sinkhorn_loop(
        view.values,
        mu.weights,
        nu.weights,
        mu.log_weights(),
        nu.log_weights(),
        f,
        g,
        cfg.eta,
        cfg.tolerance,
        cfg.max_iterations,
    )
    pair = recenter(PotentialPair(f=f, g=g), nu)
    value = kernels.dual_value(
        view.values, mu.weights, nu.weights, mu.log_weights(), nu.log_weights(),
        pair.f, pair.g, cfg.eta,
    )
    return SolveReport(
        potentials=pair,
        dual_value=float(value),
        gradient_norm=float(norm),
        iterations=int(iters),
        converged=bool(converged),
        mu=mu,
        nu=nu,
        eta=cfg.eta,
        tolerance=cfg.tolerance,
    )


def _require_in_SL(fg: PotentialPair, nu: DiscreteMeasure, L: float):
    if max(np.abs(fg.f).max(), np.abs(fg.g).max()) > L + 1e-9:
        raise ValueError(f"potentials exceed the sup-norm bound L={L}")
    if abs(float(nu.weights @ fg.g)) > 1e-10:
        raise ValueError("weighted mean of g must be 0")


def pl_gap_certificate(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    fg: PotentialPair,
    solution: PotentialPair,
    eta: float,
    L: float,
):
    """Polyak-Lojasiewicz certificate: suboptimality vs squared gradient norm.

    Returns (lhs, rhs) with lhs = Phi(solution) - Phi(fg) and
    rhs = e^{eta(2L+1)} / (2 eta) * |grad Phi(fg)|^2; lhs <= rhs for any
    fg in the set S_L of centered pairs with sup norm at most L.
    """
    _require_in_SL(fg, nu, L)
    lhs = dual_objective(mu, nu, solution, eta) - dual_objective(mu, nu, fg, eta)
    rhs = math.exp(eta * (2 * L + 1)) / (2 * eta) * gradient_norm(mu, nu, fg, eta) ** 2
    return lhs, rhs


def strong_concavity_certificate(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    fg: PotentialPair,
    other: PotentialPair,
    eta: float,
    L: float,
):
    """Strong-concavity certificate over S_L with modulus eta e^{-eta(2L+1)}.

    Returns (lhs, rhs) with lhs = Phi(fg) - Phi(other) and
    rhs = <grad Phi(fg), fg - other> + (delta/2) |fg - other|_n^2;
    concavity means lhs >= rhs.
    """
    _require_in_SL(fg, nu, L)
    _require_in_SL(other, nu, L)
    delta = eta * math.exp(-eta * (2 * L + 1))
    lhs = dual_objective(mu, nu, fg, eta) - dual_objective(mu, nu, other, eta)
    grad_f, grad_g = dual_gradient(mu, nu, fg, eta)
    df = fg.f - other.f
    dg = fg.g - other.g
    inner = float(grad_f @ df + grad_g @ dg)
    norm2 = float(mu.weights @ df**2 + nu.weights @ dg**2)
    rhs = inner + 0.5 * delta * norm2
    return lhs, rhs
