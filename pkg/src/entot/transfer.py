"""Transfer learning on top of the empirical coupling.

Labels are observed on the target sample only; the plug-in regression
pushes them through the extended coupling density, and thresholding at
1/2 gives the plug-in classifier.  Excess risk against the Bayes rule is
computed exactly on finite-support truths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from entot.extension import ExtendedPotentials, _as_queries, _sq_dists
from entot.oracle import PopulationTruth


@dataclass(frozen=True)
class LabeledSample:
    """Target points with real labels bounded by 1 in absolute value."""

    y_points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        y = np.ascontiguousarray(self.y_points, dtype=np.float64)
        a = np.ascontiguousarray(self.labels, dtype=np.float64)
        if y.ndim != 2 or a.shape != (y.shape[0],):
            raise ValueError("labels must align with the target points")
        if np.any(np.abs(a) > 1 + 1e-12):
            raise ValueError("labels must satisfy |A| <= 1")
        y.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "y_points", y)
        object.__setattr__(self, "labels", a)


@dataclass(frozen=True)
class MarginScenario:
    """Mammen-Tsybakov margin setup: exponent, constant, class-1 probabilities."""

    alpha: float
    C0: float
    class1_probs: np.ndarray

    def __post_init__(self):
        if self.alpha < 0 or self.C0 <= 0:
            raise ValueError("alpha must be >= 0 and C0 > 0")
        p = np.ascontiguousarray(self.class1_probs, dtype=np.float64)
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("class probabilities must lie in [0, 1]")
        p.flags.writeable = False
        object.__setattr__(self, "class1_probs", p)


def _check_alignment(ext: ExtendedPotentials, labeled: LabeledSample):
    if labeled.y_points.shape != ext.nu.points.shape or not np.array_equal(
        labeled.y_points, ext.nu.points
    ):
        raise ValueError("labels must be aligned with the solver's target sample")


def plugin_regression(ext: ExtendedPotentials, labeled: LabeledSample, x):
    """Plug-in regression h(x) = sum_j w_j A_j p(x, Y_j).

    The density row normalizes to total mass 1 at any query point, so the
    value is a convex combination of the labels.
    """
    _check_alignment(ext, labeled)
    q, single = _as_queries(x, ext.nu.dim)
    E = ext.nu.log_weights()[None, :] - ext.eta * _sq_dists(ext.nu.points, q) \
        + ext.eta * ext.potentials.g[None, :]
    E -= E.max(axis=1, keepdims=True)
    coef = np.exp(E)
    coef /= coef.sum(axis=1, keepdims=True)
    vals = coef @ labeled.labels
    return float(vals[0]) if single else vals


def stationarity_residual(ext: ExtendedPotentials, labeled: LabeledSample) -> float:
    """Max first-order-condition residual of the weighted least squares fit.

    h minimizes sum_ij u_i w_j p_ij (h(x_i) - A_j)^2 iff at every source
    point h(x_i) equals the p-weighted label mean; returns the largest
    deviation over the source sample.
    """
    _check_alignment(ext, labeled)
    from entot.extension import sample_density

    p = sample_density(ext).values
    w = ext.nu.weights
    optimal = (p * w[None, :]) @ labeled.labels / (p @ w)
    h = np.atleast_1d(plugin_regression(ext, labeled, ext.mu.points))
    return float(np.abs(h - optimal).max())


def plugin_classifier(ext: ExtendedPotentials, labeled: LabeledSample, x):
    """Threshold the plug-in regression at 1/2; ties go to class 0."""
    if not np.all(np.isin(labeled.labels, (0.0, 1.0))):
        raise ValueError("classification requires binary labels")
    h = plugin_regression(ext, labeled, x)
    if np.isscalar(h):
        return int(h > 0.5)
    return (h > 0.5).astype(int)


def bayes_classifier(h_star: np.ndarray) -> np.ndarray:
    return (np.asarray(h_star) > 0.5).astype(int)


def excess_risk(truth: PopulationTruth, h_star: np.ndarray, decisions: np.ndarray) -> float:
    """Exact excess risk of per-atom decisions against the Bayes rule.

    Equals E_mu[|2 h_star - 1| * 1{decision differs from Bayes}]; always
    nonnegative.
    """
    h_star = np.asarray(h_star, dtype=np.float64)
    decisions = np.asarray(decisions)
    if h_star.shape != (truth.mu.size,) or decisions.shape != (truth.mu.size,):
        raise ValueError("need one regression value and one decision per mu atom")
    bayes = bayes_classifier(h_star)
    disagree = decisions != bayes
    return float((truth.mu.weights * np.abs(2.0 * h_star - 1.0) * disagree).sum())
