"""Discrete measures, support validation, and affine normalization.

All solver and estimator code assumes supports contained in the centered
Euclidean ball of radius 1/2.  Normalization is an explicit preprocessing
step: the solver refuses unnormalized data instead of rescaling silently,
because rescaling changes the effective regularization strength.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Slack allowed on the radius-1/2 support check.
SUPPORT_SLACK = 1e-12

#: Radius of the ball that supports must fit in.
SUPPORT_RADIUS = 0.5


@dataclass(frozen=True)
class DiscreteMeasure:
    """A weighted point cloud: atoms ``points[i]`` with mass ``weights[i]``.

    Weights must be nonnegative and sum to 1 within 1e-12.  Duplicate
    points are kept as separate atoms (multiset semantics).
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.ascontiguousarray(self.points, dtype=np.float64)
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] == 0:
            raise ValueError("points must be a nonempty (m, d) array")
        if weights.shape != (points.shape[0],):
            raise ValueError("weights must be a vector with one entry per point")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        total = weights.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {total!r}")
        points.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)


@dataclass(frozen=True)
class NormalizationTransform:
    """Affine map x -> (x - center) / scale taking supports into the ball."""

    center: np.ndarray
    scale: float

    def __post_init__(self):
        center = np.ascontiguousarray(self.center, dtype=np.float64)
        if center.ndim != 1:
            raise ValueError("center must be a d-vector")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        center.flags.writeable = False
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "scale", float(self.scale))

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        if points.shape[-1] != self.center.shape[0]:
            raise ValueError("dimension mismatch")
        return (points - self.center) / self.scale

    def invert_points(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        if points.shape[-1] != self.center.shape[0]:
            raise ValueError("dimension mismatch")
        return points * self.scale + self.center

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationTransform":
        return cls(center=np.asarray(d["center"], dtype=np.float64), scale=float(d["scale"]))


@dataclass(frozen=True)
class Config:
    """Solver configuration: regularization strength and stopping rule.

    ``eta`` is the regularization parameter (the KL penalty has weight
    1/eta).  The solver stops when the weighted dual gradient norm drops
    below ``tolerance``.
    """

    eta: float
    tolerance: float = 1e-10
    max_iterations: int = 10000
    seed: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


def validate_support(m: DiscreteMeasure) -> bool:
    """True iff every atom lies in the ball of radius 1/2 (tiny slack)."""
    norms = np.linalg.norm(m.points, axis=1)
    return bool(np.all(norms <= SUPPORT_RADIUS + SUPPORT_SLACK))


def fit_normalization(measures: list[DiscreteMeasure]) -> NormalizationTransform:
    """Fit the affine map sending all supports into the radius-1/2 ball.

    The center is the midpoint of the coordinate-wise bounding box over
    all points (support geometry only; weights are irrelevant), and the
    scale maps the farthest point onto the ball's boundary.
    """
    if not measures:
        raise ValueError("need at least one measure")
    dim = measures[0].dim
    if any(m.dim != dim for m in measures):
        raise ValueError("all measures must share the same dimension")
    pts = np.vstack([m.points for m in measures])
    center = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
    radius = float(np.linalg.norm(pts - center, axis=1).max())
    scale = radius / SUPPORT_RADIUS if radius > 0 else 1.0
    return NormalizationTransform(center=center, scale=scale)


def apply_normalization(t: NormalizationTransform, m: DiscreteMeasure) -> DiscreteMeasure:
    """Map every atom through the transform; weights unchanged."""
    return DiscreteMeasure(points=t.apply_points(m.points), weights=m.weights)


def invert_point(t: NormalizationTransform, x: np.ndarray) -> np.ndarray:
    """Exact inverse of the normalization map for a single point."""
    return t.invert_points(x)


def empirical_from_sample(points) -> DiscreteMeasure:
    """Uniform-weight empirical measure over an i.i.d. sample."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("sample must be a nonempty (n, d) array")
    n = points.shape[0]
    return DiscreteMeasure(points=points, weights=np.full(n, 1.0 / n))
