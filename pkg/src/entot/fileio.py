"""File formats: CSV point clouds, JSON transforms/reports/scenarios.

Point-cloud CSV: one row per point, d numeric columns, optional final
``weight`` column (signaled by a header row; a non-numeric first row is
treated as the header).  All numeric output uses 17-significant-digit
round-trip formatting.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from entot.measures import DiscreteMeasure, NormalizationTransform
from entot.oracle import PopulationTruth, compute_truth
from entot.solver import PotentialPair, SolveReport


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def read_point_rows(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Read a point-cloud CSV; returns (points, weights-or-None)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty point-cloud file")
    header = None
    if not _is_number(rows[0][0]):
        header = [c.strip().lower() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array([[float(c) for c in r] for r in rows])
    if header is not None and header[-1] == "weight":
        return np.ascontiguousarray(data[:, :-1]), np.ascontiguousarray(data[:, -1])
    return data, None


def read_measure(path) -> DiscreteMeasure:
    points, weights = read_point_rows(path)
    if weights is None:
        weights = np.full(points.shape[0], 1.0 / points.shape[0])
    return DiscreteMeasure(points=points, weights=weights)


def write_points(path, points: np.ndarray, weights: np.ndarray | None = None):
    points = np.atleast_2d(points)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if weights is not None:
            w.writerow([f"x{i}" for i in range(points.shape[1])] + ["weight"])
            for row, wt in zip(points, weights):
                w.writerow([fmt(v) for v in row] + [fmt(wt)])
        else:
            for row in points:
                w.writerow([fmt(v) for v in row])


def read_labels(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no labels")
    return np.array([float(r[0]) for r in rows])


def write_matrix(path, values: np.ndarray):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in np.atleast_2d(values):
            w.writerow([fmt(v) for v in row])


def write_transform(path, t: NormalizationTransform):
    with open(path, "w") as fh:
        json.dump(t.to_dict(), fh, indent=2)
        fh.write("\n")


def read_transform(path) -> NormalizationTransform:
    with open(path) as fh:
        return NormalizationTransform.from_dict(json.load(fh))


def write_report(path, report: SolveReport):
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")


def read_report(path, mu: DiscreteMeasure, nu: DiscreteMeasure) -> SolveReport:
    """Rebuild a SolveReport from JSON plus the measures it was solved on."""
    with open(path) as fh:
        d = json.load(fh)
    pair = PotentialPair(
        f=np.asarray(d["f"], dtype=np.float64),
        g=np.asarray(d["g"], dtype=np.float64),
        normalized=True,
    )
    if pair.f.shape != (mu.size,) or pair.g.shape != (nu.size,):
        raise ValueError("report potentials do not match the supplied measures")
    return SolveReport(
        potentials=pair,
        dual_value=float(d["dual_value"]),
        gradient_norm=float(d["gradient_norm"]),
        iterations=int(d["iterations"]),
        converged=bool(d["converged"]),
        mu=mu,
        nu=nu,
        eta=float(d["eta"]),
        tolerance=float(d["tolerance"]),
    )


def read_scenario(path, eta: float | None = None) -> tuple[PopulationTruth, dict]:
    """Load a ground-truth scenario JSON; returns (truth, label_model).

    ``eta`` overrides the scenario file's value when given.
    """
    with open(path) as fh:
        d = json.load(fh)
    if eta is not None:
        d["eta"] = eta
    mu = DiscreteMeasure(
        points=np.asarray(d["mu_points"], dtype=np.float64),
        weights=np.asarray(d["mu_weights"], dtype=np.float64),
    )
    nu = DiscreteMeasure(
        points=np.asarray(d["nu_points"], dtype=np.float64),
        weights=np.asarray(d["nu_weights"], dtype=np.float64),
    )
    truth = compute_truth(mu, nu, float(d["eta"]))
    return truth, d.get("label_model", {})


def write_curve_csv(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "trials_ok", "trials_failed", "mean", "mse", "q50", "q90", "q99"])
        for s in curve.stats:
            w.writerow(
                [s.n, s.trials_ok, s.trials_failed]
                + [fmt(v) for v in (s.mean, s.mse, s.q50, s.q90, s.q99)]
            )


def write_curve_sidecar(path, curve, spec_echo: dict):
    payload = {
        "fitted_slope": curve.fitted_slope,
        "fit_intercept": curve.fit_intercept,
        "degenerate": curve.degenerate,
        "invalid": curve.invalid,
        "spec": spec_echo,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
