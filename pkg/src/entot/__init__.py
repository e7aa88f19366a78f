"""Entropic optimal transport estimation toolkit.

Solves the empirical entropic OT dual by log-domain Sinkhorn updates,
extends the solution out of sample, builds plug-in estimators of the
cost, coupling density, and entropic regression map, applies them to
label transfer, and verifies parametric convergence rates against an
exact finite-support population oracle.
"""

from entot.kernels import BACKEND
from entot.measures import (
    Config,
    DiscreteMeasure,
    NormalizationTransform,
    apply_normalization,
    empirical_from_sample,
    fit_normalization,
    invert_point,
    validate_support,
)
from entot.solver import (
    PotentialPair,
    SolveReport,
    UnboundedSupportError,
    dual_gradient,
    dual_objective,
    gradient_norm,
    recenter,
    sinkhorn_solve,
)
from entot.extension import (
    CouplingDensity,
    ExtendedPotentials,
    OutOfBallQueryWarning,
    cost_estimate,
    coupling_functional,
    density_at,
    entropic_map,
    extend_f,
    extend_g,
)
from entot.oracle import PopulationTruth, compute_truth, sample_from, truth_regression
from entot.transfer import (
    LabeledSample,
    MarginScenario,
    excess_risk,
    plugin_classifier,
    plugin_regression,
)

__version__ = "0.1.0"
