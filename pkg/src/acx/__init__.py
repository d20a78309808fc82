"""acx: accuracy extrapolation for multi-class classifiers.

Given classification scores on k exchangeably sampled classes, estimate
the conditional accuracy distribution and predict the expected accuracy
at larger class counts.  The package provides the data model
(:mod:`acx.core`), four extrapolation estimators with a scikit-learn
style fit/predict interface (:mod:`acx.estimators`), self-contained
numerical solvers (:mod:`acx.solvers`), a seeded simulation laboratory
(:mod:`acx.simlab`), CSV/JSON interchange (:mod:`acx.io`), and a CLI
(``acx extrapolate | simulate | report``).
"""

from .core import (
    DecayMixture,
    DiscreteDensity,
    MomentCurve,
    ScoreMatrix,
    WinCounts,
    density_moment,
    empirical_accuracy,
    win_counts,
    win_fractions,
)
from .errors import (
    AcxError,
    ConvergenceFailure,
    DomainError,
    InfeasibleStart,
    MaxIterations,
    MissingClass,
    NoBracket,
    ParseError,
    RangeError,
    SingularCovariance,
    TieDetected,
    ToleranceNotMet,
)
from .estimators import (
    ESTIMATORS,
    ConsConfig,
    ConsDiagnostics,
    ConstrainedPseudolikelihoodEstimator,
    ExponentialMixtureExtrapolator,
    HdCurveParams,
    HighDimensionalExtrapolator,
    UnbiasedMomentEstimator,
    constrained_pmle,
    default_kappa_grid,
    exp_extrapolate,
    fit_decay_mixture,
    gaussian_accuracy,
    gaussian_effect_size,
    gaussian_extrapolate,
    unbiased_moments,
)
from .simlab import (
    ClassEnsemble,
    ClassifierSpec,
    MetaConfig,
    centroid_score,
    conditional_accuracy_oracle,
    gnb_score,
    qda_score,
    run_replication,
    sample_conditional_accuracy,
    sample_ensemble,
    score_matrix,
    true_accuracy_mc,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
