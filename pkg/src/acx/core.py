"""Core data model: score matrices, pairwise win counts, moment curves,
discrete densities on (0,1), and exponential decay mixtures.

The central object is the win count: for a test point of class ``i``
evaluated against ``k`` trained class models, ``v`` counts how many of the
``k - 1`` competitor models score strictly below the true class's model.
``v / (k - 1)`` is then an unbiased estimate of the point's conditional
accuracy, and the distribution of those conditional accuracies determines
the expected accuracy at every class count: the expected accuracy with
``t`` equiprobable classes equals the ``(t - 1)``-th moment of the
conditional accuracy distribution.

All values are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingClass, TieDetected

__all__ = [
    "ScoreMatrix",
    "WinCounts",
    "MomentCurve",
    "DiscreteDensity",
    "DecayMixture",
    "win_counts",
    "win_fractions",
    "empirical_accuracy",
    "density_moment",
]

WEIGHT_SUM_TOL = 1e-10
MONOTONE_TOL = 1e-12
_TIE_POLICIES = ("strict", "half", "random")


@dataclass(frozen=True)
class ScoreMatrix:
    """Per-test-point, per-class classification scores with true labels.

    Parameters
    ----------
    scores : ndarray of shape (n_test, k)
        Real-valued classification scores; higher means more likely.
    labels : ndarray of shape (n_test,)
        True class of each test point, 1-based in ``{1, ..., k}``.
    k : int, optional
        Class count; inferred from ``scores`` when omitted.
    """

    scores: np.ndarray
    labels: np.ndarray
    k: int = None

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if scores.ndim != 2:
            raise ValueError("scores must be a 2-d array of shape (n_test, k)")
        k = scores.shape[1] if self.k is None else int(self.k)
        if k != scores.shape[1]:
            raise ValueError(f"k={k} does not match scores with {scores.shape[1]} columns")
        if k < 2:
            raise ValueError("need at least 2 classes")
        if scores.shape[0] < 1:
            raise ValueError("need at least one test point")
        if labels.shape != (scores.shape[0],):
            raise ValueError("labels must be 1-d with one entry per test row")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        if labels.min(initial=1) < 1 or labels.max(initial=k) > k:
            raise ValueError(f"labels must lie in 1..{k}")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "k", k)

    @property
    def n_test(self):
        return self.scores.shape[0]


@dataclass(frozen=True)
class WinCounts:
    """Pairwise win counts pooled over all test points.

    ``v[j]`` is the number of competitor classes the true class of test
    point ``j`` outscored; ``class_ids[j]`` records which class the point
    belongs to.  Unequal numbers of test repeats per class are supported.

    When ``halved`` is set (the ``half`` tie policy), ``v`` stores doubled
    counts so ties can contribute 1/2 while staying integral; win
    fractions are then ``v / (2 (k - 1))``.
    """

    v: np.ndarray
    class_ids: np.ndarray
    k: int
    halved: bool = False

    def __post_init__(self):
        v = np.asarray(self.v, dtype=np.int64)
        cls = np.asarray(self.class_ids, dtype=np.int64)
        k = int(self.k)
        if k < 2:
            raise ValueError("need at least 2 classes")
        if v.ndim != 1 or cls.shape != v.shape:
            raise ValueError("v and class_ids must be 1-d arrays of equal length")
        if v.size < 1:
            raise ValueError("need at least one win count")
        if cls.min() < 1 or cls.max() > k:
            raise ValueError(f"class_ids must lie in 1..{k}")
        vmax = 2 * (k - 1) if self.halved else (k - 1)
        if v.min() < 0 or v.max() > vmax:
            raise ValueError(f"win counts must lie in 0..{vmax}")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "class_ids", cls)
        object.__setattr__(self, "k", k)

    @property
    def n_points(self):
        return self.v.size

    @property
    def counts_per_class(self):
        """Number of test repeats per class, shape (k,)."""
        return np.bincount(self.class_ids, minlength=self.k + 1)[1:]


@dataclass(frozen=True)
class MomentCurve:
    """Expected-accuracy estimates indexed by class count.

    ``p[i]`` estimates the expected accuracy with ``t[i]`` equiprobable
    classes.  Entries flagged in ``out_of_range`` keep their raw value
    even when it falls outside [0, 1]; unflagged entries must be proper
    probabilities.
    """

    t: np.ndarray
    p: np.ndarray
    source_k: int
    out_of_range: np.ndarray = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.int64)
        p = np.asarray(self.p, dtype=np.float64)
        if t.ndim != 1 or p.shape != t.shape:
            raise ValueError("t and p must be 1-d arrays of equal length")
        if t.size and (t.min() < 1 or np.any(np.diff(t) <= 0)):
            raise ValueError("t values must be >= 1 and strictly increasing")
        flags = self.out_of_range
        flags = np.zeros(t.shape, dtype=bool) if flags is None else np.asarray(flags, dtype=bool)
        bad = ~flags & ((p < 0.0) | (p > 1.0))
        if np.any(bad):
            raise ValueError("unflagged moment values must lie in [0, 1]")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "source_k", int(self.source_k))
        object.__setattr__(self, "out_of_range", flags)

    def value_at(self, t):
        """Return the estimate at class count ``t`` (exact match required)."""
        idx = np.nonzero(self.t == int(t))[0]
        if idx.size == 0:
            raise KeyError(f"no moment entry at t={t}")
        return float(self.p[idx[0]])


@dataclass(frozen=True)
class DiscreteDensity:
    """Nonnegative cell masses on the midpoint grid u_r = (r - 1/2) / M.

    Weights are cell masses summing to one, not density heights; on the
    uniform grid the two notions of monotonicity coincide.  The
    ``monotone`` flag asserts nondecreasing masses (tolerance 1e-12).
    """

    weights: np.ndarray
    monotone: bool = False

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a nonempty 1-d array")
        if w.min() < 0:
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1 within {WEIGHT_SUM_TOL}")
        if self.monotone and np.any(np.diff(w) < -MONOTONE_TOL):
            raise ValueError("monotone flag set but weights decrease")
        object.__setattr__(self, "weights", w)

    @property
    def grid_size(self):
        return self.weights.size

    @property
    def grid(self):
        """Midpoints u_r = (r - 1/2) / M for r = 1..M."""
        M = self.weights.size
        return (np.arange(1, M + 1) - 0.5) / M


@dataclass(frozen=True)
class DecayMixture:
    """Nonnegative mixture of exponential decays p(t) = sum_l w_l exp(-rate_l t).

    With nonnegative rates and weights, p(t) is automatically
    nonincreasing in t; it stays within [0, 1] whenever p(2) <= 1.
    """

    rates: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if rates.ndim != 1 or weights.shape != rates.shape:
            raise ValueError("rates and weights must be 1-d arrays of equal length")
        if rates.size and rates.min() < 0:
            raise ValueError("rates must be nonnegative")
        if weights.size and weights.min() < 0:
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "weights", weights)

    def evaluate(self, t):
        """Evaluate p(t) = sum_l w_l exp(-rate_l t) for scalar or array t."""
        t = np.asarray(t, dtype=np.float64)
        out = np.einsum("l,l...->...", self.weights,
                        np.exp(-np.multiply.outer(self.rates, t)))
        return float(out) if out.ndim == 0 else out


def _tie_rng(tie_policy, tie_seed):
    if tie_policy not in _TIE_POLICIES:
        raise ValueError(f"tie_policy must be one of {_TIE_POLICIES}")
    if tie_policy == "random":
        return np.random.default_rng(tie_seed)
    return None


def win_counts(s, tie_policy="strict", tie_seed=None):
    """Count pairwise score wins of each test point's true class.

    For test point ``j`` of class ``i``, counts the competitor classes
    whose score falls strictly below class ``i``'s score.

    Parameters
    ----------
    s : ScoreMatrix
    tie_policy : {'strict', 'half', 'random'}
        ``strict`` raises :class:`TieDetected` on any exact tie involving
        the true class; ``half`` credits ties 1/2 (stored doubled, with
        ``halved=True``); ``random`` breaks each tie with a seeded coin.
    tie_seed : int, optional
        Seed for the ``random`` policy.

    Returns
    -------
    WinCounts
    """
    rng = _tie_rng(tie_policy, tie_seed)
    rows = np.arange(s.n_test)
    true_scores = s.scores[rows, s.labels - 1]
    wins = np.sum(s.scores < true_scores[:, None], axis=1)
    ties = np.sum(s.scores == true_scores[:, None], axis=1) - 1  # self-match excluded
    if tie_policy == "strict":
        n_ties = int(ties.sum())
        if n_ties > 0:
            raise TieDetected(n_ties)
        return WinCounts(v=wins, class_ids=s.labels, k=s.k)
    if tie_policy == "half":
        return WinCounts(v=2 * wins + ties, class_ids=s.labels, k=s.k, halved=True)
    coin_wins = rng.binomial(ties, 0.5)
    return WinCounts(v=wins + coin_wins, class_ids=s.labels, k=s.k)


def win_fractions(w):
    """Fraction of pairwise comparisons won, per test point, in [0, 1].

    Values lie on the lattice {0, 1/(k-1), ..., 1} (half-steps under the
    ``half`` tie policy).
    """
    denom = 2 * (w.k - 1) if w.halved else (w.k - 1)
    return w.v / denom


def empirical_accuracy(s, tie_policy="strict", tie_seed=None):
    """Mean over classes of each class's correct-classification rate.

    A test point is correct when its true class's score is the strict
    argmax.  Ties at the top are resolved per ``tie_policy``: ``strict``
    raises, ``half`` splits the credit uniformly over the tied classes,
    ``random`` picks a seeded uniform winner among them.

    Raises
    ------
    MissingClass
        If some class in 1..k has no test points.
    """
    rng = _tie_rng(tie_policy, tie_seed)
    counts = np.bincount(s.labels, minlength=s.k + 1)[1:]
    if np.any(counts == 0):
        missing = np.nonzero(counts == 0)[0] + 1
        raise MissingClass(f"classes without test points: {missing.tolist()}")
    rows = np.arange(s.n_test)
    true_scores = s.scores[rows, s.labels - 1]
    top = s.scores.max(axis=1)
    is_top = true_scores == top
    n_tied_at_top = np.sum(s.scores == top[:, None], axis=1)
    if tie_policy == "strict":
        n_bad = int(np.sum(is_top & (n_tied_at_top > 1)))
        if n_bad > 0:
            raise TieDetected(n_bad, f"{n_bad} test point(s) tie their true class at the top score")
        credit = is_top.astype(np.float64)
    elif tie_policy == "half":
        credit = np.where(is_top, 1.0 / n_tied_at_top, 0.0)
    else:
        credit = np.where(is_top, rng.random(s.n_test) < 1.0 / n_tied_at_top, 0.0)
    per_class = np.bincount(s.labels, weights=credit, minlength=s.k + 1)[1:]
    return float(np.mean(per_class / counts))


def density_moment(d, t):
    """Moment sum_r w_r u_r^(t-1) of a discrete density; equals the
    expected accuracy with ``t`` classes under that conditional accuracy
    density.

    Nonincreasing in ``t`` for every valid density, and exactly 1 at
    ``t = 1``.
    """
    t = int(t)
    if t < 1:
        raise ValueError("t must be >= 1")
    return float(np.dot(d.weights, d.grid ** (t - 1)))
