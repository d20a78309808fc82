"""Accuracy extrapolation estimators.

Four routes from win counts observed on k classes to the expected accuracy
at a target class count t:

* unbiased moment estimation (exact for t <= k, via binomial U-statistics),
* exponential-mixture extrapolation (non-negative least squares fit of a
  mixed exponential decay to the unbiased moments, then evaluation at any t),
* constrained maximum pseudolikelihood (a nondecreasing density for the
  conditional accuracy on a grid over (0,1), with its top moment anchored
  to the unbiased estimate),
* a high-dimensional Gaussian model (invert the observed accuracy to an
  effect size, then push the effect size to the target class count).

Each route is available both as plain functions and as a scikit-learn
style estimator class with ``fit(scores, labels)`` / ``predict(t)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .core import (
    DecayMixture,
    DiscreteDensity,
    MomentCurve,
    ScoreMatrix,
    density_moment,
    win_counts,
)
from .errors import ConvergenceFailure, DomainError, MaxIterations, RangeError
from .solvers import (
    NnlsProblem,
    SimplexProgram,
    _suffix_means,
    nnls_solve,
    simplex_maximize,
)

__all__ = [
    "ConsConfig",
    "ConsDiagnostics",
    "HdCurveParams",
    "default_kappa_grid",
    "unbiased_moments",
    "fit_decay_mixture",
    "exp_extrapolate",
    "constrained_pmle",
    "gaussian_accuracy",
    "gaussian_effect_size",
    "gaussian_extrapolate",
    "BaseAccuracyExtrapolator",
    "UnbiasedMomentEstimator",
    "ExponentialMixtureExtrapolator",
    "ConstrainedPseudolikelihoodEstimator",
    "HighDimensionalExtrapolator",
    "ESTIMATORS",
]

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


# ---------------------------------------------------------------------------
# Unbiased moments and exponential-mixture extrapolation
# ---------------------------------------------------------------------------


def unbiased_moments(w, t_max=None, trials="k-1"):
    """Unbiased estimates of the expected accuracy at t = 2..t_max classes.

    For a win count V out of n = k - 1 comparisons, C(V, t-1) / C(n, t-1)
    is an unbiased estimate of u^(t-1); averaging over all test points
    gives the accuracy estimate at t classes.  Estimates exist only for
    t <= k.

    Parameters
    ----------
    w : WinCounts
    t_max : int, optional
        Largest class count to emit (default: k).
    trials : {'k-1', 'k'}
        Number of binomial trials assumed for V.  ``'k-1'`` matches the
        construction of V as a sum of k - 1 pairwise comparisons and is
        the default; ``'k'`` is provided for compatibility with the
        convention that uses C(k, t-1) denominators.

    Returns
    -------
    MomentCurve
        Entries at t = 2..t_max, with out-of-range values flagged rather
        than clamped (cannot occur under either convention here, but the
        contract is explicit).
    """
    if w.halved:
        raise ValueError("half-tie win counts are not integral binomial draws; "
                         "use tie_policy='random' or 'strict' for moment estimation")
    k = w.k
    t_max = k if t_max is None else int(t_max)
    if t_max > k:
        raise RangeError(f"moments are estimable only up to t = k = {k}, got t_max={t_max}")
    if t_max < 2:
        raise RangeError("t_max must be >= 2")
    if trials not in ("k-1", "k"):
        raise ValueError("trials must be 'k-1' or 'k'")
    n_tr = k - 1 if trials == "k-1" else k

    counts = np.bincount(w.v, minlength=k).astype(np.float64)
    vgrid = np.arange(k, dtype=np.float64)
    n_total = float(w.n_points)
    ts = np.arange(2, t_max + 1)
    ratio = np.ones(k)
    p = np.empty(ts.size)
    for i, t in enumerate(ts):
        a = t - 2
        ratio = ratio * (vgrid - a) / (n_tr - a)  # hits exact 0 at v = a and stays 0
        p[i] = counts @ ratio / n_total
    flags = (p < 0.0) | (p > 1.0)
    return MomentCurve(t=ts, p=p, source_k=k, out_of_range=flags)


def default_kappa_grid(lo=1e-4, hi=10.0, n=200):
    """Decay-rate dictionary: zero plus n log-spaced rates on [lo, hi].

    Covers everything from negligible to complete decay over class counts
    up to the tens of thousands.
    """
    return np.concatenate([[0.0], np.geomspace(lo, hi, n)])


def fit_decay_mixture(curve, kappa_grid=None):
    """Fit a nonnegative mixture of exponential decays to a moment curve.

    Solves min_w ||sum_l w_l exp(-kappa_l t) - p_t||^2 over w >= 0 for
    t = 2..source_k by non-negative least squares on the rate dictionary.

    Returns
    -------
    (DecayMixture, float)
        The fitted mixture (zero-weight atoms dropped) and the residual
        2-norm over the fit points.
    """
    k = curve.source_k
    grid = default_kappa_grid() if kappa_grid is None else np.asarray(kappa_grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("kappa_grid must be a nonempty 1-d array")
    if grid.min() < 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("kappa_grid must be nonnegative and strictly increasing")
    ts = np.arange(2, k + 1)
    try:
        b = np.array([curve.value_at(t) for t in ts])
    except KeyError as exc:
        raise ValueError(f"moment curve must contain entries for t = 2..{k}") from exc
    if ts.size < 3:
        warnings.warn(f"only {ts.size} fit point(s) for the decay mixture; "
                      "the fit is unreliable below 3", stacklevel=2)
    A = np.exp(-np.outer(ts.astype(np.float64), grid))
    x = nnls_solve(NnlsProblem(A, b), tol=1e-12)
    residual = float(np.linalg.norm(A @ x - b))
    mask = x > 0.0
    return DecayMixture(rates=grid[mask], weights=x[mask]), residual


def exp_extrapolate(mixture, moments, t):
    """Extended accuracy estimate: unbiased value for t <= k, mixture
    evaluation (clamped to [0, 1]) beyond.
    """
    t = int(t)
    if t < 2:
        raise RangeError("t must be >= 2")
    if t <= moments.source_k:
        return moments.value_at(t)
    return float(np.clip(mixture.evaluate(float(t)), 0.0, 1.0))


# ---------------------------------------------------------------------------
# Constrained maximum pseudolikelihood
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConsConfig:
    """Configuration of the constrained pseudolikelihood fit.

    ``anchor`` fixes the (k-1)-th moment of the fitted density to a band
    of halfwidth ``anchor_tol``; when None it defaults to the unbiased
    estimate at t = k.  ``tol`` is the relative objective convergence
    tolerance, ``max_iter`` the total ascent iteration cap.
    """

    grid_size: int = 512
    anchor: float = None
    anchor_tol: float = 1e-6
    max_iter: int = 50_000
    tol: float = 1e-9

    def __post_init__(self):
        if self.grid_size < 16:
            raise ValueError("grid_size must be >= 16")
        if self.anchor_tol <= 0:
            raise ValueError("anchor_tol must be positive")


@dataclass(frozen=True)
class ConsDiagnostics:
    """Solver report for a pseudolikelihood fit."""

    objective: float            # total log-pseudolikelihood at the solution
    kkt_residual: float         # simplex stationarity residual (per-point scale)
    iterations: int
    converged: bool
    anchor: float = None        # anchor actually enforced (possibly relaxed)
    anchor_gap: float = 0.0     # fitted moment minus anchor
    band_violation: float = 0.0
    anchor_relaxed: bool = False
    warnings: tuple = ()


def _collapsed_rows(w, grid):
    """Distinct win-count rows of the pseudolikelihood, max-normalized.

    Returns (B, counts, offsets): B[i, r] = exp(logB - offset_i) for the
    i-th distinct count value, counts the multiplicities, offsets the
    per-row log normalizers (so that row log-terms are log(B w) + offset).
    """
    k = w.k
    all_counts = np.bincount(w.v, minlength=k)
    vals = np.nonzero(all_counts)[0]
    logu = np.log(grid)
    log1mu = np.log1p(-grid)
    logB = vals[:, None] * logu[None, :] + (k - 1 - vals)[:, None] * log1mu[None, :]
    offsets = logB.max(axis=1)
    B = np.exp(logB - offsets[:, None])
    return B, all_counts[vals].astype(np.float64), offsets


def _fit_pseudolikelihood(w, cfg, monotone=True, use_anchor=True, w0=None):
    """Shared engine for the constrained and unconstrained fits.

    Returns (SimplexResult, offsets_term, n_total, anchor, relaxed,
    relax_warnings).  Raises ConvergenceFailure on anchor infeasibility or
    solver failure.
    """
    M = cfg.grid_size
    grid = (np.arange(1, M + 1) - 0.5) / M
    B, counts, offsets = _collapsed_rows(w, grid)
    n_total = counts.sum()
    offsets_term = float(counts @ offsets)

    def value_and_grad(wvec):
        mix = B @ wvec
        if np.min(mix) <= 0.0:
            return -np.inf, np.zeros_like(wvec)
        return float(counts @ np.log(mix)) / n_total, (B.T @ (counts / mix)) / n_total

    band = None
    anchor = None
    relax_warnings = []
    relaxed = False
    if use_anchor:
        anchor = cfg.anchor
        if anchor is None:
            anchor = unbiased_moments(w, t_max=w.k).value_at(w.k)
        a_vec = grid ** (w.k - 1)
        if monotone:
            feas = _suffix_means(a_vec)
            feas_lo, feas_hi = float(feas[0]), float(feas[-1])
        else:
            feas_lo, feas_hi = float(a_vec.min()), float(a_vec.max())
        if anchor > feas_hi + cfg.anchor_tol:
            raise ConvergenceFailure(
                f"anchor {anchor:.6g} exceeds the largest moment {feas_hi:.6g} attainable "
                f"on a {M}-cell grid; the accuracy is too close to 1 for this fit",
                closest_feasible_anchor=feas_hi,
            )
        if anchor < feas_lo - cfg.anchor_tol:
            relax_warnings.append(
                f"anchor {anchor:.6g} below the smallest attainable moment; relaxed to {feas_lo:.6g}")
            warnings.warn(relax_warnings[-1], stacklevel=3)
            anchor = feas_lo
            relaxed = True
        band = (a_vec, float(anchor), cfg.anchor_tol)

    if w0 is None:
        w0 = np.full(M, 1.0 / M)
    prog = SimplexProgram(value_and_grad=value_and_grad, n=M, monotone=monotone,
                          band=band, tol=cfg.tol, max_iter=cfg.max_iter,
                          loglin=(B, counts))
    try:
        result = simplex_maximize(prog, w0)
    except MaxIterations as exc:
        res = exc.result
        diag = ConsDiagnostics(
            objective=res.objective * n_total + offsets_term,
            kkt_residual=res.kkt_residual, iterations=res.iterations,
            converged=False, anchor=anchor, anchor_gap=res.band_gap,
            band_violation=res.band_violation, anchor_relaxed=relaxed,
            warnings=tuple(relax_warnings),
        )
        raise ConvergenceFailure(
            f"pseudolikelihood ascent hit the iteration cap {cfg.max_iter} with "
            f"KKT residual {res.kkt_residual:.3g}", diagnostics=diag) from exc
    return result, offsets_term, n_total, anchor, relaxed, relax_warnings


def constrained_pmle(w, cfg=None, w0=None):
    """Constrained pseudolikelihood density of the conditional accuracy.

    Maximizes the sum over test points of
    log( sum_r w_r u_r^v (1 - u_r)^(k-1-v) ) over cell masses w on the
    midpoint grid, subject to the simplex, nondecreasing weights, and the
    anchor band |sum_r w_r u_r^(k-1) - anchor| <= anchor_tol.

    An anchor above the largest grid-attainable moment (accuracy too close
    to 1) raises :class:`ConvergenceFailure` carrying the closest feasible
    anchor; an anchor below the smallest attainable moment is relaxed up
    to it with a warning.

    Parameters
    ----------
    w : WinCounts
    cfg : ConsConfig, optional
    w0 : ndarray, optional
        Feasible starting weights (default: uniform).

    Returns
    -------
    (DiscreteDensity, ConsDiagnostics)
    """
    if w.halved:
        raise ValueError("half-tie win counts are not integral binomial draws")
    cfg = ConsConfig() if cfg is None else cfg
    result, offsets_term, n_total, anchor, relaxed, relax_warnings = _fit_pseudolikelihood(
        w, cfg, monotone=True, use_anchor=True, w0=w0)
    density = DiscreteDensity(weights=result.w, monotone=True)
    diag = ConsDiagnostics(
        objective=result.objective * n_total + offsets_term,
        kkt_residual=result.kkt_residual,
        iterations=result.iterations,
        converged=result.converged,
        anchor=anchor,
        anchor_gap=result.band_gap,
        band_violation=result.band_violation,
        anchor_relaxed=relaxed,
        warnings=tuple(relax_warnings),
    )
    return density, diag


# ---------------------------------------------------------------------------
# High-dimensional Gaussian accuracy curve
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HdCurveParams:
    """Source and target class counts plus quadrature settings for the
    Gaussian accuracy curve."""

    k: int
    K: int
    quad_order: int = 64
    tol: float = 1e-10

    def __post_init__(self):
        if not 2 <= self.k <= self.K:
            raise ValueError("need 2 <= k <= K")
        if self.quad_order < 32:
            raise ValueError("quad_order must be >= 32")


def gaussian_accuracy(t, c, order=64, tol=1e-10):
    """Probability that a N(c, 1) score exceeds the maximum of t - 1
    independent N(0, 1) scores.

    Computed as the integral of phi(z - c) exp((t-1) log Phi(z)) with the
    CDF power kept in the log domain, so large t does not underflow.
    Strictly increasing in c and decreasing in t; equals 1/t at c = 0.
    """
    t = int(t)
    if t < 1:
        raise RangeError("t must be >= 1")
    c = float(c)
    if not np.isfinite(c):
        raise DomainError("c must be finite")
    from .solvers import integrate

    def integrand(z):
        return np.exp(-0.5 * (z - c) ** 2 - _LOG_SQRT_2PI + (t - 1) * log_ndtr(z))

    lo = min(-40.0, c - 10.0)
    hi = max(40.0, c + 10.0)
    val = integrate(integrand, lo, hi, tol=tol, order=order)
    return min(max(val, 0.0), 1.0)


def gaussian_effect_size(t, p, order=64, tol=1e-9):
    """Effect size c with gaussian_accuracy(t, c) = p, by monotone bisection.

    Raises :class:`DomainError` for p outside (0, 1).
    """
    t = int(t)
    if t < 2:
        raise RangeError("t must be >= 2")
    if not (0.0 < float(p) < 1.0):
        raise DomainError(f"p must lie strictly inside (0, 1), got {p}")
    from .solvers import bisect

    inner_tol = min(tol * 0.1, 1e-10)

    def f(c):
        return gaussian_accuracy(t, c, order=order, tol=inner_tol) - p

    return bisect(f, -40.0, 40.0, xtol=1e-11, ftol=tol)


_CLAMP_EPS = 1e-9


def _clamp_unit(p):
    p = float(p)
    if not np.isfinite(p):
        raise DomainError("source accuracy must be finite")
    if p < _CLAMP_EPS or p > 1.0 - _CLAMP_EPS:
        warnings.warn(f"source accuracy {p:.6g} clamped into "
                      f"[{_CLAMP_EPS}, {1 - _CLAMP_EPS}]", stacklevel=3)
        p = min(max(p, _CLAMP_EPS), 1.0 - _CLAMP_EPS)
    return p


def gaussian_extrapolate(p_k, params):
    """Push a k-class accuracy to K classes along the Gaussian curve:
    invert the accuracy to an effect size at k, evaluate at K.

    Equals ``p_k`` exactly when K = k.  Inputs outside
    [1e-9, 1 - 1e-9] are clamped with a warning.
    """
    p = _clamp_unit(p_k)
    if params.K == params.k:
        return p
    c = gaussian_effect_size(params.k, p, order=params.quad_order)
    return gaussian_accuracy(params.K, c, order=params.quad_order, tol=params.tol)


# ---------------------------------------------------------------------------
# scikit-learn style estimator classes
# ---------------------------------------------------------------------------


class BaseAccuracyExtrapolator(BaseEstimator):
    """Shared fit plumbing: scores + labels -> win counts -> fitted state.

    Subclasses implement ``_fit_counts`` and ``_predict_one``.
    """

    def __init__(self, tie_policy="strict", tie_seed=None):
        self.tie_policy = tie_policy
        self.tie_seed = tie_seed

    def fit(self, X, y):
        """Fit from classification scores.

        Parameters
        ----------
        X : array-like of shape (n_test, k)
            Per-class classification scores (higher = more likely), e.g.
            a ``decision_function`` output.
        y : array-like of shape (n_test,)
            True class of each row, 1-based in {1, ..., k}.
        """
        X = check_array(X, dtype=np.float64)
        sm = ScoreMatrix(X, np.asarray(y))
        return self.fit_win_counts(win_counts(sm, self.tie_policy, self.tie_seed))

    def fit_win_counts(self, wc):
        """Fit directly from precomputed :class:`WinCounts`."""
        self.win_counts_ = wc
        self.k_ = wc.k
        self.n_features_in_ = wc.k
        self._fit_counts(wc)
        return self

    def predict(self, t):
        """Expected accuracy at class count(s) ``t``.

        Accepts a scalar or array of integers >= 1; returns a float for
        scalar input, an ndarray otherwise.
        """
        check_is_fitted(self, "k_")
        scalar = np.isscalar(t)
        tarr = np.atleast_1d(np.asarray(t))
        if not np.issubdtype(tarr.dtype, np.integer):
            if np.any(tarr != np.floor(tarr)):
                raise ValueError("class counts must be integers")
            tarr = tarr.astype(np.int64)
        if tarr.size and tarr.min() < 1:
            raise RangeError("class counts must be >= 1")
        out = np.array([self._predict_one(int(ti)) for ti in tarr])
        return float(out[0]) if scalar else out

    def _fit_counts(self, wc):
        raise NotImplementedError

    def _predict_one(self, t):
        raise NotImplementedError


class UnbiasedMomentEstimator(BaseAccuracyExtrapolator):
    """Unbiased accuracy estimates for targets within the observed range.

    Parameters
    ----------
    t_max : int, optional
        Largest class count to precompute (default: the fitted k).
    trials : {'k-1', 'k'}
        Binomial trial convention for the win counts.
    tie_policy, tie_seed : see :func:`acx.core.win_counts`.

    Attributes
    ----------
    moments_ : MomentCurve
        Estimates at t = 2..t_max.
    """

    def __init__(self, t_max=None, trials="k-1", tie_policy="strict", tie_seed=None):
        super().__init__(tie_policy=tie_policy, tie_seed=tie_seed)
        self.t_max = t_max
        self.trials = trials

    def _fit_counts(self, wc):
        self.moments_ = unbiased_moments(wc, t_max=self.t_max, trials=self.trials)

    def _predict_one(self, t):
        if t == 1:
            return 1.0
        if t > self.moments_.t[-1]:
            raise RangeError(f"unbiased estimates exist only up to t = {self.moments_.t[-1]}")
        return self.moments_.value_at(t)


class ExponentialMixtureExtrapolator(BaseAccuracyExtrapolator):
    """Mixed-exponential-decay extrapolator.

    Fits nonnegative atoms (rate, weight) to the unbiased moment curve by
    NNLS; predictions use the unbiased values up to the fitted k and the
    mixture beyond.

    Attributes
    ----------
    moments_ : MomentCurve
    mixture_ : DecayMixture
    residual_ : float
        NNLS residual 2-norm over the fit points t = 2..k.
    """

    def __init__(self, kappa_grid=None, trials="k-1", tie_policy="strict", tie_seed=None):
        super().__init__(tie_policy=tie_policy, tie_seed=tie_seed)
        self.kappa_grid = kappa_grid
        self.trials = trials

    def _fit_counts(self, wc):
        self.moments_ = unbiased_moments(wc, trials=self.trials)
        self.mixture_, self.residual_ = fit_decay_mixture(self.moments_, self.kappa_grid)

    def _predict_one(self, t):
        if t == 1:
            return 1.0
        return exp_extrapolate(self.mixture_, self.moments_, t)


class ConstrainedPseudolikelihoodEstimator(BaseAccuracyExtrapolator):
    """Monotone-density pseudolikelihood extrapolator.

    Fitting raises :class:`ConvergenceFailure` when the anchor is
    infeasible on the grid (accuracy too close to 1) or the solver fails;
    there is never a silent estimate in those regimes.

    Attributes
    ----------
    density_ : DiscreteDensity
    diagnostics_ : ConsDiagnostics
    """

    def __init__(self, grid_size=512, anchor=None, anchor_tol=1e-6,
                 max_iter=50_000, tol=1e-9, tie_policy="strict", tie_seed=None):
        super().__init__(tie_policy=tie_policy, tie_seed=tie_seed)
        self.grid_size = grid_size
        self.anchor = anchor
        self.anchor_tol = anchor_tol
        self.max_iter = max_iter
        self.tol = tol

    def _fit_counts(self, wc):
        cfg = ConsConfig(grid_size=self.grid_size, anchor=self.anchor,
                         anchor_tol=self.anchor_tol, max_iter=self.max_iter, tol=self.tol)
        self.density_, self.diagnostics_ = constrained_pmle(wc, cfg)

    def _predict_one(self, t):
        return density_moment(self.density_, t)


class HighDimensionalExtrapolator(BaseAccuracyExtrapolator):
    """Gaussian effect-size extrapolator.

    Inverts the unbiased k-class accuracy to an effect size on the
    Gaussian accuracy curve at fit time; predictions evaluate the curve
    at the requested class count.

    Attributes
    ----------
    source_accuracy_ : float
        Unbiased accuracy estimate at the fitted k (after clamping).
    effect_size_ : float
    """

    def __init__(self, quad_order=64, trials="k-1", tie_policy="strict", tie_seed=None):
        super().__init__(tie_policy=tie_policy, tie_seed=tie_seed)
        self.quad_order = quad_order
        self.trials = trials

    def _fit_counts(self, wc):
        p_k = unbiased_moments(wc, trials=self.trials).value_at(wc.k)
        self.source_accuracy_ = _clamp_unit(p_k)
        self.effect_size_ = gaussian_effect_size(wc.k, self.source_accuracy_,
                                                 order=self.quad_order)

    def _predict_one(self, t):
        if t == 1:
            return 1.0
        return gaussian_accuracy(t, self.effect_size_, order=self.quad_order)


ESTIMATORS = {
    "un": UnbiasedMomentEstimator,
    "exp": ExponentialMixtureExtrapolator,
    "cons": ConstrainedPseudolikelihoodEstimator,
    "hd": HighDimensionalExtrapolator,
}
