"""Simulation laboratory: synthetic class ensembles, generative classifiers,
and Monte-Carlo ground truth for validating the extrapolation estimators.

Classes are drawn from a two-level Gaussian hierarchy: class means are
i.i.d. Normal(0, tau^2 I) and each class emits points from a Gaussian with
its own covariance (identity, random diagonal, or random SPD).  Three
generative classifiers score a query point using one class's training data
at a time: quadratic discriminant analysis, Gaussian naive Bayes, and a
nearest-centroid baseline.

Everything is seeded and deterministic; replicates and Monte-Carlo blocks
derive independent child seeds so results do not depend on scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .core import ScoreMatrix, empirical_accuracy, win_counts
from .errors import AcxError, SingularCovariance
from .estimators import (
    ConsConfig,
    ConstrainedPseudolikelihoodEstimator,
    ExponentialMixtureExtrapolator,
    HighDimensionalExtrapolator,
    UnbiasedMomentEstimator,
)

__all__ = [
    "MetaConfig",
    "ClassEnsemble",
    "ClassifierSpec",
    "sample_ensemble",
    "qda_score",
    "gnb_score",
    "centroid_score",
    "score_matrix",
    "conditional_accuracy_oracle",
    "sample_conditional_accuracy",
    "true_accuracy_mc",
    "run_replication",
]

_COV_KINDS = ("identity", "diagonal", "spd")
_CLASSIFIER_KINDS = ("qda", "gnb", "centroid")


@dataclass(frozen=True)
class MetaConfig:
    """Parameters of the synthetic class-generating distribution.

    Attributes
    ----------
    dim : int
        Feature dimension.
    tau : float
        Scale of the class-mean prior, means ~ Normal(0, tau^2 I).
    cov : {'identity', 'diagonal', 'spd'}
        Within-class covariance family; 'diagonal' draws per-coordinate
        variances uniformly from ``cov_range``, 'spd' draws a random
        rotation with eigenvalues from ``cov_range``.
    train_per_class, tests_per_class : int
        Training points r and held-out test repeats m per class.
    k : int
        Default evaluation subset size.
    n_classes : int
        Total classes K in an ensemble.
    seed : int
        Master seed; everything downstream derives from it.
    """

    dim: int = 10
    tau: float = 1.0
    cov: str = "identity"
    cov_range: tuple = (0.5, 2.0)
    train_per_class: int = 50
    tests_per_class: int = 20
    k: int = 10
    n_classes: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.cov not in _COV_KINDS:
            raise ValueError(f"cov must be one of {_COV_KINDS}")
        if self.train_per_class < 2:
            raise ValueError("train_per_class must be >= 2 (a covariance estimate is needed)")
        if self.tests_per_class < 1:
            raise ValueError("tests_per_class must be >= 1")
        if not 2 <= self.k <= self.n_classes:
            raise ValueError("need 2 <= k <= n_classes")
        lo, hi = self.cov_range
        if not 0 < lo <= hi:
            raise ValueError("cov_range must satisfy 0 < lo <= hi")


@dataclass(frozen=True)
class ClassEnsemble:
    """Sampled classes with their true parameters, training and test draws.

    ``cov_factors[i] @ cov_factors[i].T`` is class i's true covariance.
    Training and test points are disjoint i.i.d. draws given the class
    parameters.
    """

    means: np.ndarray        # (K, p)
    cov_factors: np.ndarray  # (K, p, p)
    train: np.ndarray        # (K, r, p)
    test: np.ndarray         # (K, m, p)
    config: MetaConfig

    @property
    def n_classes(self):
        return self.means.shape[0]


@dataclass(frozen=True)
class ClassifierSpec:
    """Which generative classifier to use and how much covariance shrinkage.

    ``rho=None`` selects an automatic per-class shrinkage of
    1e-3 * trace(cov_hat) / dim; ``rho=0`` uses the raw sample covariance
    and raises :class:`SingularCovariance` when it is not invertible.
    """

    kind: str = "qda"
    rho: float = None

    def __post_init__(self):
        if self.kind not in _CLASSIFIER_KINDS:
            raise ValueError(f"kind must be one of {_CLASSIFIER_KINDS}")
        if self.rho is not None and self.rho < 0:
            raise ValueError("rho must be >= 0")


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _draw_cov_factors(rng, cfg, n):
    p = cfg.dim
    if cfg.cov == "identity":
        return np.broadcast_to(np.eye(p), (n, p, p)).copy()
    lo, hi = cfg.cov_range
    if cfg.cov == "diagonal":
        var = rng.uniform(lo, hi, size=(n, p))
        out = np.zeros((n, p, p))
        out[:, np.arange(p), np.arange(p)] = np.sqrt(var)
        return out
    # random SPD: eigenvalues uniform on cov_range, Haar-ish rotation via QR
    q, _ = np.linalg.qr(rng.standard_normal((n, p, p)))
    lam = rng.uniform(lo, hi, size=(n, p))
    return q * np.sqrt(lam)[:, None, :]


def _draw_points(rng, means, factors, n_points):
    """Draw n_points per class: mean + factor @ z."""
    z = rng.standard_normal((means.shape[0], n_points, means.shape[1]))
    return means[:, None, :] + np.einsum("nij,nrj->nri", factors, z)


def sample_ensemble(cfg):
    """Sample a full ensemble: class parameters, training and test data.

    Fully determined by ``cfg.seed``; the same config yields the same
    ensemble bit for bit.
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    K, p = cfg.n_classes, cfg.dim
    means = rng.normal(0.0, cfg.tau, size=(K, p)) if cfg.tau > 0 else np.zeros((K, p))
    factors = _draw_cov_factors(rng, cfg, K)
    train = _draw_points(rng, means, factors, cfg.train_per_class)
    test = _draw_points(rng, means, factors, cfg.tests_per_class)
    return ClassEnsemble(means=means, cov_factors=factors, train=train, test=test, config=cfg)


# ---------------------------------------------------------------------------
# Generative classifiers
# ---------------------------------------------------------------------------


def _fit_models(train, spec):
    """Fit one generative model per class from (n, r, p) training blocks."""
    mhat = train.mean(axis=1)
    if spec.kind == "centroid":
        return {"kind": "centroid", "mean": mhat}
    if spec.kind == "gnb":
        var = train.var(axis=1)  # 1/r normalization: the empirical-distribution moment
        rho = 1e-3 * var.mean(axis=1, keepdims=True) if spec.rho is None else spec.rho
        var = var + rho
        if np.min(var) <= 0.0:
            raise SingularCovariance("zero per-coordinate variance and rho=0")
        return {"kind": "gnb", "mean": mhat, "var": var}
    n, r, p = train.shape
    centered = train - mhat[:, None, :]
    cov = np.einsum("nri,nrj->nij", centered, centered) / r
    if spec.rho is None:
        rho = 1e-3 * np.trace(cov, axis1=1, axis2=2) / p
    else:
        rho = np.full(n, float(spec.rho))
    cov[:, np.arange(p), np.arange(p)] += rho[:, None]
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(
            "sample covariance is not positive definite; increase rho "
            "(rho=0 requires train_per_class > dim)") from exc
    logdet = 2.0 * np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
    return {"kind": "qda", "mean": mhat, "chol": L, "logdet": logdet}


def _score_points(models, pts):
    """Scores of points (n_pts, p) under every model: (n_pts, n_models)."""
    mean = models["mean"]
    d = pts[None, :, :] - mean[:, None, :]                    # (models, pts, p)
    if models["kind"] == "centroid":
        return -(d ** 2).sum(axis=2).T
    if models["kind"] == "gnb":
        var = models["var"]                                    # (models, p)
        log_norm = 0.5 * (np.log(2.0 * np.pi * var)).sum(axis=1)
        quad = ((d ** 2) / var[:, None, :]).sum(axis=2)
        return (-0.5 * quad - log_norm[:, None]).T
    z = np.linalg.solve(models["chol"], d.transpose(0, 2, 1))  # L z = d^T
    maha = (z ** 2).sum(axis=1)
    return (-maha - models["logdet"][:, None]).T


def _score_own(models, pts):
    """Score of model i at point i only: (n,) for pts of shape (n, p)."""
    mean = models["mean"]
    d = pts - mean
    if models["kind"] == "centroid":
        return -(d ** 2).sum(axis=1)
    if models["kind"] == "gnb":
        var = models["var"]
        return -0.5 * ((d ** 2) / var).sum(axis=1) - 0.5 * np.log(2.0 * np.pi * var).sum(axis=1)
    z = np.linalg.solve(models["chol"], d[:, :, None])[:, :, 0]
    return -(z ** 2).sum(axis=1) - models["logdet"]


def qda_score(train, y, rho=None):
    """Quadratic discriminant score of query ``y`` under one class's data:
    -(y - mean)^T (cov + rho I)^{-1} (y - mean) - log det(cov + rho I),
    with mean and covariance the training sample moments (1/r normalized).
    """
    train = np.asarray(train, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    models = _fit_models(train[None, :, :], ClassifierSpec(kind="qda", rho=rho))
    return float(_score_points(models, y[None, :])[0, 0])


def gnb_score(train, y, rho=None):
    """Gaussian naive Bayes score: sum over coordinates of the log density
    of y_d under Normal(mean_d, var_d + rho) fitted per coordinate."""
    train = np.asarray(train, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    models = _fit_models(train[None, :, :], ClassifierSpec(kind="gnb", rho=rho))
    return float(_score_points(models, y[None, :])[0, 0])


def centroid_score(train, y):
    """Nearest-centroid score: negative squared distance to the training mean."""
    train = np.asarray(train, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    models = _fit_models(train[None, :, :], ClassifierSpec(kind="centroid"))
    return float(_score_points(models, y[None, :])[0, 0])


# ---------------------------------------------------------------------------
# Score matrices and Monte-Carlo ground truth
# ---------------------------------------------------------------------------


def score_matrix(ens, spec, class_subset=None):
    """Score every test point of the subset classes against all subset
    classes' trained models.

    ``class_subset`` holds 1-based class indices (default: all classes);
    column j of the result belongs to the j-th entry of the subset, and
    labels are positions within the subset.
    """
    K = ens.n_classes
    if class_subset is None:
        subset = np.arange(1, K + 1)
    else:
        subset = np.asarray(class_subset, dtype=np.int64)
    if subset.size < 2:
        raise ValueError("need at least 2 classes in the subset")
    if np.unique(subset).size != subset.size or subset.min() < 1 or subset.max() > K:
        raise ValueError(f"class_subset must be distinct indices in 1..{K}")
    idx = subset - 1
    models = _fit_models(ens.train[idx], spec)
    m = ens.test.shape[1]
    pts = ens.test[idx].reshape(subset.size * m, -1)
    labels = np.repeat(np.arange(1, subset.size + 1), m)
    return ScoreMatrix(scores=_score_points(models, pts), labels=labels, k=subset.size)


_ORACLE_CHUNK = 8192


def _competitor_scores(rng, cfg, spec, y_pts, n_comp):
    """Scores of ``n_comp`` freshly drawn competitor classes at each point
    of ``y_pts`` (n_pts, p), chunked; returns (n_pts, n_comp)."""
    out = np.empty((y_pts.shape[0], n_comp))
    done = 0
    while done < n_comp:
        c = min(_ORACLE_CHUNK, n_comp - done)
        means = rng.normal(0.0, cfg.tau, size=(c, cfg.dim)) if cfg.tau > 0 else np.zeros((c, cfg.dim))
        factors = _draw_cov_factors(rng, cfg, c)
        train = _draw_points(rng, means, factors, cfg.train_per_class)
        models = _fit_models(train, spec)
        out[:, done:done + c] = _score_points(models, y_pts)
        done += c
    return out


def conditional_accuracy_oracle(train, y, cfg, spec, n_mc, seed):
    """Monte-Carlo estimate of the conditional accuracy u(train, y): the
    probability that this class's score at ``y`` strictly beats the score
    of a freshly drawn competitor class (new class parameters, new
    training sample) at the same point.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    train = np.asarray(train, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    own = _score_own(_fit_models(train[None, :, :], spec), y[None, :])[0]
    comp = _competitor_scores(rng, cfg, spec, y[None, :], n_mc)
    return float(np.mean(own > comp[0]))


def sample_conditional_accuracy(cfg, spec, n_draws, n_mc, seed, n_blocks=1):
    """Sample the conditional accuracy distribution.

    Draws ``n_draws`` fresh (class, training sample, test point) triples
    and estimates each one's conditional accuracy against a competitor
    pool of size ``n_mc``.  With ``n_blocks > 1`` the draws are split into
    independent blocks, each sharing one competitor pool: block means are
    then i.i.d., which is what block-level standard errors require.

    Returns
    -------
    (u, block_ids) : (ndarray of shape (n_draws,), ndarray of ints)
    """
    if n_draws % n_blocks != 0:
        raise ValueError("n_draws must be divisible by n_blocks")
    per = n_draws // n_blocks
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    us, blocks = [], []
    for b, child in enumerate(children):
        rng = np.random.default_rng(child)
        means = rng.normal(0.0, cfg.tau, size=(per, cfg.dim)) if cfg.tau > 0 else np.zeros((per, cfg.dim))
        factors = _draw_cov_factors(rng, cfg, per)
        train = _draw_points(rng, means, factors, cfg.train_per_class)
        y_pts = _draw_points(rng, means, factors, 1)[:, 0, :]
        own = _score_own(_fit_models(train, spec), y_pts)
        comp = _competitor_scores(rng, cfg, spec, y_pts, n_mc)
        us.append(np.mean(own[:, None] > comp, axis=1))
        blocks.append(np.full(per, b))
    return np.concatenate(us), np.concatenate(blocks)


def true_accuracy_mc(ens, spec, t, n_rep, seed, tests_per_class=None, disjoint=False):
    """Monte-Carlo expected accuracy at ``t`` classes.

    Averages the accuracy over ``n_rep`` random t-subsets of the
    ensemble's classes, scoring fresh test draws from the true class
    distributions against the trained subset models.  With
    ``disjoint=True`` the subsets partition a random permutation of the
    classes (requires n_rep * t <= K), making replicates independent.

    Returns
    -------
    (mean, stderr)
    """
    cfg = ens.config
    K = ens.n_classes
    t = int(t)
    if not 2 <= t <= K:
        raise ValueError(f"need 2 <= t <= {K}")
    if n_rep < 1:
        raise ValueError("n_rep must be >= 1")
    m_eval = cfg.tests_per_class if tests_per_class is None else int(tests_per_class)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if disjoint:
        if n_rep * t > K:
            raise ValueError(f"disjoint subsets need n_rep * t <= {K}")
        subsets = rng.permutation(K)[:n_rep * t].reshape(n_rep, t)
    else:
        subsets = np.stack([rng.choice(K, size=t, replace=False) for _ in range(n_rep)])
    models = _fit_models(ens.train, spec)
    accs = np.empty(n_rep)
    for i, idx in enumerate(subsets):
        pts = _draw_points(rng, ens.means[idx], ens.cov_factors[idx], m_eval)
        pts = pts.reshape(t * m_eval, -1)
        sub_models = {key: (val if key == "kind" else val[idx]) for key, val in models.items()}
        scores = _score_points(sub_models, pts)
        predicted = scores.argmax(axis=1)
        truth = np.repeat(np.arange(t), m_eval)
        accs[i] = np.mean(predicted == truth)
    se = float(accs.std(ddof=1) / np.sqrt(n_rep)) if n_rep > 1 else float("nan")
    return float(accs.mean()), se


# ---------------------------------------------------------------------------
# Replication runner
# ---------------------------------------------------------------------------


def _make_estimator(name, cons_config=None, kappa_grid=None, quad_order=64):
    if name == "un":
        return UnbiasedMomentEstimator()
    if name == "exp":
        return ExponentialMixtureExtrapolator(kappa_grid=kappa_grid)
    if name == "cons":
        cc = cons_config or ConsConfig()
        return ConstrainedPseudolikelihoodEstimator(
            grid_size=cc.grid_size, anchor=cc.anchor, anchor_tol=cc.anchor_tol,
            max_iter=cc.max_iter, tol=cc.tol)
    if name == "hd":
        return HighDimensionalExtrapolator(quad_order=quad_order)
    raise ValueError(f"unknown estimator {name!r}; expected one of un, exp, cons, hd")


def run_replication(cfg, spec, k_list, estimators=("exp", "cons", "hd"),
                    n_replicates=20, cons_config=None, kappa_grid=None, quad_order=64):
    """Replicated extrapolation experiment.

    Per replicate: sample a fresh ensemble of K classes, and for each k in
    ``k_list`` build the k-class score matrix (classes 1..k), compute win
    counts, run every requested estimator at target K, and record the
    directly measured k-class accuracy as the ``benchmark`` row.  The truth
    column holds the full-K test accuracy of the same ensemble.

    Estimator failures are recorded in the ``status`` field without
    aborting the sweep.  The environment variable ``ACX_THREADS`` caps the
    number of replicates run in parallel (default 1); outputs are
    independent of the scheduling.

    Returns
    -------
    list of dict
        Tidy records with keys (replicate, k, K, estimator, p_hat, truth,
        error, status).
    """
    k_list = [int(k) for k in k_list]
    for k in k_list:
        if not 2 <= k <= cfg.n_classes:
            raise ValueError(f"every k must lie in 2..{cfg.n_classes}, got {k}")
    for name in estimators:
        _make_estimator(name, cons_config, kappa_grid, quad_order)  # validate early
    children = np.random.SeedSequence(cfg.seed).spawn(n_replicates)

    def one_replicate(rep):
        child_seed = int(children[rep].generate_state(1)[0])
        ens = sample_ensemble(replace(cfg, seed=child_seed))
        full = score_matrix(ens, spec)
        truth = empirical_accuracy(full)
        records = []
        for k in k_list:
            rows = full.labels <= k
            sub = ScoreMatrix(full.scores[rows][:, :k], full.labels[rows], k)
            wc = win_counts(sub)
            bench = empirical_accuracy(sub)
            records.append(dict(replicate=rep, k=k, K=cfg.n_classes, estimator="benchmark",
                                p_hat=bench, truth=truth, error=bench - truth, status="ok"))
            for name in estimators:
                try:
                    est = _make_estimator(name, cons_config, kappa_grid, quad_order)
                    est.fit_win_counts(wc)
                    p_hat = float(est.predict(int(cfg.n_classes)))
                    records.append(dict(replicate=rep, k=k, K=cfg.n_classes, estimator=name,
                                        p_hat=p_hat, truth=truth, error=p_hat - truth,
                                        status="ok"))
                except AcxError as exc:
                    records.append(dict(replicate=rep, k=k, K=cfg.n_classes, estimator=name,
                                        p_hat=float("nan"), truth=truth, error=float("nan"),
                                        status=f"failed: {type(exc).__name__}"))
        return records

    workers = int(os.environ.get("ACX_THREADS", "1") or "1")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_rep = list(pool.map(one_replicate, range(n_replicates)))
    else:
        per_rep = [one_replicate(rep) for rep in range(n_replicates)]
    return [record for records in per_rep for record in records]
