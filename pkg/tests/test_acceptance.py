"""Acceptance suite.

One test per acceptance criterion, each printing a PASS/FAIL line (run
with ``pytest tests/test_acceptance.py -v -s`` to see them).  Criteria 10
and 11 are tracked expectations: the qualitative orderings are reported
and warned about when violated, not hard-failed, since they assert
tendencies rather than magnitudes.
"""

import itertools
import time
import warnings

import numpy as np
import pytest
from click.testing import CliRunner
from scipy.stats import binom, chisquare, norm

from acx import (
    ClassifierSpec,
    ConsConfig,
    ConvergenceFailure,
    HdCurveParams,
    MetaConfig,
    MomentCurve,
    WinCounts,
    constrained_pmle,
    default_kappa_grid,
    density_moment,
    gaussian_accuracy,
    gaussian_effect_size,
    gaussian_extrapolate,
    run_replication,
    sample_conditional_accuracy,
    sample_ensemble,
    true_accuracy_mc,
    unbiased_moments,
    fit_decay_mixture,
)
from acx.estimators import _collapsed_rows
from acx.io import write_win_counts
from acx.simlab import _competitor_scores, _fit_models, _score_own
from acx.solvers import NnlsProblem, SimplexProgram, _suffix_means, nnls_solve, simplex_maximize
from acx.cli import main as cli_main


def report(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"\n[criterion {num:02d}] {name}: {status}{suffix}")


# ---------------------------------------------------------------------------
# 1. Moment identity: E[U^(k-1)] equals the expected k-class accuracy
# ---------------------------------------------------------------------------


def test_c01_moment_identity():
    t0 = time.time()
    cfg = MetaConfig(dim=10, tau=3.0, train_per_class=50, tests_per_class=1,
                     k=10, n_classes=50, seed=101)
    spec = ClassifierSpec("qda")
    n_blocks = 30
    u, blocks = sample_conditional_accuracy(cfg, spec, n_draws=3000, n_mc=10_000,
                                            seed=11, n_blocks=n_blocks)
    details, ok = [], True
    for k, n_rep, m_eval in ((2, 10_000, 10), (5, 6000, 4), (10, 4000, 2)):
        powers = u ** (k - 1)
        block_means = np.array([powers[blocks == b].mean() for b in range(n_blocks)])
        lhs, lhs_se = block_means.mean(), block_means.std(ddof=1) / np.sqrt(n_blocks)
        big = sample_ensemble(MetaConfig(dim=10, tau=3.0, train_per_class=50,
                                         tests_per_class=1, k=k, n_classes=n_rep * k,
                                         seed=500 + k))
        rhs, rhs_se = true_accuracy_mc(big, spec, t=k, n_rep=n_rep, seed=900 + k,
                                       tests_per_class=m_eval, disjoint=True)
        se = float(np.hypot(lhs_se, rhs_se))
        pulls = abs(lhs - rhs) / se
        ok &= pulls <= 3.0
        details.append(f"k={k}: |{lhs:.5f}-{rhs:.5f}|={pulls:.2f} SE")
    runtime = time.time() - t0
    ok &= runtime < 120.0
    report(1, "moment identity", ok, "; ".join(details) + f"; {runtime:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 2. Binomial law of the win count given a fixed (training sample, query)
# ---------------------------------------------------------------------------


def test_c02_binomial_law_of_win_counts():
    t0 = time.time()
    k = 6
    cfg = MetaConfig(dim=4, tau=1.0, train_per_class=20, tests_per_class=1,
                     k=k, n_classes=k, seed=0)
    spec = ClassifierSpec("qda")
    # fix a (training sample, query) pair with an interior win probability
    train = y = None
    for seed in range(64):
        rng = np.random.default_rng(np.random.SeedSequence(7000 + seed))
        mu = rng.normal(0, cfg.tau, size=cfg.dim)
        cand_train = mu + rng.standard_normal((cfg.train_per_class, cfg.dim))
        cand_y = mu + rng.standard_normal(cfg.dim)
        own = _score_own(_fit_models(cand_train[None], spec), cand_y[None])[0]
        probe = _competitor_scores(np.random.default_rng(1), cfg, spec,
                                   cand_y[None], 2000)
        u_probe = float(np.mean(own > probe[0]))
        if 0.3 <= u_probe <= 0.7:
            train, y = cand_train, cand_y
            break
    assert train is not None, "no interior-probability fixture found"

    own = _score_own(_fit_models(train[None], spec), y[None])[0]
    comp = _competitor_scores(np.random.default_rng(2), cfg, spec, y[None], 1_000_000)
    u_hat = float(np.mean(own > comp[0]))

    n_sets = 100_000
    comp_sets = _competitor_scores(np.random.default_rng(3), cfg, spec, y[None],
                                   n_sets * (k - 1))
    v = (own > comp_sets[0].reshape(n_sets, k - 1)).sum(axis=1)
    observed = np.bincount(v, minlength=k).astype(float)
    expected = n_sets * binom.pmf(np.arange(k), k - 1, u_hat)
    # merge sparse cells from the left so the chi-square approximation holds
    while expected.size > 2 and expected[0] < 5:
        expected[1] += expected[0]
        observed[1] += observed[0]
        expected, observed = expected[1:], observed[1:]
    pvalue = chisquare(observed, expected * observed.sum() / expected.sum()).pvalue
    runtime = time.time() - t0
    ok = pvalue > 0.001 and runtime < 60.0
    report(2, "binomial law of win counts", ok,
           f"u={u_hat:.4f}, chi2 p={pvalue:.4f}, {runtime:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 3. Unbiasedness of the moment estimator
# ---------------------------------------------------------------------------


def test_c03_unbiased_moment_estimator():
    t0 = time.time()
    k, n = 10, 1_000_000
    rng = np.random.default_rng(33)
    details, ok = [], True
    for u in (0.3, 0.6, 0.9):
        v = rng.binomial(k - 1, u, size=n)
        wc = WinCounts(v=v, class_ids=np.ones(n, dtype=int), k=k)
        mc = unbiased_moments(wc)
        counts = np.bincount(v, minlength=k).astype(float)
        worst = 0.0
        vgrid = np.arange(k, dtype=float)
        ratio = np.ones(k)
        for t in range(2, k + 1):
            a = t - 2
            ratio = ratio * (vgrid - a) / (k - 1 - a)
            mean = counts @ ratio / n
            var = counts @ ratio ** 2 / n - mean ** 2
            se = np.sqrt(var / n)
            pulls = abs(mc.value_at(t) - u ** (t - 1)) / se
            worst = max(worst, pulls)
        ok &= worst <= 4.0
        details.append(f"u={u}: worst {worst:.2f} SE")
    runtime = time.time() - t0
    ok &= runtime < 60.0
    report(3, "unbiased moment estimator", ok, "; ".join(details) + f"; {runtime:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 4. Exact recovery of exponential decay mixtures
# ---------------------------------------------------------------------------


def test_c04_exp_exact_recovery():
    grid = default_kappa_grid()
    ts = np.arange(2, 11)
    cases = {
        "single": ([grid[np.argmin(np.abs(grid - 0.5))]], [1.0]),
        "double": ([grid[np.argmin(np.abs(grid - 0.2))],
                    grid[np.argmin(np.abs(grid - 2.0))]], [0.6, 0.4]),
    }
    details, ok = [], True
    for name, (rates, weights) in cases.items():
        truth = sum(w * np.exp(-r * ts) for r, w in zip(rates, weights))
        mix, _ = fit_decay_mixture(MomentCurve(t=ts, p=truth, source_k=10))
        refit = float(np.max(np.abs(mix.evaluate(ts.astype(float)) - truth)))
        p50_truth = sum(w * np.exp(-r * 50.0) for r, w in zip(rates, weights))
        extrap = abs(float(mix.evaluate(50.0)) - p50_truth)
        ok &= refit <= 1e-6 and extrap <= 1e-4
        details.append(f"{name}: refit {refit:.1e}, t=50 err {extrap:.1e}")
    report(4, "exponential mixture exact recovery", ok, "; ".join(details))
    assert ok


# ---------------------------------------------------------------------------
# 5. Constrained pseudolikelihood consistency on a known density
# ---------------------------------------------------------------------------


def test_c05_cons_consistency_on_beta_density():
    t0 = time.time()
    rng = np.random.default_rng(55)
    k, n = 20, 20_000
    u = rng.beta(2.0, 1.0, size=n)
    wc = WinCounts(v=rng.binomial(k - 1, u), class_ids=rng.integers(1, k + 1, n), k=k)
    cfg = ConsConfig()
    density, diag = constrained_pmle(wc, cfg)
    errs = [abs(density_moment(density, t) - 2.0 / (t + 1)) for t in range(2, 41)]
    w = density.weights
    constraints_ok = (abs(w.sum() - 1.0) <= 1e-10 and np.min(w) >= 0.0
                      and np.all(np.diff(w) >= -1e-12)
                      and abs(density_moment(density, k) - diag.anchor)
                      <= cfg.anchor_tol + 1e-8)
    runtime = time.time() - t0
    ok = max(errs) <= 0.02 and constraints_ok and diag.converged and runtime < 300.0
    report(5, "constrained pseudolikelihood consistency", ok,
           f"max moment err {max(errs):.4f}, constraints {'ok' if constraints_ok else 'VIOLATED'}, "
           f"{runtime:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 6. Failure semantics near perfect accuracy
# ---------------------------------------------------------------------------


def test_c06_cons_failure_semantics():
    wc = WinCounts(v=np.full(200, 9), class_ids=np.tile(np.arange(1, 11), 20), k=10)
    with pytest.raises(ConvergenceFailure) as exc_info:
        constrained_pmle(wc)
    closest = exc_info.value.closest_feasible_anchor
    ok = closest is not None and 0.0 < closest < 1.0
    report(6, "failure on all-wins input", ok,
           f"ConvergenceFailure with closest feasible anchor {closest:.5f}")
    assert ok


# ---------------------------------------------------------------------------
# 7. Gaussian curve analytics
# ---------------------------------------------------------------------------


def test_c07_gaussian_curve_analytics():
    sym_err = max(abs(gaussian_accuracy(t, 0.0) - 1.0 / t) for t in (2, 20, 400))
    pair_err = max(abs(gaussian_accuracy(2, c) - norm.cdf(c / np.sqrt(2.0)))
                   for c in (-2.0, 0.0, 1.0, 3.0))
    rt_err = max(abs(gaussian_effect_size(t, gaussian_accuracy(t, c)) - c)
                 for c in (-2.0, 0.0, 3.0) for t in (2, 10, 100))
    ok = sym_err <= 1e-8 and pair_err <= 1e-8 and rt_err <= 1e-6
    report(7, "gaussian curve analytics", ok,
           f"symmetry {sym_err:.1e}, pairwise {pair_err:.1e}, round trip {rt_err:.1e}")
    assert ok


# ---------------------------------------------------------------------------
# 8. High-dimensional extrapolation identity and monotonicity
# ---------------------------------------------------------------------------


def test_c08_hd_identity_and_monotonicity():
    ps = np.linspace(0.08, 0.97, 15)
    ident_err = max(abs(gaussian_extrapolate(p, HdCurveParams(k=10, K=10)) - p)
                    for p in ps)
    curve = [gaussian_extrapolate(p, HdCurveParams(k=10, K=50)) for p in ps]
    increasing = bool(np.all(np.diff(curve) > 0))
    sym = gaussian_extrapolate(1.0 / 20.0, HdCurveParams(k=20, K=400))
    sym_err = abs(sym - 1.0 / 400.0)
    ok = ident_err <= 1e-9 and increasing and sym_err <= 1e-8
    report(8, "hd identity and monotonicity", ok,
           f"identity {ident_err:.1e}, strictly increasing {increasing}, "
           f"1/k->1/K err {sym_err:.1e}")
    assert ok


# ---------------------------------------------------------------------------
# 9. Solver oracles
# ---------------------------------------------------------------------------


def _exhaustive_nnls(A, b):
    n = A.shape[1]
    best = np.linalg.norm(b)
    for size in range(1, n + 1):
        for support in itertools.combinations(range(n), size):
            sol, *_ = np.linalg.lstsq(A[:, list(support)], b, rcond=None)
            if np.min(sol) < -1e-12:
                continue
            x = np.zeros(n)
            x[list(support)] = np.clip(sol, 0.0, None)
            best = min(best, np.linalg.norm(A @ x - b))
    return best


def _cons_instance(seed, M=8, k=6, n=80):
    rng = np.random.default_rng(seed)
    u = rng.beta(2.0, 1.0, size=n)
    wc = WinCounts(v=rng.binomial(k - 1, u), class_ids=np.ones(n, dtype=int), k=k)
    grid = (np.arange(1, M + 1) - 0.5) / M
    B, counts, _ = _collapsed_rows(wc, grid)
    anchor = unbiased_moments(wc).value_at(k)
    return wc, B, counts, grid, anchor


def _grid_search_cons(B, counts, grid, k, anchor, band, n_pts=12, levels=12):
    """Dense grid search over the monotone simplex in suffix coordinates.

    Stage A zooms on the whole simplex (concavity makes the zoom sound)
    and keeps the best band-feasible point.  When the unconstrained
    optimum violates the band, the true optimum lies on a band boundary,
    so stage B zooms over each boundary slice directly: grid points are
    projected onto the slice along rays from a fixed off-slice vertex.
    """
    M = grid.size
    Bh = np.apply_along_axis(_suffix_means, 1, B)
    b_theta = _suffix_means(grid ** (k - 1))
    n_total = counts.sum()
    combos = np.array(list(itertools.combinations(range(n_pts + M - 1), M - 1)))
    edges = np.concatenate([np.full((combos.shape[0], 1), -1), combos,
                            np.full((combos.shape[0], 1), n_pts + M - 1)], axis=1)
    comps = np.diff(edges, axis=1) - 1
    simplex_grid = comps / n_pts

    def values(thetas):
        return np.log(thetas @ Bh.T) @ counts / n_total

    uniform = np.full(M, 1.0 / M)

    def level_candidates(center, scale):
        """Affine copy of the grid centered at the incumbent (reaches faces)
        plus the always-valid contraction toward it."""
        shifted = center[None, :] + scale * (simplex_grid - uniform[None, :])
        shifted = shifted[np.min(shifted, axis=1) >= 0.0]
        contracted = (1.0 - scale) * center[None, :] + scale * simplex_grid
        return np.concatenate([shifted, contracted], axis=0)

    # stage A: zoom on the whole simplex, tracking the feasible best
    center = uniform.copy()
    best_feasible = -np.inf
    scale = 1.0
    for _ in range(levels):
        thetas = level_candidates(center, scale)
        vals = values(thetas)
        feasible = np.abs(thetas @ b_theta - anchor) <= band
        if feasible.any():
            best_feasible = max(best_feasible, float(vals[feasible].max()))
        center = thetas[int(np.argmax(vals))]
        scale /= 2.0
    if abs(float(center @ b_theta) - anchor) <= band:
        return best_feasible

    # stage B: the optimum sits on a band boundary; the boundary slice of
    # the weight simplex is the convex hull of pairwise vertex combinations,
    # so zoom over the slice-vertex weights directly
    for bound in (anchor - band, anchor + band):
        if not b_theta[0] <= bound <= b_theta[-1]:
            continue
        verts = []
        for i in range(M):
            if abs(b_theta[i] - bound) <= 1e-15:
                vert = np.zeros(M)
                vert[i] = 1.0
                verts.append(vert)
                continue
            for j in range(i + 1, M):
                if (b_theta[i] - bound) * (b_theta[j] - bound) < 0.0:
                    lam = (bound - b_theta[j]) / (b_theta[i] - b_theta[j])
                    vert = np.zeros(M)
                    vert[i], vert[j] = lam, 1.0 - lam
                    verts.append(vert)
        if not verts:
            continue
        vmat = np.array(verts)
        m_v = vmat.shape[0]
        combos_v = np.array(list(itertools.combinations(range(6 + m_v - 1), m_v - 1)))
        edges_v = np.concatenate([np.full((combos_v.shape[0], 1), -1), combos_v,
                                  np.full((combos_v.shape[0], 1), 6 + m_v - 1)], axis=1)
        weight_grid = (np.diff(edges_v, axis=1) - 1) / 6.0
        uniform_w = np.full(m_v, 1.0 / m_v)
        center_w = uniform_w.copy()
        scale = 1.0
        for _ in range(levels):
            shifted = center_w[None, :] + scale * (weight_grid - uniform_w[None, :])
            shifted = shifted[np.min(shifted, axis=1) >= 0.0]
            contracted = (1.0 - scale) * center_w[None, :] + scale * weight_grid
            weights = np.concatenate([shifted, contracted], axis=0)
            vals = values(weights @ vmat)
            j = int(np.argmax(vals))
            if vals[j] > best_feasible:
                best_feasible = float(vals[j])
            center_w = weights[j]
            scale /= 2.0
    return best_feasible


def test_c09_solver_oracles():
    rng = np.random.default_rng(99)
    nnls_worst = 0.0
    for _ in range(50):
        A = rng.normal(size=(6, 4))
        b = rng.normal(size=6)
        x = nnls_solve(NnlsProblem(A, b))
        nnls_worst = max(nnls_worst,
                         abs(np.linalg.norm(A @ x - b) - _exhaustive_nnls(A, b)))
    nnls_ok = nnls_worst <= 1e-8

    grid_worst = 0.0
    for seed in (1, 2, 3):
        # the public config enforces a finer grid, so the 8-cell comparison
        # drives the solver interface directly with the same program shape
        wc, B, counts, grid, anchor = _cons_instance(seed)
        band = 0.02
        n_total = counts.sum()

        def value_and_grad(wvec, B=B, counts=counts, n_total=n_total):
            mix = B @ wvec
            return (float(counts @ np.log(mix)) / n_total,
                    (B.T @ (counts / mix)) / n_total)

        prog = SimplexProgram(value_and_grad=value_and_grad, n=8, monotone=True,
                              band=(grid ** (wc.k - 1), anchor, band),
                              loglin=(B, counts))
        res = simplex_maximize(prog, np.full(8, 0.125))
        grid_val = _grid_search_cons(B, counts, grid, wc.k, anchor, band)
        grid_worst = max(grid_worst, abs(res.objective - grid_val))
    grid_ok = grid_worst <= 1e-4

    wc, B, counts, grid, _ = _cons_instance(4, M=32)
    n_total = counts.sum()
    fd_worst = 0.0
    for _ in range(20):
        w = rng.random(32) + 0.05
        w /= w.sum()
        mix = B @ w
        g = (B.T @ (counts / mix)) / n_total
        h = 1e-6
        for idx in rng.choice(32, size=4, replace=False):
            e = np.zeros(32)
            e[idx] = h
            up = float(counts @ np.log(B @ (w + e))) / n_total
            dn = float(counts @ np.log(B @ (w - e))) / n_total
            fd = (up - dn) / (2 * h)
            fd_worst = max(fd_worst, abs(fd - g[idx]) / max(abs(g[idx]), 1e-9))
    fd_ok = fd_worst <= 1e-6

    ok = nnls_ok and grid_ok and fd_ok
    report(9, "solver oracles", ok,
           f"nnls vs enumeration {nnls_worst:.1e}; cons vs grid search {grid_worst:.1e}; "
           f"gradient vs finite differences {fd_worst:.1e} rel")
    assert ok


# ---------------------------------------------------------------------------
# 10 & 11. Tracked expectations from the replicated default simulation
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def default_replication():
    cfg = MetaConfig(seed=2026)  # defaults: dim=10, tau=1.0, r=50, m=20, K=50
    records = run_replication(cfg, ClassifierSpec("qda"), k_list=[10],
                              estimators=("exp", "cons", "hd"), n_replicates=20)
    by = {}
    for rec in records:
        by.setdefault(rec["estimator"], []).append(rec)
    return by


def test_c10_variability_ordering(default_replication):
    by = default_replication
    stds = {}
    for name in ("exp", "cons", "hd"):
        vals = [r["p_hat"] for r in by[name] if r["status"] == "ok"]
        assert len(vals) >= 15, f"{name} failed too often to compare variability"
        stds[name] = float(np.std(vals, ddof=1))
    holds = stds["exp"] >= stds["cons"] and stds["exp"] >= stds["hd"]
    detail = (f"std exp={stds['exp']:.4f}, cons={stds['cons']:.4f}, hd={stds['hd']:.4f}; "
              f"ordering {'holds' if holds else 'VIOLATED (tracked expectation)'}")
    report(10, "variability ordering (tracked)", True, detail)
    if not holds:
        warnings.warn("tracked expectation violated: exponential-mixture estimates were "
                      "not the most variable in this run")


def test_c11_extrapolation_beats_benchmark(default_replication):
    by = default_replication
    bench = np.mean([abs(r["error"]) for r in by["benchmark"]])
    maes = {}
    for name in ("cons", "hd"):
        vals = [abs(r["error"]) for r in by[name] if r["status"] == "ok"]
        assert vals, f"{name} produced no estimates"
        maes[name] = float(np.mean(vals))
    holds = maes["cons"] <= bench and maes["hd"] <= bench
    detail = (f"mae benchmark={bench:.4f}, cons={maes['cons']:.4f}, hd={maes['hd']:.4f}; "
              f"expectation {'holds' if holds else 'VIOLATED (tracked expectation)'}")
    report(11, "extrapolation beats benchmark (tracked)", True, detail)
    if not holds:
        warnings.warn("tracked expectation violated: constrained/high-dimensional "
                      "estimates did not beat the small-subset benchmark in this run")


# ---------------------------------------------------------------------------
# 12. End-to-end determinism
# ---------------------------------------------------------------------------


def test_c12_end_to_end_determinism(tmp_path):
    runner = CliRunner()
    sim_args = ["simulate", "--dim", "2", "--target-K", "8", "--k", "3,4",
                "--replicates", "2", "--train-per-class", "8",
                "--tests-per-class", "4", "--grid-size", "64", "--seed", "5"]
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / f"sim_{tag}"
        result = runner.invoke(cli_main, sim_args + ["--out", str(out)])
        assert result.exit_code == 0, result.output
        outs.append(out)
    sim_identical = all(
        (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        for name in ("replication.csv", "replication_config.json"))

    counts_path = tmp_path / "counts.csv"
    rng = np.random.default_rng(12)
    u = rng.beta(2.0, 1.0, size=500)
    write_win_counts(counts_path, WinCounts(v=rng.binomial(9, u),
                                            class_ids=rng.integers(1, 11, 500), k=10))
    ex_outs = []
    for tag in ("a", "b"):
        out = tmp_path / f"ex_{tag}"
        result = runner.invoke(cli_main, ["extrapolate", "--input", str(counts_path),
                                          "--target-K", "40", "--out", str(out)])
        assert result.exit_code == 0, result.output
        ex_outs.append(out)
    ex_identical = all(
        (ex_outs[0] / name).read_bytes() == (ex_outs[1] / name).read_bytes()
        for name in ("report.json", "curve.csv"))

    ok = sim_identical and ex_identical
    report(12, "end-to-end determinism", ok,
           f"simulate bytes identical: {sim_identical}; "
           f"extrapolate bytes identical: {ex_identical}")
    assert ok
