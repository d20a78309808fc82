"""Numerical kernels against independent oracles (SciPy and brute force)."""

import itertools

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from acx import InfeasibleStart, NoBracket, ToleranceNotMet
from acx.solvers import (
    NnlsProblem,
    SimplexProgram,
    _suffix_means,
    _theta_from_w,
    _w_from_theta,
    bisect,
    integrate,
    nnls_solve,
    simplex_maximize,
)


def exhaustive_nnls(A, b):
    """Try every support: unconstrained least squares on it, keep feasible
    candidates, return the best.  The optimal support's LS solution is the
    constrained optimum, so this enumeration contains it."""
    n = A.shape[1]
    best_x, best_res = np.zeros(n), np.linalg.norm(b)
    for size in range(1, n + 1):
        for support in itertools.combinations(range(n), size):
            sol, *_ = np.linalg.lstsq(A[:, list(support)], b, rcond=None)
            if np.min(sol) < -1e-12:
                continue
            x = np.zeros(n)
            x[list(support)] = np.clip(sol, 0.0, None)
            res = np.linalg.norm(A @ x - b)
            if res < best_res:
                best_x, best_res = x, res
    return best_x, best_res


class TestNnls:
    def test_identity(self):
        x = nnls_solve(NnlsProblem(np.eye(3), np.array([1.0, 2.0, 3.0])))
        np.testing.assert_allclose(x, [1.0, 2.0, 3.0], atol=1e-12)

    def test_negativity_clipped(self):
        x = nnls_solve(NnlsProblem(np.eye(2), np.array([1.0, -1.0])))
        np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-12)

    def test_matches_exhaustive_enumeration(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            A = rng.normal(size=(6, 4))
            b = rng.normal(size=6)
            x = nnls_solve(NnlsProblem(A, b))
            x_star, res_star = exhaustive_nnls(A, b)
            assert np.linalg.norm(A @ x - b) <= res_star + 1e-8
            np.testing.assert_allclose(x, x_star, atol=1e-6)

    def test_kkt_conditions(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            A = rng.normal(size=(8, 5))
            b = rng.normal(size=8)
            x = nnls_solve(NnlsProblem(A, b))
            grad = A.T @ (A @ x - b)
            assert np.all(grad[x == 0.0] >= -1e-10)
            assert np.all(np.abs(grad[x > 0.0]) <= 1e-8)

    def test_residual_never_exceeds_norm_b(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            A = rng.normal(size=(5, 7))
            b = rng.normal(size=5)
            x = nnls_solve(NnlsProblem(A, b))
            assert np.linalg.norm(A @ x - b) <= np.linalg.norm(b) + 1e-12

    def test_validation(self):
        with pytest.raises(ValueError, match="finite"):
            NnlsProblem(np.array([[np.nan]]), np.array([1.0]))


def suffix_vertices(n):
    """Extreme points of the monotone simplex: uniform on each suffix."""
    verts = np.zeros((n, n))
    for start in range(n):
        verts[start, start:] = 1.0 / (n - start)
    return verts


class TestSuffixTransform:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        theta = rng.random(9)
        theta /= theta.sum()
        w = _w_from_theta(theta)
        assert np.all(np.diff(w) >= -1e-15) and w.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(_theta_from_w(w), theta, atol=1e-12)

    def test_adjoint_identity(self):
        """suffix_means is the adjoint: <T theta, g> = <theta, suffix_means(g)>."""
        rng = np.random.default_rng(1)
        theta = rng.random(11)
        theta /= theta.sum()
        g = rng.normal(size=11)
        lhs = _w_from_theta(theta) @ g
        rhs = theta @ _suffix_means(g)
        assert lhs == pytest.approx(rhs, abs=1e-12)


class TestSimplexMaximize:
    def test_log_barrier_symmetric_optimum(self):
        prog = SimplexProgram(
            value_and_grad=lambda w: (float(np.sum(np.log(w))), 1.0 / w), n=4)
        res = simplex_maximize(prog, np.full(4, 0.25))
        np.testing.assert_allclose(res.w, 0.25, atol=1e-8)
        assert res.converged

    def test_linear_monotone_hits_best_suffix_vertex(self):
        rng = np.random.default_rng(8)
        g = rng.normal(size=12)
        prog = SimplexProgram(
            value_and_grad=lambda w: (float(g @ w), g.copy()), n=12, monotone=True)
        res = simplex_maximize(prog, np.full(12, 1.0 / 12))
        best = max(suffix_vertices(12) @ g)
        assert res.objective == pytest.approx(best, abs=1e-6)
        assert np.all(np.diff(res.w) >= -1e-12)

    def test_objective_never_below_start(self):
        rng = np.random.default_rng(3)
        A = rng.normal(size=(5, 6))

        def oracle(w):
            r = A @ w
            return -float(r @ r), -2.0 * A.T @ r

        w0 = rng.random(6) + 0.1
        w0 /= w0.sum()
        prog = SimplexProgram(value_and_grad=oracle, n=6)
        res = simplex_maximize(prog, w0)
        assert res.objective >= oracle(w0)[0] - 1e-12
        assert abs(res.w.sum() - 1.0) <= 1e-8 and np.min(res.w) >= 0.0

    def test_band_constraint_enforced(self):
        g = np.linspace(0.0, 1.0, 8)
        a = np.linspace(0.0, 1.0, 8) ** 2
        prog = SimplexProgram(
            value_and_grad=lambda w: (float(g @ w), g.copy()), n=8,
            band=(a, 0.3, 0.01))
        res = simplex_maximize(prog, np.full(8, 0.125))
        assert abs(float(a @ res.w) - 0.3) <= 0.01 + 1e-8

    def test_infeasible_start_rejected(self):
        prog = SimplexProgram(value_and_grad=lambda w: (0.0, np.zeros(3)), n=3)
        with pytest.raises(InfeasibleStart):
            simplex_maximize(prog, np.array([0.5, 0.6, 0.2]))
        mono = SimplexProgram(value_and_grad=lambda w: (0.0, np.zeros(3)), n=3,
                              monotone=True)
        with pytest.raises(InfeasibleStart):
            simplex_maximize(mono, np.array([0.5, 0.3, 0.2]))

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        g = rng.normal(size=10)
        prog = SimplexProgram(value_and_grad=lambda w: (float(g @ w), g.copy()),
                              n=10, monotone=True)
        w0 = np.full(10, 0.1)
        r1 = simplex_maximize(prog, w0)
        r2 = simplex_maximize(prog, w0)
        np.testing.assert_array_equal(r1.w, r2.w)
        assert r1.objective == r2.objective


class TestIntegrate:
    def test_constant(self):
        assert integrate(lambda z: np.ones_like(z), 0.0, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_normal_density_normalizes(self):
        val = integrate(lambda z: norm.pdf(z), -40.0, 40.0, tol=1e-12)
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_cdf_power_antiderivative(self):
        # phi * Phi^9 integrates to Phi^10 / 10
        val = integrate(lambda z: norm.pdf(z) * norm.cdf(z) ** 9, -40.0, 40.0, tol=1e-10)
        assert val == pytest.approx(0.1, abs=1e-10)

    def test_agrees_with_scipy_quad(self):
        def f(z):
            return np.exp(-0.5 * z ** 2) * np.cos(3.0 * z)

        mine = integrate(f, -8.0, 8.0, tol=1e-12)
        ref, _ = quad(lambda z: float(f(np.array(z))), -8.0, 8.0, epsabs=1e-13)
        assert mine == pytest.approx(ref, abs=1e-11)

    def test_budget_exhaustion_carries_estimate(self):
        with pytest.raises(ToleranceNotMet) as exc_info:
            integrate(lambda z: np.abs(np.sin(50.0 / (np.abs(z) + 1e-3))), 0.0, 1.0,
                      tol=1e-14, max_panels=8)
        assert np.isfinite(exc_info.value.estimate)


class TestBisect:
    def test_linear(self):
        assert bisect(lambda x: x - 2.0, 0.0, 5.0) == pytest.approx(2.0, abs=1e-11)

    def test_normal_cdf_median(self):
        assert bisect(lambda x: norm.cdf(x) - 0.5, -5.0, 5.0) == pytest.approx(0.0, abs=1e-11)

    def test_endpoint_root(self):
        assert bisect(lambda x: x, 0.0, 1.0) == 0.0

    def test_no_bracket(self):
        with pytest.raises(NoBracket):
            bisect(lambda x: x + 10.0, 0.0, 1.0)

    def test_ftol_respected(self):
        root = bisect(lambda x: x ** 3, -1.0, 2.0, xtol=1e-3, ftol=1e-12)
        assert abs(root ** 3) <= 1e-12
