"""Self-contained numerical kernels: non-negative least squares, concave
maximization over the (optionally monotone) probability simplex, adaptive
quadrature, and bisection root finding.

No SciPy here on purpose: the test suite uses SciPy's independent
implementations as oracles against these kernels, so the two routes must
stay separate.  All kernels are stateless and deterministic: fixed
summation order, no global caches beyond immutable quadrature nodes, no
internal randomness.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InfeasibleStart, MaxIterations, NoBracket, ToleranceNotMet

__all__ = [
    "NnlsProblem",
    "SimplexProgram",
    "SimplexResult",
    "nnls_solve",
    "simplex_maximize",
    "integrate",
    "bisect",
]


# ---------------------------------------------------------------------------
# Non-negative least squares (Lawson-Hanson active set)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NnlsProblem:
    """min ||A w - b||^2 subject to w >= 0."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if A.ndim != 2 or A.shape[1] < 1 or A.shape[0] < 1:
            raise ValueError("A must be 2-d with at least one row and column")
        if b.shape != (A.shape[0],):
            raise ValueError("b must be 1-d with one entry per row of A")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("A and b must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)


def nnls_solve(problem, tol=1e-10, max_iter=None):
    """Solve a non-negative least squares problem by the active-set method.

    Column selection uses norm-scaled dual values, which keeps the active
    set on target for badly scaled dictionaries; the KKT exit test is on
    the raw dual: every zero-weight column's gradient >= -tol and every
    positive-weight column's gradient within tol of zero.  Columns whose
    activation makes no floating-point progress (the degenerate alpha = 0
    cycle on nearly collinear dictionaries) are set aside until the
    iterate moves; the returned point is then optimal to achievable
    precision.

    Returns the weight vector.  Raises :class:`MaxIterations` with the
    best iterate and a KKT report attached if the cap (default 10 per
    column) is hit first.
    """
    A, b = problem.A, problem.b
    m, n = A.shape
    if max_iter is None:
        max_iter = 10 * n
    scale = np.linalg.norm(A, axis=0)
    scale[scale == 0.0] = 1.0

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    stuck = np.zeros(n, dtype=bool)
    outer = 0
    while True:
        dual = A.T @ (b - A @ x)
        candidates = np.where(passive | stuck, -np.inf, dual)
        if np.max(candidates) <= tol:
            return x
        if outer >= max_iter:
            raise MaxIterations(
                f"NNLS active-set cap {max_iter} reached",
                result={"x": x, "kkt_max_violation": float(np.max(candidates))},
            )
        outer += 1
        j = int(np.argmax(candidates / scale))
        passive[j] = True
        x_before = x.copy()
        for _ in range(3 * n + 3):
            z = np.zeros(n)
            z[passive] = np.linalg.lstsq(A[:, passive], b, rcond=None)[0]
            if np.min(z[passive]) > 0.0:
                x = z
                break
            # step to the first coordinate hitting zero, then drop it
            mask = passive & (z <= 0.0)
            alpha = np.min(x[mask] / (x[mask] - z[mask]))
            x = x + alpha * (z - x)
            passive[x <= 0.0] = False
            x[~passive] = 0.0
            if not passive[j] and np.array_equal(x, x_before):
                break
        if np.array_equal(x, x_before):
            stuck[j] = True
            passive[j] = False
        else:
            stuck[:] = False


# ---------------------------------------------------------------------------
# Concave maximization over the (monotone) simplex
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimplexProgram:
    """Concave maximization over {w >= 0, sum w = 1}, optionally restricted
    to nondecreasing w and to a band |a . w - center| <= halfwidth.

    ``value_and_grad`` must return the concave objective and its gradient
    at any strictly positive w; concavity is the caller's contract.

    When the objective has the log-linear mixture form
    ``sum_v counts_v log((design @ w)_v) / sum(counts)``, pass
    ``loglin=(design, counts)`` as well: the solver then uses exact
    restricted Hessians (fast and sharp).  ``value_and_grad`` stays
    authoritative for reported objective values.
    """

    value_and_grad: callable
    n: int
    monotone: bool = False
    band: tuple = None  # (a: ndarray, center: float, halfwidth: float)
    tol: float = 1e-9
    max_iter: int = 50_000
    loglin: tuple = None  # (design: (rows, n), counts: (rows,))

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.band is not None:
            a, center, halfwidth = self.band
            a = np.asarray(a, dtype=np.float64)
            if a.shape != (self.n,) or not np.all(np.isfinite(a)):
                raise ValueError("band direction must be a finite vector of length n")
            if halfwidth <= 0:
                raise ValueError("band halfwidth must be positive")
            object.__setattr__(self, "band", (a, float(center), float(halfwidth)))
        if self.loglin is not None:
            design, counts = self.loglin
            design = np.asarray(design, dtype=np.float64)
            counts = np.asarray(counts, dtype=np.float64)
            if design.ndim != 2 or design.shape[1] != self.n:
                raise ValueError("loglin design must have n columns")
            if counts.shape != (design.shape[0],) or np.min(counts) < 0:
                raise ValueError("loglin counts must be nonnegative, one per design row")
            if np.min(design) < 0:
                raise ValueError("loglin design must be nonnegative")
            object.__setattr__(self, "loglin", (design, counts))


@dataclass(frozen=True)
class SimplexResult:
    w: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    band_gap: float = 0.0
    band_violation: float = 0.0
    penalty: float = 0.0


def _suffix_means(x):
    """y[l] = mean(x[l:]); the adjoint of the suffix-uniform embedding."""
    n = x.size
    return np.cumsum(x[::-1])[::-1] / (n - np.arange(n))


def _w_from_theta(theta):
    n = theta.size
    return np.cumsum(theta / (n - np.arange(n)))


def _theta_from_w(w):
    n = w.size
    return np.diff(w, prepend=0.0) * (n - np.arange(n))


_THETA_FLOOR = 1e-300


def _pfw_ascent(oracle, x, tol, max_iter):
    """Pairwise Frank-Wolfe (vertex exchange) ascent on the simplex.

    Each step moves mass from the worst support coordinate to the best
    coordinate with an exact 1-d line search (derivative bisection on the
    concave slice).  The Frank-Wolfe gap max(g) - x.g certifies
    suboptimality for a concave objective, so the stopping rule
    ``gap <= tol * (1 + |f|)`` is a true optimality bound.
    """
    x = np.asarray(x, dtype=np.float64).copy()
    f, g = oracle(x)
    gap = float(np.max(g) - x @ g)
    it = 0
    while it < max_iter:
        it += 1
        s = int(np.argmax(g))
        support = np.nonzero(x > 0.0)[0]
        a = int(support[np.argmin(g[support])])
        gap = float(g[s] - x @ g)
        if gap <= tol * (1.0 + abs(f)) or s == a:
            return x, f, g, it, True
        t_max = float(x[a])
        d = np.zeros_like(x)
        d[s], d[a] = 1.0, -1.0

        def slope(t):
            with np.errstate(divide="ignore", invalid="ignore"):
                _, gt = oracle(x + t * d)
                val = gt[s] - gt[a]
            return val if np.isfinite(val) else -np.inf

        if slope(t_max) >= 0.0:
            step = t_max
        else:
            lo, hi = 0.0, t_max
            for _ in range(30):
                mid = 0.5 * (lo + hi)
                if slope(mid) > 0.0:
                    lo = mid
                else:
                    hi = mid
            step = 0.5 * (lo + hi)
        if step <= 0.0:
            return x, f, g, it, True
        x = x + step * d
        x[a] = max(x[a], 0.0)
        if it % 128 == 0:
            x /= x.sum()
        f, g = oracle(x)
    return x, f, g, it, False


def _restricted_newton(A, c, lin, theta, tol, max_steps):
    """Equality-constrained projected Newton for
    max sum_v c_v log((A theta)_v) / N + lin . theta over the simplex,
    restricted to the columns already in ``theta``'s index set.

    Active-set treatment of the bounds: coordinates driven to zero are
    dropped from the free set; a zero coordinate re-enters when its KKT
    multiplier says so.  Returns (theta, n_steps).
    """
    N = c.sum()
    m = theta.size
    free = np.ones(m, dtype=bool)
    for step_count in range(1, max_steps + 1):
        mix = A @ theta
        w_rows = c / mix
        g = (A.T @ w_rows) / N + lin
        # release zero coordinates whose multiplier is attractive
        nu_guess = float(theta @ g)
        free |= (theta <= 0.0) & (g > nu_guess + 1e-12)
        for _ in range(m + 1):
            idx = np.nonzero(free)[0]
            Af = A[:, idx]
            H = (Af.T * (w_rows / mix)) @ Af / N
            ridge = 1e-12 * max(float(np.max(np.diagonal(H))), 1e-300)
            H[np.diag_indices_from(H)] += ridge
            try:
                L = np.linalg.cholesky(H)
            except np.linalg.LinAlgError:
                H[np.diag_indices_from(H)] += 1e-8 * float(np.max(np.diagonal(H)))
                L = np.linalg.cholesky(H)
            rhs = np.stack([g[idx], np.ones(idx.size)], axis=1)
            sol = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
            u, z = sol[:, 0], sol[:, 1]
            nu = float(u.sum() / z.sum())
            delta = u - nu * z
            blocked = (theta[idx] <= 0.0) & (delta < 0.0)
            if not blocked.any():
                break
            free[idx[blocked]] = False
        else:
            break
        kkt = max(float(np.max(np.abs(g[idx] - nu))) if idx.size else 0.0,
                  float(np.max(g[~free] - nu, initial=0.0)))
        f0 = float(c @ np.log(mix)) / N + float(lin @ theta)
        if kkt <= tol * (1.0 + abs(f0)):
            return theta, step_count
        d = np.zeros(m)
        d[idx] = delta
        neg = d < 0.0
        t_max = float(np.min(theta[neg] / -d[neg])) if neg.any() else 1.0
        t = min(1.0, t_max)
        # backtracking on the objective; boundary steps drop a coordinate
        for _ in range(60):
            cand = theta + t * d
            cand[cand < 0.0] = 0.0
            mix_c = A @ cand
            if np.min(mix_c) > 0.0:
                f_c = float(c @ np.log(mix_c)) / N + float(lin @ cand)
                if f_c >= f0 + 1e-4 * t * float(d[idx] @ g[idx]) or f_c >= f0:
                    break
            t *= 0.5
        else:
            return theta, step_count
        theta = theta + t * d
        theta[theta < 1e-300] = 0.0
        free &= theta > 0.0
        free[idx[np.argmax(delta)]] = True  # keep at least the growing coord
        if not free.any():
            free[int(np.argmax(theta))] = True
    return theta, max_steps


def _loglin_maximize(A, c, lin, x0, tol, max_iter):
    """Support-generation solver for simplex-constrained log-linear mixture
    objectives: alternate restricted Newton corrections on the active
    support with adding the most violating column (the optimum is
    supported on at most rows+1 columns).

    Returns (x, f, g, iterations, converged) like the generic ascent.
    """
    n = A.shape[1]
    N = c.sum()
    order = np.argsort(x0)[::-1]
    cum = np.cumsum(x0[order])
    n_seed = min(max(int(np.searchsorted(cum, 1.0 - 1e-9)) + 1, 1), 32)
    S = np.sort(order[:n_seed])
    theta_S = x0[S] / x0[S].sum()
    used = 0
    for _ in range(4 * n + 8):
        theta_S, steps = _restricted_newton(A[:, S], c, lin[S], theta_S,
                                            0.25 * tol, min(200, max(max_iter - used, 1)))
        used += steps
        total = theta_S.sum()
        if total > 0:
            theta_S /= total
        x = np.zeros(n)
        x[S] = theta_S
        mix = A @ x
        f = float(c @ np.log(mix)) / N + float(lin @ x)
        g = (A.T @ (c / mix)) / N + lin
        used += 1
        gap = float(np.max(g) - x @ g)
        if gap <= tol * (1.0 + abs(f)):
            return x, f, g, used, True
        if used >= max_iter:
            return x, f, g, used, False
        j = int(np.argmax(g))
        if j in S:
            return x, f, g, used, False
        live = theta_S > 0.0
        S = np.concatenate([S[live], [j]])
        theta_S = np.concatenate([theta_S[live], [0.0]])
        srt = np.argsort(S)
        S, theta_S = S[srt], theta_S[srt]
    return x, f, g, used, False


def _fcfw_ascent(oracle, x, tol, max_iter, max_rounds=2000):
    """Fully corrective Frank-Wolfe: alternate an exact correction on the
    current support (via pairwise steps) with adding the best violating
    vertex.  The optimum of a concave objective whose value depends on x
    through a low-dimensional linear image is supported on few vertices,
    so the corrections stay small even when the simplex is large.
    """
    x = np.asarray(x, dtype=np.float64).copy()
    n = x.size
    # seed the support with the heaviest starting coordinates only; a dense
    # start would make the first correction as slow as the full problem
    order = np.argsort(x)[::-1]
    cum = np.cumsum(x[order])
    n_seed = min(max(int(np.searchsorted(cum, 1.0 - 1e-9)) + 1, 1), 32)
    S = np.sort(order[:n_seed])
    xS = x[S] / x[S].sum()
    used = 0
    for _ in range(max_rounds):
        def sub(theta):
            full = np.zeros(n)
            full[S] = theta
            f, g = oracle(full)
            return f, g[S]

        xS, _, _, it, _ = _pfw_ascent(sub, xS, 0.25 * tol, max(max_iter - used, 1))
        used += it
        x = np.zeros(n)
        x[S] = xS
        f, g = oracle(x)
        used += 1
        gap = float(np.max(g) - x @ g)
        if gap <= tol * (1.0 + abs(f)):
            return x, f, g, used, True
        if used >= max_iter:
            return x, f, g, used, False
        j = int(np.argmax(g))
        if j in S:
            return x, f, g, used, False
        live = xS > 0.0
        S = np.concatenate([S[live], [j]])
        xS = np.concatenate([xS[live], [0.0]])
    return x, f, g, used, False


def simplex_maximize(prog, w0):
    """Maximize a concave objective over the constrained simplex.

    The monotone cone is handled exactly by reparametrizing nondecreasing
    weights as mixtures of suffix-uniform vectors (the cone's extreme
    points), so iterates are feasible by construction.  A band constraint
    is enforced through its exact multiplier: the tilted objective
    F(x) + mu * (a . x) is maximized over a bracket of multipliers and mu
    is root-found until the moment sits on the binding boundary; the band
    moment is monotone in mu, so every subproblem stays smooth and the
    search is sound.

    Deterministic given (prog, w0).  Raises :class:`InfeasibleStart` if
    w0 is not a (weakly) feasible simplex point, and :class:`MaxIterations`
    with the best :class:`SimplexResult` attached if the iteration budget
    runs out before convergence and feasibility.
    """
    w0 = np.asarray(w0, dtype=np.float64)
    if w0.shape != (prog.n,):
        raise InfeasibleStart(f"w0 must have length {prog.n}")
    if np.min(w0) < -1e-12 or abs(w0.sum() - 1.0) > 1e-8:
        raise InfeasibleStart("w0 must be nonnegative and sum to 1")
    if prog.monotone and np.any(np.diff(w0) < -1e-12):
        raise InfeasibleStart("w0 must be nondecreasing for a monotone program")

    if prog.monotone:
        from_x, pull = _w_from_theta, _suffix_means
        x0 = _theta_from_w(w0)
    else:
        from_x, pull = (lambda x: x), (lambda g: g)
        x0 = w0.copy()
    x0 = np.maximum(x0, 0.0)
    x0 /= x0.sum()

    if prog.band is not None:
        a, center, halfwidth = prog.band
        a_x = pull(a)
    else:
        a_x, center, halfwidth = None, 0.0, 0.0

    state = {"used": 0}
    if prog.loglin is not None:
        design, row_counts = prog.loglin
        design_x = np.apply_along_axis(_suffix_means, 1, design) if prog.monotone else design
    else:
        design_x = None

    def solve_at(mu, x_start, tol_mult=1.0):
        budget = max(prog.max_iter - state["used"], 1)
        if design_x is not None:
            lin = mu * a_x if (a_x is not None and mu != 0.0) else np.zeros(prog.n)
            x, f, g, it, conv = _loglin_maximize(design_x, row_counts, lin, x_start,
                                                 prog.tol * tol_mult, budget)
        else:
            def oracle(x):
                f, gw = prog.value_and_grad(from_x(x))
                g = pull(gw)
                if mu != 0.0:
                    f = f + mu * float(a_x @ x)
                    g = g + mu * a_x
                return f, g

            x, f, g, it, conv = _fcfw_ascent(oracle, x_start, prog.tol * tol_mult, budget)
        state["used"] += it
        gap = float(a_x @ x) - center if a_x is not None else 0.0
        kkt = float(np.max(g) - x @ g)
        return x, gap, kkt, conv

    loose = 100.0
    x, gap, kkt, converged = solve_at(0.0, x0, loose if a_x is not None else 1.0)
    mu = 0.0
    if a_x is not None and abs(gap) > halfwidth and converged:
        # The band binds, so the constrained optimum sits on the boundary
        # nearest the unconstrained optimum.  Root-find the multiplier
        # bringing the band moment to that boundary (the moment is
        # nondecreasing in mu); when non-unique tilted optima make the
        # moment jump across the boundary, the segment between the two
        # bracket solutions recovers the boundary point exactly.
        side = np.sign(gap)
        target = side * halfwidth

        def excess(gap_value):
            # positive: still outside the band; <= 0: feasible
            return (gap_value - target) * side

        mu_in, p_in, x_in = 0.0, excess(gap), x    # infeasible side
        mu_out = -side
        p_out = None
        for _ in range(80):
            x_try, gap_try, kkt_try, conv_try = solve_at(mu_out, x_in, loose)
            if state["used"] >= prog.max_iter and not conv_try:
                break
            p_try = excess(gap_try)
            if p_try <= 0.0:
                p_out, x_out = p_try, x_try
                x, gap, kkt, converged, mu = x_try, gap_try, kkt_try, conv_try, mu_out
                break
            mu_in, p_in, x_in = mu_out, p_try, x_try
            mu_out *= 2.0
        combined = False
        pinned = False
        for step in range(120):
            if p_out is None or state["used"] >= prog.max_iter:
                break
            if -1e-4 * halfwidth <= p_out <= 0.0:
                pinned = True
                break  # feasible and pinned to the boundary
            if abs(mu_in - mu_out) <= 1e-13 * (1.0 + abs(mu_in)):
                break
            # regula falsi alternating with bisection (robust when the
            # moment jumps in mu)
            if step % 2 == 0 and p_in != p_out:
                mid = mu_in + (mu_out - mu_in) * (p_in / (p_in - p_out))
                span = abs(mu_out - mu_in)
                lo, hi = min(mu_in, mu_out), max(mu_in, mu_out)
                if not (lo + 0.01 * span <= mid <= hi - 0.01 * span):
                    mid = 0.5 * (mu_in + mu_out)
            else:
                mid = 0.5 * (mu_in + mu_out)
            x_try, gap_try, kkt_try, conv_try = solve_at(mid, x, loose)
            p_try = excess(gap_try)
            if p_try > 0.0:
                mu_in, p_in, x_in = mid, p_try, x_try
            else:
                mu_out, p_out, x_out = mid, p_try, x_try
                x, gap, kkt, converged, mu = x_try, gap_try, kkt_try, conv_try, mid
        if p_out is not None and not pinned and state["used"] < prog.max_iter:
            # combine the bracket solutions into the exact boundary point;
            # with a tight multiplier bracket both are near-optimal for the
            # same tilted problem, so the segment point is the constrained
            # optimum up to the inner tolerance
            lam = p_in / (p_in - p_out) if p_in != p_out else 0.5
            x = np.maximum((1.0 - lam) * x_in + lam * x_out, 0.0)
            x /= x.sum()
            gap = float(a_x @ x) - center
            mu = 0.5 * (mu_in + mu_out)
            combined = True
        if combined:
            # diagnostics at the recovered point under the bracket multiplier
            _, gw = prog.value_and_grad(from_x(x))
            g = pull(gw) + mu * a_x
            kkt = float(np.max(g) - x @ g)
            converged = True
        elif converged:
            # polish at the accepted multiplier with the tight tolerance
            x_try, gap_try, kkt_try, conv_try = solve_at(mu, x, 1.0)
            if excess(gap_try) <= 0.0:
                x, gap, kkt, converged = x_try, gap_try, kkt_try, conv_try

    viol = max(0.0, abs(gap) - halfwidth) if a_x is not None else 0.0
    w = from_x(x)
    w = np.maximum(w, 0.0)
    w /= w.sum()
    f_plain, _ = prog.value_and_grad(w)
    result = SimplexResult(
        w=w, objective=float(f_plain), kkt_residual=kkt, iterations=state["used"],
        converged=bool(converged and viol <= 1e-9),
        band_gap=gap, band_violation=viol, penalty=mu,
    )
    if not result.converged:
        raise MaxIterations(
            f"simplex ascent terminated without convergence "
            f"(iterations {state['used']}/{prog.max_iter}, band violation {viol:.3g})",
            result=result)
    return result


# ---------------------------------------------------------------------------
# Adaptive quadrature
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _gauss_legendre(order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def integrate(f, lo, hi, tol=1e-10, order=32, max_panels=20_000):
    """Adaptive panel quadrature with Gauss-Legendre rules.

    Panels whose two-half refinement disagrees with the single-panel value
    by more than the panel's share of ``tol`` are bisected.  ``f`` must
    accept an ndarray of evaluation points.

    Raises :class:`ToleranceNotMet` (with the best estimate attached) if
    the panel budget is exhausted first.
    """
    lo, hi = float(lo), float(hi)
    if not hi > lo:
        raise ValueError("need hi > lo")
    nodes, weights = _gauss_legendre(int(order))

    def panel(a, b):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        return half * float(weights @ f(mid + half * nodes))

    width = hi - lo
    stack = [(lo, hi, panel(lo, hi))]
    total = 0.0
    panels = 0
    while stack:
        a, b, whole = stack.pop()
        panels += 1
        if panels > max_panels:
            best = total + whole + sum(p[2] for p in stack)
            raise ToleranceNotMet(
                f"panel budget {max_panels} exhausted", estimate=best,
                error_estimate=float("nan"))
        m = 0.5 * (a + b)
        left, right = panel(a, m), panel(m, b)
        err = abs(whole - (left + right))
        if err <= tol * max((b - a) / width, 1e-6) or (b - a) <= 1e-14 * width:
            total += left + right
        else:
            stack.append((a, m, left))
            stack.append((m, b, right))
    return total


# ---------------------------------------------------------------------------
# Bisection
# ---------------------------------------------------------------------------


def bisect(f, lo, hi, xtol=1e-12, ftol=None, max_iter=200):
    """Root of a monotone function by bisection.

    Stops when the bracket width falls below ``xtol`` (and, if ``ftol`` is
    given, additionally requires |f| <= ftol at the returned point,
    continuing to shrink the bracket until both hold).

    Raises :class:`NoBracket` if f(lo) and f(hi) have the same strict sign.
    """
    lo, hi = float(lo), float(hi)
    flo, fhi = float(f(lo)), float(f(hi))
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise NoBracket(f"f({lo})={flo:.3g} and f({hi})={fhi:.3g} do not bracket a root")
    mid, fmid = lo, flo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = float(f(mid))
        if fmid == 0.0:
            return mid
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
        if hi - lo <= xtol and (ftol is None or abs(fmid) <= ftol):
            return 0.5 * (lo + hi)
    return 0.5 * (lo + hi)
