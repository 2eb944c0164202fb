"""Independent oracles used by the tests.

These deliberately avoid the library's own code paths: quadrature by
composite Simpson, simplex projection by the sort-and-threshold method,
and QP minimization by a direct active-set equality solve.  Where a test
checks a library routine against one of these, the two sides share no
algorithm.
"""

import numpy as np


def simpson(f, a, b, n=100_001):
    """Composite Simpson quadrature on a dense grid (odd n)."""
    if n % 2 == 0:
        n += 1
    x = np.linspace(a, b, n)
    y = f(x)
    h = (b - a) / (n - 1)
    return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-2:2].sum())


def double_simpson(f, a, b, c, d, n=801):
    """Tensor Simpson for smooth double integrals."""
    if n % 2 == 0:
        n += 1
    x = np.linspace(a, b, n)
    y = np.linspace(c, d, n)
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-2:2] = 2.0
    vals = f(x[:, None], y[None, :])
    hx = (b - a) / (n - 1)
    hy = (d - c) / (n - 1)
    return hx * hy / 9.0 * (w[:, None] * w[None, :] * vals).sum()


def project_simplex_sorted(v, m=1.0):
    """Projection onto {w >= 0, sum w = m} by sorting (no bisection)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, len(v) + 1)
    cond = u + (m - css) / k > 0
    rho = np.max(np.nonzero(cond)[0])
    lam = (m - css[rho]) / (rho + 1.0)
    return np.maximum(v + lam, 0.0)


def fixed_step_pg(A, b, m, iters=20_000, w0=None):
    """Plain projected gradient with a fixed 1/L step (uncapped simplex)."""
    n = len(b)
    w = np.full(n, m / n) if w0 is None else w0.copy()
    # crude Lipschitz bound through a few power iterations
    v = np.ones(n) / np.sqrt(n)
    for _ in range(20):
        v = A @ v
        v /= np.linalg.norm(v)
    L = 2.0 * abs(v @ (A @ v)) + 1e-12
    for _ in range(iters):
        g = 2.0 * (A @ w) + b
        w = project_simplex_sorted(w - g / L, m)
    return w


def active_set_qp(A, b, m, max_rounds=100):
    """Direct minimizer of w^t A w + b^t w over the simplex {w>=0, sum=m}.

    Solves the equality-constrained KKT system on the active set, prunes
    negative weights, and re-admits cells whose gradient drops below the
    multiplier.  Independent of any iterative descent.
    """
    n = len(b)
    active = np.ones(n, dtype=bool)
    w = np.zeros(n)
    for _ in range(max_rounds):
        idx = np.flatnonzero(active)
        na = idx.size
        M = np.zeros((na + 1, na + 1))
        M[:na, :na] = 2.0 * A[np.ix_(idx, idx)]
        M[:na, na] = -1.0
        M[na, :na] = 1.0
        rhs = np.concatenate([-b[idx], [m]])
        sol = np.linalg.solve(M, rhs)
        wa, mult = sol[:na], sol[na]
        if (wa >= -1e-13).all():
            w = np.zeros(n)
            w[idx] = np.clip(wa, 0.0, None)
            g = 2.0 * (A @ w) + b
            violated = (~active) & (g < mult - 1e-9)
            if not violated.any():
                return w, float(w @ (A @ w) + b @ w), mult
            active |= violated
        else:
            active[idx[wa < -1e-13]] = False
    raise RuntimeError("active-set oracle did not settle")


def random_spd(rng, d, jitter=0.05):
    """Random symmetric positive definite matrix with exact symmetry."""
    R = rng.standard_normal((d, d))
    M = R.T @ R + jitter * np.eye(d)
    return (M + M.T) / 2.0
