"""Block quadratic program over products of capped scaled simplices.

The discretized energy is w^t A w + b^t w with A the block matrix
(c_ij K_ij) and b the per-cell transformed field values.  The feasible
set is, per component, {0 <= w <= cap, sum w = m}: a capped simplex with
a cheap exact projection, so the minimizer is found by projected
gradient iterations with a spectral (Barzilai-Borwein) trial step and a
safeguarded quadratic line search that keeps the energy monotone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .compactify import SphereProblem
from .errors import ExcludedAllCells, InfeasibleConstraint
from .kernel import _entries


@dataclass(frozen=True)
class EnergyQP:
    """Assembled quadratic program on the non-excluded cells."""

    A: NDArray[np.float64]
    b: NDArray[np.float64]
    masses: NDArray[np.float64]
    slices: tuple[slice, ...]          # component ranges in the reduced vector
    caps: NDArray[np.float64]          # np.inf where unbounded
    kept: tuple[NDArray[np.int64], ...]  # reduced -> full-grid cell indices
    problem: SphereProblem

    @property
    def n(self) -> int:
        return self.b.shape[0]

    def objective(self, w: NDArray[np.float64]) -> float:
        return float(w @ (self.A @ w) + self.b @ w)

    def gradient(self, w: NDArray[np.float64]) -> NDArray[np.float64]:
        return 2.0 * (self.A @ w) + self.b

    def split(self, w: NDArray[np.float64]) -> list[NDArray[np.float64]]:
        """Reduced vector -> per-component full-grid weight arrays."""
        out = []
        for i, sl in enumerate(self.slices):
            full = np.zeros(self.problem.grids[i].n)
            full[self.kept[i]] = w[sl]
            out.append(full)
        return out

    def reduce(self, weights: Sequence[NDArray[np.float64]]) -> NDArray[np.float64]:
        """Per-component full-grid weights -> reduced vector."""
        return np.concatenate([np.asarray(weights[i], dtype=float)[self.kept[i]]
                               for i in range(len(self.slices))])


def assemble(problem: SphereProblem) -> EnergyQP:
    """Materialize the block matrix and linear term of the energy."""
    d = problem.d
    kept = []
    for i in range(d):
        idx = np.flatnonzero(~problem.excluded[i])
        if idx.size == 0:
            raise ExcludedAllCells(f"component {i} has no feasible cells")
        kept.append(idx)
    sizes = [k.size for k in kept]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n = int(offsets[-1])
    slices = tuple(slice(int(offsets[i]), int(offsets[i + 1])) for i in range(d))
    A = np.zeros((n, n))
    b = np.zeros(n)
    caps = np.full(n, np.inf)
    C = problem.validated.spec.C.matrix
    cents = [problem.grids[i].centers[kept[i]] for i in range(d)]
    hs = [problem.grids[i].h[kept[i]] for i in range(d)]
    for i in range(d):
        b[slices[i]] = problem.field_values[i][kept[i]]
        if problem.caps[i] is not None:
            caps[slices[i]] = problem.caps[i][kept[i]]
        for j in range(i, d):
            if C[i, j] == 0.0:
                continue
            # cross blocks handle coincident cells of overlapping supports
            # through the zero-distance mask inside _entries
            block = _entries(cents[i], hs[i], cents[j], hs[j], 0.0, same=(j == i))
            A[slices[i], slices[j]] = C[i, j] * block
            if j != i:
                A[slices[j], slices[i]] = C[j, i] * block.T
    A.setflags(write=False)
    b.setflags(write=False)
    caps.setflags(write=False)
    return EnergyQP(A, b, problem.masses.copy(), slices, caps, tuple(kept), problem)


def project_capped_simplex(v: NDArray[np.float64], cap, m: float) -> NDArray[np.float64]:
    """Euclidean projection onto {0 <= w <= cap, sum w = m}.

    Bisection on the shift: w(lam) = clip(v - lam, 0, cap) has a
    nonincreasing continuous mass, so lam brackets deterministically;
    iteration stops at |sum w - m| <= 1e-12 (lower lam wins ties).
    """
    v = np.asarray(v, dtype=float)
    cap = np.full_like(v, np.inf) if cap is None else np.asarray(cap, dtype=float)
    finite = np.isfinite(cap)
    total_cap = float(np.sum(cap[finite])) if finite.all() else np.inf
    if total_cap < m - 1e-12:
        raise InfeasibleConstraint(f"caps sum to {total_cap:.6g} < mass {m:.6g}")
    lo = float(np.min(v)) - m - 1.0
    hi = float(np.max(v))
    while float(np.sum(np.clip(v - lo, 0.0, cap))) < m:
        lo = 2.0 * lo - hi
    lam = lo
    for _ in range(256):
        lam = 0.5 * (lo + hi)
        s = float(np.sum(np.clip(v - lam, 0.0, cap)))
        if abs(s - m) <= 1e-12:
            break
        if s > m:
            lo = lam
        else:
            hi = lam
    return np.clip(v - lam, 0.0, cap)


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-8
    max_iter: int = 100_000
    seed: Optional[int] = None  # None: uniform start; int: seeded random start


@dataclass(frozen=True)
class Solution:
    """Minimizer candidate with its optimality certificate."""

    weights: tuple[NDArray[np.float64], ...]   # full-grid arrays per component
    energy: float
    kkt_residual: float
    iterations: int
    converged: bool
    multipliers: tuple[float, ...]             # mass-weighted mean gradient on support
    effective_potentials: tuple[NDArray[np.float64], ...]
    energy_history: NDArray[np.float64]
    seed: Optional[int]


def _component_residual(w, g, cap) -> float:
    donors = w > 0.0
    acceptors = w < cap
    if not donors.any() or not acceptors.any():
        return 0.0
    return max(0.0, float(g[donors].max() - g[acceptors].min()))


def _residual_reduced(qp: EnergyQP, w, g) -> float:
    res = 0.0
    for sl in qp.slices:
        res = max(res, _component_residual(w[sl], g[sl], qp.caps[sl]))
    return res


def kkt_residual(qp: EnergyQP, weights: Sequence[NDArray[np.float64]]) -> float:
    """First-order optimality violation of full-grid candidate weights.

    Zero iff no mass can move from a carrying cell to a cell below cap
    with smaller effective potential: the discrete condition that the
    effective potential is constant on the support, at least that
    constant off it, and at most that constant on capped cells.
    """
    w = qp.reduce(weights)
    return _residual_reduced(qp, w, qp.gradient(w))


def _initial_point(qp: EnergyQP, seed: Optional[int]) -> NDArray[np.float64]:
    w = np.empty(qp.n)
    rng = np.random.default_rng(seed) if seed is not None else None
    for m, sl in zip(qp.masses, qp.slices):
        size = sl.stop - sl.start
        if rng is None:
            v = np.full(size, m / size)
        else:
            v = rng.random(size) * (2.0 * m / size)
        w[sl] = project_capped_simplex(v, qp.caps[sl], m)
    return w


def _project(qp: EnergyQP, v: NDArray[np.float64]) -> NDArray[np.float64]:
    out = np.empty_like(v)
    for m, sl in zip(qp.masses, qp.slices):
        out[sl] = project_capped_simplex(v[sl], qp.caps[sl], m)
    return out


def solve(qp: EnergyQP, opts: Optional[SolveOptions] = None,
          callback: Optional[Callable[[int, NDArray[np.float64], float], None]] = None,
          w0: Optional[NDArray[np.float64]] = None) -> Solution:
    """Projected-gradient minimization with spectral steps.

    The trial point is project(w - alpha*g) with a Barzilai-Borwein
    alpha; the move along the projected direction uses the exact
    quadratic line minimum capped at 1, so the energy never increases.
    Stalls (projection returns the current point while the residual is
    above tolerance) reset alpha to a growing safeguard.
    """
    opts = opts or SolveOptions()
    w = _initial_point(qp, opts.seed) if w0 is None else _project(qp, np.asarray(w0, float))
    g = qp.gradient(w)
    f = qp.objective(w)
    alpha0 = 1.0 / max(1e-12, 2.0 * float(np.abs(np.diag(qp.A)).max()))
    alpha = alpha0
    stall = 0
    history = [f]
    res = _residual_reduced(qp, w, g)
    it = 0
    converged = res <= opts.tol
    while not converged and it < opts.max_iter:
        cand = _project(qp, w - alpha * g)
        d = cand - w
        gd = float(g @ d)
        if gd >= 0.0:
            stall += 1
            alpha = alpha0 * 10.0**stall
            if stall > 40:
                break
            continue
        stall = 0
        dAd = float(d @ (qp.A @ d))
        step = 1.0 if dAd <= 0.0 else min(1.0, -gd / (2.0 * dAd))
        w_new = w + step * d
        g_new = qp.gradient(w_new)
        s = w_new - w
        y = g_new - g
        sy = float(s @ y)
        alpha = min(1e14, max(1e-16, float(s @ s) / sy)) if sy > 1e-300 else alpha0
        w, g = w_new, g_new
        f = qp.objective(w)
        history.append(f)
        it += 1
        if callback is not None:
            callback(it, w, f)
        res = _residual_reduced(qp, w, g)
        converged = res <= opts.tol
    full = qp.split(w)
    potentials = []
    multipliers = []
    for i, sl in enumerate(qp.slices):
        p = np.full(qp.problem.grids[i].n, np.inf)
        p[qp.kept[i]] = g[sl]
        potentials.append(p)
        ws = w[sl]
        m = float(qp.masses[i])
        multipliers.append(float(np.sum(ws * g[sl]) / m) if m > 0 else 0.0)
    return Solution(
        weights=tuple(full),
        energy=f,
        kkt_residual=res,
        iterations=it,
        converged=converged,
        multipliers=tuple(multipliers),
        effective_potentials=tuple(potentials),
        energy_history=np.asarray(history),
        seed=opts.seed,
    )


def brute_force_minimize(qp: EnergyQP, seed: int = 0,
                         opts: Optional[SolveOptions] = None) -> Solution:
    """Multi-start oracle for tiny problems (total cells <= 60).

    Runs the projected-gradient solver from 32 seeded random feasible
    points plus one vertex-biased start per cell and returns the best.
    """
    if qp.n > 60:
        raise ValueError(f"brute force oracle is limited to 60 cells, got {qp.n}")
    opts = opts or SolveOptions()
    rng = np.random.default_rng(seed)
    starts = []
    for _ in range(32):
        w = np.empty(qp.n)
        for m, sl in zip(qp.masses, qp.slices):
            v = rng.random(sl.stop - sl.start) * m
            w[sl] = project_capped_simplex(v, qp.caps[sl], m)
        starts.append(w)
    for c in range(qp.n):
        w = np.zeros(qp.n)
        for m, sl in zip(qp.masses, qp.slices):
            v = np.zeros(sl.stop - sl.start)
            if sl.start <= c < sl.stop:
                v[c - sl.start] = 2.0 * m
            w[sl] = project_capped_simplex(v, qp.caps[sl], m)
        starts.append(w)
    best = None
    for w0 in starts:
        sol = solve(qp, opts, w0=w0)
        if best is None or sol.energy < best.energy:
            best = sol
    return best
