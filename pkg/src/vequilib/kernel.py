"""Logarithmic energies, potentials, and the block kernel matrices.

Kernel entries between two cells use the midpoint value
log(1/sqrt(d^2 + r^2)) at the cell centers.  At r = 0 the same-cell
entry is the exact average of the log kernel over a straight cell,

    (1/h^2) int int log(1/|s-t|) = 3/2 - log h,

which equals the self-energy of a uniform circle measure of radius
h*exp(-3/2); with midpoint off-diagonal entries the same-grid block is
then an exact continuum energy Gram matrix of disjoint circle measures,
hence positive semi-definite on zero-sum weight vectors.  Coincident
cells of two different grids (overlapping supports discretized
identically) get the same rule with the geometric-mean cell length.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import GridMismatch, NegativeRegularization
from .geometry import embed_plane, fixed_order_sum, segment_mean_log_inv_distance
from .grids import PLANE, CellGrid, DiscreteMeasure, sphere_image

_DENSE_LIMIT = 4_000_000  # entries; larger pairs stream in row blocks
_BLOCK_ROWS = 512


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("VEP_THREADS", "1")))
    except ValueError:
        return 1


def _coincident_mask(d2, hi, hj):
    """Cells of different grids count as coincident when their centers
    agree to a 1e-12 fraction of the cell size (rounding noise from
    different construction paths, not a real separation)."""
    bound = (1e-12 * 0.5 * (float(hi.max()) + float(hj.max()))) ** 2
    if not (d2 <= bound).any():
        return None
    tol = 1e-12 * 0.5 * (hi[:, None] + hj[None, :])
    return d2 <= tol * tol


def _entries_block(ci, hi, cj, hj, r: float, same: bool, row0: int) -> NDArray[np.float64]:
    d2 = ((ci[:, None, :] - cj[None, :, :]) ** 2).sum(-1)
    if r > 0.0:
        return -0.5 * np.log(d2 + r * r)
    with np.errstate(divide="ignore"):
        K = -0.5 * np.log(d2)
    if same:
        rows = np.arange(ci.shape[0])
        cols = row0 + rows
        valid = (cols >= 0) & (cols < cj.shape[0])
        K[rows[valid], cols[valid]] = 1.5 - np.log(hi[valid])
    else:
        mask = _coincident_mask(d2, hi, hj)
        if mask is not None:
            K[mask] = (1.5 - 0.5 * np.log(np.outer(hi, hj)))[mask]
    return K


def _entries(ci, hi, cj, hj, r: float, same: bool, row0: int = 0) -> NDArray[np.float64]:
    """Kernel values between center arrays ci (n,3) and cj (m,3).

    ``same`` marks blocks of a single grid; ``row0`` is the global index
    of the first row, so the diagonal rule lands correctly when the rows
    are a slice of the grid.  Assembly may split rows across VEP_THREADS
    workers; each entry is computed identically regardless of the split.
    """
    n, m = ci.shape[0], cj.shape[0]
    threads = _thread_count()
    if threads == 1 or n * m < 250_000 or n < 2 * threads:
        return _entries_block(ci, hi, cj, hj, r, same, row0)
    out = np.empty((n, m))
    bounds = np.linspace(0, n, threads + 1, dtype=int)

    def work(k):
        a, b = bounds[k], bounds[k + 1]
        out[a:b] = _entries_block(ci[a:b], hi[a:b], cj, hj, r, same, row0 + a)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(work, range(threads)))
    return out


@dataclass(frozen=True)
class KernelBlock:
    """Materialized cell-pair kernel values between two grids."""

    matrix: NDArray[np.float64]
    r: float

    def __post_init__(self):
        self.matrix.setflags(write=False)


def kernel_matrix(grid_i: CellGrid, grid_j: Optional[CellGrid] = None,
                  r: float = 0.0) -> KernelBlock:
    """Kernel block for a grid pair (same grid when ``grid_j`` is omitted)."""
    if r < 0.0:
        raise NegativeRegularization(f"r must be >= 0, got {r}")
    same = grid_j is None or grid_j is grid_i
    gj = grid_i if same else grid_j
    return KernelBlock(_entries(grid_i.centers, grid_i.h, gj.centers, gj.h, r, same), r)


def _pair_energy(wi, gi: CellGrid, wj, gj: CellGrid, r: float) -> float:
    """w_i^t K w_j for the grid pair, streaming row blocks on large pairs.

    Materializable pairs are symmetrized, making the value bitwise
    invariant under argument swap.
    """
    same = gj is gi
    n, m = gi.n, gj.n
    if n * m <= _DENSE_LIMIT:
        K = _entries(gi.centers, gi.h, gj.centers, gj.h, r, same)
        a = float(np.dot(wi, K @ wj))
        b = float(np.dot(wj, np.ascontiguousarray(K.T) @ wi))
        return 0.5 * (a + b)
    parts = []
    for r0 in range(0, n, _BLOCK_ROWS):
        r1 = min(r0 + _BLOCK_ROWS, n)
        blk = _entries(gi.centers[r0:r1], gi.h[r0:r1], gj.centers, gj.h, r, same, row0=r0)
        parts.append(float(np.dot(wi[r0:r1], blk @ wj)))
    return fixed_order_sum(np.asarray(parts))


def mutual_energy(mu: DiscreteMeasure, nu: Optional[DiscreteMeasure] = None,
                  r: float = 0.0) -> float:
    """Mutual logarithmic energy of two measures; I(mu) when nu is omitted."""
    if r < 0.0:
        raise NegativeRegularization(f"r must be >= 0, got {r}")
    nu = mu if nu is None else nu
    return _pair_energy(mu.weights, mu.grid, nu.weights, nu.grid, r)


def potential(mu: DiscreteMeasure, points) -> NDArray[np.float64]:
    """Logarithmic potential of a discrete measure at given points.

    Points are complex for plane-side measures and R^3 rows for
    sphere-side measures.  Every cell contributes the exact straight-cell
    average of log(1/|x-s|), so evaluation on or near the support is fine.
    """
    if mu.grid.side == PLANE:
        p = np.atleast_1d(np.asarray(points, dtype=complex))
        pts3 = embed_plane(p)
    else:
        pts3 = np.atleast_2d(np.asarray(points, dtype=float))
        if pts3.shape[-1] != 3:
            raise ValueError("sphere-side potentials take R^3 points")
    avg = segment_mean_log_inv_distance(pts3, mu.grid.endpoints[:, 0, :],
                                        mu.grid.endpoints[:, 1, :])
    return avg @ mu.weights


def north_pole_potential(mu: DiscreteMeasure):
    """Potential of the pushed-forward measure at the north pole.

    Returns (value, diverged).  The value is sum w_c * log(1+|x_c|^2)/2.
    The flag marks a tail whose running sum has not stabilized: binning
    cells with |x| >= 1 into octaves of the modulus, the outermost octave
    still contributes nearly as much as the one before it.  This is a
    refinement diagnostic, not an exact predicate.
    """
    mod = np.abs(mu.grid.plane_centers)
    contrib = mu.weights * 0.5 * np.log1p(mod**2)
    total = fixed_order_sum(contrib)
    diverged = False
    sel = mod >= 1.0
    if sel.any():
        octave = np.floor(np.log2(mod[sel])).astype(int)
        sums = np.zeros(octave.max() + 1)
        np.add.at(sums, octave, contrib[sel])
        occupied = np.flatnonzero(sums != 0.0)
        if occupied.size >= 3:
            last, prev = sums[occupied[-1]], sums[occupied[-2]]
            floor = 1e-9 * max(1.0, abs(total))
            diverged = bool(abs(last) >= floor and abs(last) >= 0.9 * abs(prev))
    return total, diverged


def interaction_energy(measures: Sequence[DiscreteMeasure],
                       C: NDArray[np.float64], r: float = 0.0) -> float:
    """Quadratic interaction energy sum_ij c_ij I(mu_i, mu_j)."""
    C = np.asarray(C, dtype=float)
    d = len(measures)
    total = 0.0
    for i in range(d):
        total += C[i, i] * mutual_energy(measures[i], r=r)
        for j in range(i + 1, d):
            if C[i, j] != 0.0:
                total += 2.0 * C[i, j] * mutual_energy(measures[i], measures[j], r=r)
    return total


def interaction_energy_factored(measures: Sequence[DiscreteMeasure],
                                B: NDArray[np.float64], r: float = 0.0) -> float:
    """The interaction energy as sum_i I(sum_j b_ij mu_j) for C = B^t B.

    Evaluates signed combinations on the concatenated grids, a summation
    route independent of ``interaction_energy``.
    """
    if r < 0.0:
        raise NegativeRegularization(f"r must be >= 0, got {r}")
    B = np.asarray(B, dtype=float)
    d = len(measures)
    grids = [m.grid for m in measures]
    centers = np.concatenate([g.centers for g in grids])
    hs = np.concatenate([g.h for g in grids])
    offsets = np.concatenate([[0], np.cumsum([g.n for g in grids])])
    d2 = ((centers[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
    if r > 0.0:
        K = -0.5 * np.log(d2 + r * r)
    else:
        with np.errstate(divide="ignore"):
            K = -0.5 * np.log(d2)
        mask = _coincident_mask(d2, hs, hs)
        if mask is None:
            mask = np.zeros_like(d2, dtype=bool)
        np.fill_diagonal(mask, True)
        K[mask] = (1.5 - 0.5 * np.log(np.outer(hs, hs)))[mask]
    total = 0.0
    for i in range(d):
        v = np.zeros(offsets[-1])
        for j in range(d):
            if B[i, j] != 0.0:
                v[offsets[j]:offsets[j + 1]] = B[i, j] * measures[j].weights
        total += float(v @ (K @ v))
    return total


def regularized_energy_probe(mu: DiscreteMeasure, nu: Optional[DiscreteMeasure],
                             rs: Sequence[float]) -> list[float]:
    """Mutual energies along a decreasing regularization sequence."""
    rs = [float(r) for r in rs]
    if sorted(rs, reverse=True) != rs:
        raise ValueError("regularization sequence must be decreasing")
    return [mutual_energy(mu, nu, r=r) for r in rs]


def energy_on_sphere_check(mu: DiscreteMeasure, nu: DiscreteMeasure):
    """Both sides of the plane/sphere mutual-energy identity.

    lhs is the mutual energy of the pushed-forward measures; rhs is the
    plane mutual energy plus the two logarithmic moment terms.  Both use
    the same cell quadrature.
    """
    for m in (mu, nu):
        if m.grid.side != PLANE:
            raise GridMismatch("energy_on_sphere_check expects plane-side measures")
    smu = DiscreteMeasure(sphere_image(mu.grid), mu.weights, signed=mu.signed)
    snu = smu if nu is mu else DiscreteMeasure(sphere_image(nu.grid), nu.weights, signed=nu.signed)
    lhs = mutual_energy(smu) if nu is mu else mutual_energy(smu, snu)
    plane = mutual_energy(mu) if nu is mu else mutual_energy(mu, nu)
    log_mu = fixed_order_sum(mu.weights * np.log1p(np.abs(mu.grid.plane_centers) ** 2))
    log_nu = fixed_order_sum(nu.weights * np.log1p(np.abs(nu.grid.plane_centers) ** 2))
    rhs = plane + 0.5 * nu.mass * log_mu + 0.5 * mu.mass * log_nu
    return lhs, rhs
