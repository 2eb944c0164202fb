"""Cell grids on supports and discrete measures carried by them.

A grid is a list of non-overlapping cells along the support curve.  Each
cell keeps its plane preimage (parameter interval, center, arc length)
and its kernel-space geometry: for sphere-side grids the mapped chord
endpoints and chord length, for plane-side grids the plane segment
embedded in R^3.

Segments are subdivided uniformly in the plane parameter.  Rays are
subdivided uniformly in the angle along their image circle on the
sphere, which makes all image chords of one ray equal and keeps every
cell outside a clearance band around the north pole.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateSupport, GridMismatch, InfeasibleConstraint
from .geometry import embed_plane, map_point
from .problem import Ray, Segment, SupportSet, UpperConstraint

PLANE = "plane"
SPHERE = "sphere"


@dataclass(frozen=True)
class CellGrid:
    """Discretization cells of one component support.

    ``centers``/``endpoints``/``h`` live in kernel space (R^3): sphere
    chords for sphere-side grids, the embedded plane segments otherwise.
    """

    component: int
    side: str
    centers: NDArray[np.float64]      # (n, 3)
    endpoints: NDArray[np.float64]    # (n, 2, 3)
    h: NDArray[np.float64]            # (n,) kernel-space cell lengths
    plane_centers: NDArray[np.complex128]
    plane_breaks: NDArray[np.complex128]   # (n, 2)
    plane_lengths: NDArray[np.float64]
    piece_index: NDArray[np.int64]

    def __post_init__(self):
        for a in (self.centers, self.endpoints, self.h, self.plane_centers,
                  self.plane_breaks, self.plane_lengths, self.piece_index):
            a.setflags(write=False)
        if np.any(self.h <= 0.0):
            raise DegenerateSupport("grid contains a zero-length cell")

    @property
    def n(self) -> int:
        return self.h.shape[0]


def _split_counts(n: int, pieces: int) -> list[int]:
    base, extra = divmod(n, pieces)
    return [base + (1 if i < extra else 0) for i in range(pieces)]


def _segment_breaks(piece: Segment, n: int) -> NDArray[np.complex128]:
    t = np.linspace(0.0, 1.0, n + 1)
    return piece.point(t)


def _ray_breaks(piece: Ray, n: int, pole_clearance: float) -> NDArray[np.complex128]:
    a, u = complex(piece.a), complex(piece.u)
    c = (a.conjugate() * u).real
    p2 = max(abs(a) ** 2 - c * c, 0.0)
    q = math.sqrt(1.0 + p2)
    theta0 = math.atan2(c, q)
    theta_max = math.acos(min(1.0, pole_clearance * q))
    if theta_max <= theta0:
        raise DegenerateSupport(
            f"pole clearance {pole_clearance} leaves no room on ray from {a}")
    theta = np.linspace(theta0, theta_max, n + 1)
    t = q * np.tan(theta) - c
    t[0] = 0.0  # anchor exactly
    return a + t * u


def _grid_from_breaks(component, side, piece_breaks) -> CellGrid:
    centers, endpoints, hs = [], [], []
    pcenters, pbreaks, plens, pidx = [], [], [], []
    for k, breaks in enumerate(piece_breaks):
        z0, z1 = breaks[:-1], breaks[1:]
        zmid = 0.5 * (z0 + z1)
        if side == SPHERE:
            p0, p1 = map_point(z0), map_point(z1)
            cen = map_point(zmid)
        else:
            p0, p1 = embed_plane(z0), embed_plane(z1)
            cen = embed_plane(zmid)
        centers.append(cen)
        endpoints.append(np.stack([p0, p1], axis=1))
        hs.append(np.linalg.norm(p1 - p0, axis=1))
        pcenters.append(zmid)
        pbreaks.append(np.stack([z0, z1], axis=1))
        plens.append(np.abs(z1 - z0))
        pidx.append(np.full(len(zmid), k, dtype=np.int64))
    return CellGrid(
        component=component,
        side=side,
        centers=np.concatenate(centers),
        endpoints=np.concatenate(endpoints),
        h=np.concatenate(hs),
        plane_centers=np.concatenate(pcenters),
        plane_breaks=np.concatenate(pbreaks),
        plane_lengths=np.concatenate(plens),
        piece_index=np.concatenate(pidx),
    )


def build_grid(support: SupportSet, n: int, pole_clearance: float = 1e-3,
               component: int = 0) -> CellGrid:
    """Sphere-side grid with ``n`` cells split evenly across pieces."""
    if n < 8:
        raise ValueError(f"need at least 8 cells, got {n}")
    counts = _split_counts(n, len(support.pieces))
    piece_breaks = []
    for piece, cnt in zip(support.pieces, counts):
        if isinstance(piece, Segment):
            piece_breaks.append(_segment_breaks(piece, cnt))
        else:
            piece_breaks.append(_ray_breaks(piece, cnt, pole_clearance))
    return _grid_from_breaks(component, SPHERE, piece_breaks)


def plane_grid(support: SupportSet, n: int, component: int = 0) -> CellGrid:
    """Plane-side grid; only bounded supports can carry one."""
    if n < 8:
        raise ValueError(f"need at least 8 cells, got {n}")
    if not support.bounded:
        raise GridMismatch("plane grids require bounded supports")
    counts = _split_counts(n, len(support.pieces))
    piece_breaks = [_segment_breaks(p, c) for p, c in zip(support.pieces, counts)]
    return _grid_from_breaks(component, PLANE, piece_breaks)


def sphere_image(grid: CellGrid) -> CellGrid:
    """Cell-by-cell image of a plane grid on the sphere."""
    if grid.side != PLANE:
        raise GridMismatch("sphere_image expects a plane-side grid")
    p0 = map_point(grid.plane_breaks[:, 0])
    p1 = map_point(grid.plane_breaks[:, 1])
    return CellGrid(
        component=grid.component,
        side=SPHERE,
        centers=map_point(grid.plane_centers),
        endpoints=np.stack([p0, p1], axis=1),
        h=np.linalg.norm(p1 - p0, axis=1),
        plane_centers=grid.plane_centers.copy(),
        plane_breaks=grid.plane_breaks.copy(),
        plane_lengths=grid.plane_lengths.copy(),
        piece_index=grid.piece_index.copy(),
    )


@dataclass(frozen=True)
class DiscreteMeasure:
    """Cell weights on a grid; nonnegative unless explicitly signed.

    Signed weight vectors appear in convexity and positivity diagnostics
    (differences of equal-mass measures); construct them with
    ``signed=True``.
    """

    grid: CellGrid
    weights: NDArray[np.float64]
    signed: bool = False

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.grid.n,):
            raise ValueError(f"weights shape {w.shape} does not match grid n={self.grid.n}")
        if not self.signed and np.any(w < 0.0):
            raise ValueError("measure weights must be nonnegative")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def difference(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        if other.grid is not self.grid and other.grid.n != self.grid.n:
            raise GridMismatch("difference requires a common grid")
        return DiscreteMeasure(self.grid, self.weights - other.weights, signed=True)


def uniform_measure(grid: CellGrid, mass: float = 1.0) -> DiscreteMeasure:
    """Measure with constant density per plane arc length."""
    w = grid.plane_lengths / np.sum(grid.plane_lengths) * mass
    return DiscreteMeasure(grid, w)


def push_forward(measure: DiscreteMeasure) -> DiscreteMeasure:
    """Image measure on the sphere; weights are preserved cell by cell."""
    if measure.grid.side != PLANE:
        raise GridMismatch("push_forward expects a plane-side measure")
    return DiscreteMeasure(sphere_image(measure.grid), measure.weights, signed=measure.signed)


def discretize_constraint(constraint: UpperConstraint, grid: CellGrid,
                          mass: float) -> NDArray[np.float64]:
    """Per-cell caps from a density bound: midpoint value times arc length."""
    dens = constraint.density_at(grid.plane_centers)
    caps = np.where(np.isfinite(dens), dens * grid.plane_lengths, np.inf)
    if np.any(caps < 0.0):
        raise InfeasibleConstraint("constraint density is negative")
    total = float(np.sum(caps[np.isfinite(caps)])) if np.isfinite(caps).all() else math.inf
    if total < mass - 1e-12:
        raise InfeasibleConstraint(
            f"component {grid.component}: discretized caps total {total:.6g} < mass {mass:.6g}")
    return caps


def density_to_plane(weights: NDArray[np.float64], grid: CellGrid):
    """Plane-side report: (plane centers, density per arc length)."""
    w = np.asarray(weights, dtype=float)
    return grid.plane_centers.copy(), w / grid.plane_lengths


def grid_to_csv(grid: CellGrid) -> str:
    """CSV rows: cell index, plane endpoints, sphere center, chord length."""
    buf = io.StringIO()
    buf.write("cell_index,plane_start_re,plane_start_im,plane_end_re,plane_end_im,"
              "sphere_x1,sphere_x2,sphere_x3,h\n")
    sph = grid.centers if grid.side == SPHERE else map_point(grid.plane_centers)
    for i in range(grid.n):
        z0, z1 = grid.plane_breaks[i]
        row = (i, z0.real, z0.imag, z1.real, z1.imag, sph[i, 0], sph[i, 1], sph[i, 2], grid.h[i])
        buf.write(",".join(str(row[0:1][0]) if j == 0 else f"{row[j]:.17g}" for j in range(9)) + "\n")
    return buf.getvalue()
