"""Inverse stereographic geometry.

The compactification target is the sphere of radius 1/2 centered at
(0, 0, 1/2).  The plane embeds through

    T(x) = (Re x, Im x, |x|^2) / (1 + |x|^2),        T(inf) = (0, 0, 1),

and Euclidean distance between images equals the chordal metric

    |T(x) - T(y)| = |x - y| / sqrt(1 + |x|^2) / sqrt(1 + |y|^2).
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

NORTH_POLE = np.array([0.0, 0.0, 1.0])


def map_point(x) -> NDArray[np.float64]:
    """Map plane points (or inf) onto the sphere.

    Accepts a complex scalar or array; ``inf`` (any infinite modulus) maps
    to the north pole.  Returns an array with a trailing axis of length 3.
    """
    x = np.asarray(x, dtype=complex)
    ax2 = np.abs(x) ** 2
    at_pole = ~np.isfinite(ax2)
    den = 1.0 + np.where(at_pole, 1.0, ax2)
    out = np.stack(
        [
            np.where(at_pole, 0.0, np.real(x) / den),
            np.where(at_pole, 0.0, np.imag(x) / den),
            np.where(at_pole, 1.0, ax2 / den),
        ],
        axis=-1,
    )
    return out


def chordal_distance(x, y) -> NDArray[np.float64] | float:
    """Chordal metric on the plane, with ``inf`` accepted on either side.

    For finite points this is |x-y|/sqrt(1+|x|^2)/sqrt(1+|y|^2); the limit
    value 1/sqrt(1+|x|^2) is used when the other argument is infinite.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    ax = np.abs(x)
    ay = np.abs(y)
    x_inf = ~np.isfinite(ax)
    y_inf = ~np.isfinite(ay)
    sx = np.sqrt(1.0 + np.where(x_inf, 0.0, ax) ** 2)
    sy = np.sqrt(1.0 + np.where(y_inf, 0.0, ay) ** 2)
    xs = np.where(x_inf, 0.0, x)
    ys = np.where(y_inf, 0.0, y)
    finite = np.abs(xs - ys) / (sx * sy)
    d = np.where(x_inf & y_inf, 0.0, np.where(x_inf, 1.0 / sy, np.where(y_inf, 1.0 / sx, finite)))
    if d.ndim == 0:
        return float(d)
    return d


def pole_distance(x) -> NDArray[np.float64] | float:
    """Chordal distance from T(x) to the north pole, 1/sqrt(1+|x|^2)."""
    x = np.asarray(x, dtype=complex)
    d = 1.0 / np.sqrt(1.0 + np.abs(x) ** 2)
    if d.ndim == 0:
        return float(d)
    return d


def sphere_defect(points: NDArray[np.float64]) -> NDArray[np.float64]:
    """Residual of the sphere equation x1^2 + x2^2 + (x3 - 1/2)^2 = 1/4."""
    p = np.asarray(points, dtype=float)
    return np.abs(p[..., 0] ** 2 + p[..., 1] ** 2 + (p[..., 2] - 0.5) ** 2 - 0.25)


def embed_plane(x) -> NDArray[np.float64]:
    """Embed plane points into R^3 as (Re, Im, 0) for kernel evaluation."""
    x = np.asarray(x, dtype=complex)
    return np.stack([np.real(x), np.imag(x), np.zeros_like(np.real(x))], axis=-1)


def segment_mean_log_inv_distance(
    points: NDArray[np.float64],
    seg_start: NDArray[np.float64],
    seg_end: NDArray[np.float64],
) -> NDArray[np.float64]:
    """Exact average of log(1/|p - s|) over straight segments.

    ``points`` has shape (P, 3), ``seg_start``/``seg_end`` shape (C, 3);
    the result has shape (P, C).  The closed form integrates
    log((t - a)^2 + b^2)/2 along the segment; it is valid for points on,
    near, or far from the segment.
    """
    p = np.asarray(points, dtype=float)[:, None, :]
    s0 = np.asarray(seg_start, dtype=float)[None, :, :]
    s1 = np.asarray(seg_end, dtype=float)[None, :, :]
    seg = s1 - s0
    length = np.sqrt((seg**2).sum(-1))
    e = seg / length[..., None]
    rel = p - s0
    a = (rel * e).sum(-1)
    b2 = np.maximum((rel**2).sum(-1) - a**2, 0.0)

    def antideriv(u):
        # int log(u^2 + b2) du = u log(u^2+b2) - 2u + 2b atan(u/b)
        r2 = u**2 + b2
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(r2 > 0.0, u * np.log(np.where(r2 > 0.0, r2, 1.0)), 0.0)
            b = np.sqrt(b2)
            atan = np.where(b > 0.0, 2.0 * b * np.arctan(np.where(b > 0.0, u / np.where(b > 0.0, b, 1.0), 0.0)), 0.0)
        return term - 2.0 * u + atan

    integral = 0.5 * (antideriv(length - a) - antideriv(-a))
    return -integral / length


def fixed_order_sum(values: NDArray[np.float64]) -> float:
    """Pairwise tree reduction with a fixed topology.

    Splits the array in halves recursively down to small blocks, so the
    summation order never depends on threading or chunking.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return 0.0

    def rec(a):
        if a.size <= 64:
            return float(np.add.reduce(a))
        mid = a.size // 2
        return rec(a[:mid]) + rec(a[mid:])

    return rec(v)
