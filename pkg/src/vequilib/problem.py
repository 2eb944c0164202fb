"""Problem definition, validation, and admissibility classification.

A problem is the tuple (interaction matrix, supports, external fields,
masses, optional upper constraints).  Supports are finite unions of
affine segments and rays in the plane; fields are lower semi-continuous
evaluators with an optional declared logarithmic growth coefficient that
the tail classifier uses instead of numerical sampling.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import (
    DegenerateSupport,
    InfeasibleConstraint,
    NonPositiveMass,
    NotPositiveDefinite,
    UnclassifiableField,
)

log = logging.getLogger(__name__)

Rational = (int, Fraction)


# ---------------------------------------------------------------------------
# supports


@dataclass(frozen=True)
class Segment:
    """Oriented affine segment {a + t(b-a), t in [0,1]}."""

    a: complex
    b: complex

    def __post_init__(self):
        if abs(self.b - self.a) == 0.0:
            raise DegenerateSupport(f"segment endpoints coincide at {self.a}")

    @property
    def bounded(self) -> bool:
        return True

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return self.a + t * (self.b - self.a)


@dataclass(frozen=True)
class Ray:
    """Oriented ray {a + t*u, t in [0, inf)} with |u| = 1."""

    a: complex
    u: complex

    def __post_init__(self):
        mod = abs(self.u)
        if mod == 0.0:
            raise DegenerateSupport("ray direction is zero")
        object.__setattr__(self, "u", self.u / mod)

    @property
    def bounded(self) -> bool:
        return False

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return self.a + t * self.u


Piece = Segment | Ray


@dataclass(frozen=True)
class SupportSet:
    """Finite union of segments and rays carrying one component measure."""

    pieces: tuple[Piece, ...]

    def __post_init__(self):
        if not self.pieces:
            raise DegenerateSupport("support has no pieces")
        object.__setattr__(self, "pieces", tuple(self.pieces))

    @property
    def bounded(self) -> bool:
        return all(p.bounded for p in self.pieces)

    @property
    def rays(self) -> tuple[Ray, ...]:
        return tuple(p for p in self.pieces if isinstance(p, Ray))


def real_line() -> SupportSet:
    """The real axis as two rays from the origin."""
    return SupportSet((Ray(0.0, 1.0), Ray(0.0, -1.0)))


def imaginary_line() -> SupportSet:
    """The imaginary axis as two rays from the origin."""
    return SupportSet((Ray(0.0, 1j), Ray(0.0, -1j)))


def interval(a: float, b: float) -> SupportSet:
    """A real interval [a, b] as a single segment."""
    return SupportSet((Segment(complex(a), complex(b)),))


# ---------------------------------------------------------------------------
# external fields


@dataclass(frozen=True)
class ExternalField:
    """Lower semi-continuous field V on a support, valued in R U {+inf}.

    ``declared_growth`` is the leading coefficient p of p*log(1+|x|^2),
    with ``math.inf`` meaning superlogarithmic growth; ``None`` means the
    classifier must sample the tail numerically.
    """

    evaluator: Callable[[NDArray[np.complex128]], NDArray[np.float64]]
    declared_growth: Optional[float] = None
    kind: Optional[str] = None
    params: Optional[dict] = None

    def values(self, x) -> NDArray[np.float64]:
        x = np.atleast_1d(np.asarray(x, dtype=complex))
        v = np.asarray(self.evaluator(x), dtype=float)
        if v.shape != x.shape:
            raise ValueError("field evaluator changed the input shape")
        return v

    @staticmethod
    def zero() -> "ExternalField":
        return ExternalField(lambda x: np.zeros(x.shape), declared_growth=0.0, kind="zero", params={})

    @staticmethod
    def poly(coeffs: Sequence[float], axis: complex = 1.0) -> "ExternalField":
        """Polynomial in the coordinate along ``axis``: sum c_k u^k, u = Re(conj(axis) x)."""
        coeffs = tuple(float(c) for c in coeffs)
        ahat = axis / abs(axis)
        deg = max((k for k, c in enumerate(coeffs) if c != 0.0), default=0)

        def ev(x):
            u = np.real(np.conj(ahat) * x)
            with np.errstate(over="ignore"):
                return np.polynomial.polynomial.polyval(u, coeffs) if coeffs else np.zeros(x.shape)

        if deg == 0:
            growth = 0.0
        elif deg % 2 == 0 and coeffs[deg] > 0:
            growth = math.inf
        else:
            growth = None  # odd or negative leading term: let sampling decide
        return ExternalField(ev, declared_growth=growth, kind="poly",
                             params={"coeffs": list(coeffs), "axis": complex(ahat)})

    @staticmethod
    def logquad(log_coeff: float, quad_coeff: float = 0.0, offset: float = 0.0,
                axis: complex = 1.0) -> "ExternalField":
        """a*log(1+|x|^2) + b*u^2 + c with u the coordinate along ``axis``."""
        ahat = axis / abs(axis)

        def ev(x):
            u = np.real(np.conj(ahat) * x)
            return log_coeff * np.log1p(np.abs(x) ** 2) + quad_coeff * u**2 + offset

        growth = math.inf if quad_coeff > 0 else (float(log_coeff) if quad_coeff == 0 else None)
        return ExternalField(ev, declared_growth=growth, kind="logquad",
                             params={"log_coeff": float(log_coeff), "quad_coeff": float(quad_coeff),
                                     "offset": float(offset), "axis": complex(ahat)})

    @staticmethod
    def table(knots: Sequence[float], values: Sequence[float], axis: complex = 1.0) -> "ExternalField":
        """Piecewise-linear field in the coordinate along ``axis``.

        Values are extended by their edge values outside the knot range,
        so a table with zero edges is a compactly supported field.
        """
        kn = np.asarray(knots, dtype=float)
        va = np.asarray(values, dtype=float)
        if kn.ndim != 1 or kn.shape != va.shape or kn.size < 2 or not np.all(np.diff(kn) > 0):
            raise ValueError("table field needs increasing knots matching values")
        ahat = axis / abs(axis)

        def ev(x):
            u = np.real(np.conj(ahat) * x)
            return np.interp(u, kn, va)

        return ExternalField(ev, declared_growth=0.0, kind="table",
                             params={"knots": kn.tolist(), "values": va.tolist(), "axis": complex(ahat)})

    @staticmethod
    def from_function(f: Callable, declared_growth: Optional[float] = None) -> "ExternalField":
        return ExternalField(f, declared_growth=declared_growth, kind=None, params=None)


# ---------------------------------------------------------------------------
# interaction matrix and masses


def _as_exact(values) -> Optional[tuple]:
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, Rational):
            return None
        out.append(Fraction(v))
    return tuple(out)


@dataclass(frozen=True)
class InteractionMatrix:
    """Symmetric positive definite coupling matrix c_ij.

    ``exact`` keeps rational entries when the matrix was built from ints
    or Fractions, so downstream mass couplings stay exact.
    """

    matrix: NDArray[np.float64]
    exact: Optional[tuple[tuple[Fraction, ...], ...]] = None

    @staticmethod
    def from_rows(rows) -> "InteractionMatrix":
        exact_rows = []
        for row in rows:
            er = _as_exact(row)
            if er is None:
                exact_rows = None
                break
            exact_rows.append(er)
        m = np.array([[float(v) for v in row] for row in rows], dtype=float)
        m.setflags(write=False)
        return InteractionMatrix(m, tuple(exact_rows) if exact_rows is not None else None)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class MassVector:
    """Prescribed total masses, all strictly positive."""

    values: NDArray[np.float64]
    exact: Optional[tuple[Fraction, ...]] = None

    @staticmethod
    def from_values(values) -> "MassVector":
        exact = _as_exact(values)
        v = np.array([float(x) for x in values], dtype=float)
        v.setflags(write=False)
        return MassVector(v, exact)


@dataclass(frozen=True)
class UpperConstraint:
    """Density bound (per plane arc length) limiting one component measure."""

    component: int
    density: float | Callable[[NDArray[np.complex128]], NDArray[np.float64]]

    def density_at(self, x) -> NDArray[np.float64]:
        x = np.atleast_1d(np.asarray(x, dtype=complex))
        if callable(self.density):
            return np.asarray(self.density(x), dtype=float)
        return np.full(x.shape, float(self.density))


@dataclass(frozen=True)
class ProblemSpec:
    """Full problem data: (C, supports, fields, masses, constraints)."""

    C: InteractionMatrix
    supports: tuple[SupportSet, ...]
    fields: tuple[ExternalField, ...]
    masses: MassVector
    constraints: tuple[UpperConstraint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "supports", tuple(self.supports))
        object.__setattr__(self, "fields", tuple(self.fields))
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def d(self) -> int:
        return self.C.d


# ---------------------------------------------------------------------------
# validation


def interaction_cholesky(C: InteractionMatrix | NDArray[np.float64]) -> NDArray[np.float64]:
    """Upper-triangular B with C = B^t B and positive diagonal."""
    m = C.matrix if isinstance(C, InteractionMatrix) else np.asarray(C, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotPositiveDefinite("interaction matrix must be square")
    if not np.array_equal(m, m.T):
        raise NotPositiveDefinite("interaction matrix is not symmetric as stored")
    try:
        lower = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("Cholesky factorization failed") from exc
    return lower.T.copy()


def coupled_masses(spec: ProblemSpec):
    """Interaction-weighted mass totals sum_j c_ij m_j.

    Returns (floats, exact) where ``exact`` is a tuple of Fractions when
    both the matrix and the masses carry exact rational values, else None.
    """
    if spec.C.exact is not None and spec.masses.exact is not None:
        exact = tuple(
            sum(cij * mj for cij, mj in zip(row, spec.masses.exact, strict=True))
            for row in spec.C.exact
        )
        return np.array([float(v) for v in exact]), exact
    return spec.C.matrix @ spec.masses.values, None


@dataclass(frozen=True)
class ValidatedProblem:
    """Problem that passed validation, with its Cholesky factor cached."""

    spec: ProblemSpec
    cholesky: NDArray[np.float64]
    cm: NDArray[np.float64]
    cm_exact: Optional[tuple[Fraction, ...]]

    @property
    def d(self) -> int:
        return self.spec.d


def _field_sample_points(support: SupportSet, per_piece: int = 257) -> NDArray[np.complex128]:
    pts = []
    for piece in support.pieces:
        if isinstance(piece, Segment):
            t = np.linspace(0.0, 1.0, per_piece)
        else:
            t = np.geomspace(1e-3, 1e3, per_piece)
        pts.append(piece.point(t))
    return np.concatenate(pts)


def lsc_spot_check(field: ExternalField, support: SupportSet, per_piece: int = 257) -> bool:
    """Heuristic lower semi-continuity probe on a sample grid.

    Flags isolated upward spikes (a value strictly above both neighbours
    by more than the local variation allows).  Returns True when no
    violation is seen; this is a spot check, not a proof.
    """
    for piece in support.pieces:
        if isinstance(piece, Segment):
            t = np.linspace(0.0, 1.0, per_piece)
        else:
            t = np.geomspace(1e-3, 1e3, per_piece)
        v = field.values(piece.point(t))
        mid = v[1:-1]
        nb_max = np.maximum(v[:-2], v[2:])
        with np.errstate(invalid="ignore"):
            local = np.abs(v[2:] - v[:-2])
        local = np.where(np.isnan(local), np.inf, local)
        finite = np.isfinite(mid)
        slack = local + 1e-6 * (1.0 + np.where(finite, np.abs(mid), 0.0))
        spike = finite & (mid > nb_max + slack)
        spike |= ~np.isfinite(mid) & np.isfinite(v[:-2]) & np.isfinite(v[2:])
        if spike.any():
            return False
    return True


def _constraint_capacity(constraint: UpperConstraint, support: SupportSet) -> float:
    """Coarse upper bound integral of the constraint density over the support."""
    total = 0.0
    for piece in support.pieces:
        if isinstance(piece, Segment):
            t = np.linspace(0.0, 1.0, 513)
            mids = piece.point(0.5 * (t[:-1] + t[1:]))
            lengths = np.abs(piece.b - piece.a) * np.diff(t)
        else:
            t = np.linspace(0.0, 1e6, 513)
            mids = piece.point(0.5 * (t[:-1] + t[1:]))
            lengths = np.diff(t)
        dens = constraint.density_at(mids)
        total += float(np.sum(np.where(np.isfinite(dens), dens, np.inf) * lengths))
        if not np.isfinite(total):
            return math.inf
    return total


def validate_spec(spec: ProblemSpec) -> ValidatedProblem:
    """Check all structural invariants and return a validated handle."""
    d = spec.d
    if not (len(spec.supports) == len(spec.fields) == len(spec.masses.values) == d):
        raise ValueError(f"component counts disagree with d={d}")
    if np.any(spec.masses.values <= 0.0):
        raise NonPositiveMass(f"masses must be positive, got {spec.masses.values.tolist()}")
    B = interaction_cholesky(spec.C)
    for i, (support, f) in enumerate(zip(spec.supports, spec.fields)):
        pts = _field_sample_points(support)
        vals = f.values(pts)
        if not np.isfinite(vals).any():
            raise ValueError(f"field {i} is infinite on the whole sample grid")
        if not lsc_spot_check(f, support):
            log.warning("field %d failed the lower semi-continuity spot check", i)
    for con in spec.constraints:
        if not 0 <= con.component < d:
            raise ValueError(f"constraint component {con.component} out of range")
        cap = _constraint_capacity(con, spec.supports[con.component])
        need = float(spec.masses.values[con.component])
        if cap < need - 1e-12:
            raise InfeasibleConstraint(
                f"component {con.component}: total cap {cap:.6g} < mass {need:.6g}")
    cm, cm_exact = coupled_masses(spec)
    cm = cm.copy()
    cm.setflags(write=False)
    return ValidatedProblem(spec, B, cm, cm_exact)


# ---------------------------------------------------------------------------
# admissibility classification

BOUNDED = "bounded-support"
STRONG = "strong"
WEAK = "weak"
INADMISSIBLE = "inadmissible"

_TAIL_KS = range(4, 41)
_STABLE_WINDOW = 8
_STABLE_TOL = 1e-6


@dataclass(frozen=True)
class ComponentAdmissibility:
    index: int
    cls: str
    liminf: Optional[float]  # None for bounded supports; +-inf allowed


@dataclass(frozen=True)
class AdmissibilityReport:
    cm: NDArray[np.float64]
    components: tuple[ComponentAdmissibility, ...]
    overall: str


def _ray_tail_points(ray: Ray) -> NDArray[np.complex128]:
    """Points on the ray with |x| = 2^k for the reachable k in 4..40."""
    a, u = complex(ray.a), complex(ray.u)
    c = (a.conjugate() * u).real
    pts = []
    for k in _TAIL_KS:
        r2 = 4.0**k
        disc = c * c + r2 - abs(a) ** 2
        if disc <= 0.0:
            continue
        t = -c + math.sqrt(disc)
        if t >= 0.0:
            pts.append(a + t * u)
    return np.asarray(pts, dtype=complex)


def _sampled_tail(field: ExternalField, support: SupportSet, cm_i: float):
    """Classify an unbounded component by sampling its tail sequence."""
    pts = np.concatenate([_ray_tail_points(r) for r in support.rays])
    if pts.size < _STABLE_WINDOW + 2:
        raise UnclassifiableField("too few reachable tail samples")
    order = np.argsort(np.abs(pts), kind="stable")
    pts = pts[order]
    logs = np.log1p(np.abs(pts) ** 2)
    with np.errstate(over="ignore", invalid="ignore"):
        v = field.values(pts)
        g = v - cm_i * logs
    g = np.where(np.isnan(g), math.inf, g)
    running = np.minimum.accumulate(g)
    stabilized = bool(running[-_STABLE_WINDOW] - running[-1] <= _STABLE_TOL)
    if stabilized:
        tail_v = v[-_STABLE_WINDOW:]
        if np.all(tail_v > 0) and not np.isfinite(tail_v).all():
            return STRONG, math.inf  # field overflowed upward along the tail
        ratios = tail_v / logs[-_STABLE_WINDOW:]
        # ties occur at equal moduli on symmetric rays, so nondecreasing
        diverging = bool(np.all(np.diff(ratios) >= -1e-12)
                         and ratios[-1] > 100.0 and ratios[-1] > 2.0 * ratios[0])
        if diverging:
            return STRONG, math.inf
        return WEAK, float(running[-1])
    diffs = np.diff(g)
    if np.all(diffs <= _STABLE_TOL):
        return INADMISSIBLE, -math.inf
    raise UnclassifiableField(
        "tail sequence is non-monotone and its running minimum does not stabilize")


def _classify_component(field: ExternalField, support: SupportSet, cm_i: float):
    """(class, liminf estimate) for one component; liminf None when bounded."""
    if support.bounded:
        return BOUNDED, None
    p = field.declared_growth
    if p is None:
        return _sampled_tail(field, support, cm_i)
    if p == math.inf:
        return STRONG, math.inf
    gap = p - cm_i
    if gap > 0:
        # Superlogarithmic relative to this problem's interaction: the
        # transformed field diverges at the pole, same handling as strong.
        return STRONG, math.inf
    if gap < 0:
        return INADMISSIBLE, -math.inf
    # Leading terms cancel; the remainder decides.
    shifted = ExternalField(
        lambda x, _f=field, _p=p: _f.values(x) - _p * np.log1p(np.abs(x) ** 2),
        declared_growth=None,
    )
    return _sampled_tail(shifted, support, 0.0)


def classify_admissibility(problem: ValidatedProblem | ProblemSpec) -> AdmissibilityReport:
    """Classify all components and aggregate an overall class."""
    if isinstance(problem, ProblemSpec):
        problem = validate_spec(problem)
    spec = problem.spec
    comps = []
    for i in range(spec.d):
        cls, liminf = _classify_component(spec.fields[i], spec.supports[i], float(problem.cm[i]))
        comps.append(ComponentAdmissibility(i, cls, liminf))
    classes = {c.cls for c in comps}
    if INADMISSIBLE in classes:
        overall = INADMISSIBLE
    elif WEAK in classes:
        overall = WEAK
    elif STRONG in classes:
        overall = STRONG
    else:
        overall = BOUNDED
    return AdmissibilityReport(problem.cm, tuple(comps), overall)
