"""Compactified problems: transformed fields and sphere-side discretization.

The external field of component i turns into

    V_i(x) - (sum_j c_ij m_j) * log(1 + |x|^2)

on the image of the support, extended to the north pole by the tail
liminf when the support is unbounded.  A discretized problem carries one
sphere grid per component, the transformed field sampled per cell, the
exclusion mask for cells with infinite field value, and per-cell caps
from the upper constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import CapViolation, InfeasibleConstraint, MassMismatch
from .geometry import fixed_order_sum
from .grids import CellGrid, DiscreteMeasure, build_grid, discretize_constraint
from .kernel import interaction_energy
from .problem import (
    BOUNDED,
    AdmissibilityReport,
    ExternalField,
    SupportSet,
    ValidatedProblem,
    _classify_component,
    classify_admissibility,
)


@dataclass(frozen=True)
class TransformedField:
    """Field on the sphere, addressed through plane preimages.

    ``north_pole_value`` is None for bounded supports and the tail
    liminf estimate (possibly +inf) otherwise; ``lower_bound`` is the
    minimum over the evaluation samples and the pole value.
    """

    component: int
    coupled_mass: float
    component_class: str
    north_pole_value: Optional[float]
    lower_bound: float
    _field: ExternalField

    def values_at_plane(self, x) -> NDArray[np.float64]:
        x = np.atleast_1d(np.asarray(x, dtype=complex))
        return self._field.values(x) - self.coupled_mass * np.log1p(np.abs(x) ** 2)


def transform_field(field: ExternalField, cm_i: float, support: SupportSet,
                    component: int = 0, samples: int = 512) -> TransformedField:
    """Shifted field with its pole extension and sampled lower bound."""
    cls, liminf = _classify_component(field, support, float(cm_i))
    pole = None if cls == BOUNDED else liminf
    mins = []
    for piece in support.pieces:
        if piece.bounded:
            t = np.linspace(0.0, 1.0, samples)
        else:
            t = np.geomspace(1e-4, 1e4, samples)
        pts = piece.point(t)
        v = field.values(pts) - cm_i * np.log1p(np.abs(pts) ** 2)
        v = v[np.isfinite(v)]
        if v.size:
            mins.append(float(v.min()))
    if pole is not None and math.isfinite(pole):
        mins.append(pole)
    lower = min(mins) if mins else math.inf
    return TransformedField(component, float(cm_i), cls, pole, lower, field)


@dataclass(frozen=True)
class SphereProblem:
    """Discretized compactified problem, ready for QP assembly."""

    validated: ValidatedProblem
    report: AdmissibilityReport
    grids: tuple[CellGrid, ...]
    fields: tuple[TransformedField, ...]
    field_values: tuple[NDArray[np.float64], ...]   # +inf on excluded cells
    excluded: tuple[NDArray[np.bool_], ...]
    caps: tuple[Optional[NDArray[np.float64]], ...]
    cells: int
    pole_clearance: float

    @property
    def d(self) -> int:
        return self.validated.d

    @property
    def masses(self) -> NDArray[np.float64]:
        return self.validated.spec.masses.values


def discretize(validated: ValidatedProblem, cells: int = 200,
               pole_clearance: float = 1e-3) -> SphereProblem:
    """Build sphere grids, sample fields, and discretize constraints."""
    spec = validated.spec
    report = classify_admissibility(validated)
    grids, tfields, values, excluded = [], [], [], []
    caps: list[Optional[np.ndarray]] = [None] * spec.d
    for i in range(spec.d):
        grid = build_grid(spec.supports[i], cells, pole_clearance, component=i)
        tf = transform_field(spec.fields[i], float(validated.cm[i]), spec.supports[i],
                             component=i)
        v = tf.values_at_plane(grid.plane_centers)
        v = np.where(np.isnan(v), np.inf, v)
        grids.append(grid)
        tfields.append(tf)
        values.append(v)
        excluded.append(~np.isfinite(v))
    for con in spec.constraints:
        i = con.component
        cap = discretize_constraint(con, grids[i], float(spec.masses.values[i]))
        caps[i] = cap if caps[i] is None else np.minimum(caps[i], cap)
    for i in range(spec.d):
        if caps[i] is not None:
            usable = np.where(excluded[i], 0.0, caps[i])
            total = float(np.sum(usable[np.isfinite(usable)])) \
                if np.isfinite(usable).all() else math.inf
            if total < float(spec.masses.values[i]) - 1e-12:
                raise InfeasibleConstraint(
                    f"component {i}: caps on feasible cells cannot carry the mass")
    return SphereProblem(validated, report, tuple(grids), tuple(tfields),
                         tuple(values), tuple(excluded), tuple(caps),
                         cells, pole_clearance)


def vector_energy(problem: SphereProblem, weights: Sequence[NDArray[np.float64]],
                  r: float = 0.0) -> float:
    """Total energy of candidate weights on the discretized problem.

    Returns math.inf (the extended-value sentinel) when any weight sits
    on an excluded cell; no infinity ever enters the linear algebra.
    Raises MassMismatch / CapViolation on infeasible candidates.
    """
    spec = problem.validated.spec
    measures = []
    for i in range(problem.d):
        w = np.asarray(weights[i], dtype=float)
        if w.shape != (problem.grids[i].n,):
            raise ValueError(f"component {i}: weight shape {w.shape} does not match grid")
        if np.any(w < 0.0):
            raise CapViolation(f"component {i}: negative weight")
        mass = float(np.sum(w))
        target = float(spec.masses.values[i])
        if abs(mass - target) > 1e-9 * max(1.0, target):
            raise MassMismatch(f"component {i}: mass {mass!r} != {target!r}")
        cap = problem.caps[i]
        if cap is not None and np.any(w > cap + 1e-9):
            raise CapViolation(f"component {i}: a weight exceeds its cap")
        if np.any(w[problem.excluded[i]] > 0.0):
            return math.inf
        measures.append(DiscreteMeasure(problem.grids[i], w))
    quad = interaction_energy(measures, problem.validated.spec.C.matrix, r=r)
    linear = 0.0
    for i in range(problem.d):
        vals = np.where(problem.excluded[i], 0.0, problem.field_values[i])
        linear += fixed_order_sum(measures[i].weights * vals)
    return quad + linear
