"""Builtin problem instances.

The coupled three-component instance and the banded-Toeplitz-style data
fix only the interaction matrix, the masses, and the support skeleton;
the concrete confining field, the compact bump, the constraint density,
and the stand-in support curves are representative parametric choices,
not data from any particular model.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional

import numpy as np

from .compactify import discretize
from .errors import BadParams, UnknownScenario
from .problem import (
    ExternalField,
    InteractionMatrix,
    MassVector,
    ProblemSpec,
    SupportSet,
    UpperConstraint,
    classify_admissibility,
    imaginary_line,
    interval,
    real_line,
    validate_spec,
)
from .qp import SolveOptions, assemble, solve


def _two_matrix(params: dict) -> ProblemSpec:
    """d=3 coupled problem: quartic field on R, constrained component on iR.

    Parameters: ``t`` (quadratic term of the first field, default 0),
    ``bump`` (amplitude of the compactly supported third field, default 1),
    ``sigma`` (constant density cap on component 2, default 10; None
    removes the constraint).
    """
    t = float(params.pop("t", 0.0))
    bump = float(params.pop("bump", 1.0))
    sigma = params.pop("sigma", 10.0)
    C = InteractionMatrix.from_rows([
        [1, Fraction(-1, 2), 0],
        [Fraction(-1, 2), 1, Fraction(-1, 2)],
        [0, Fraction(-1, 2), 1],
    ])
    masses = MassVector.from_values([1, Fraction(2, 3), Fraction(1, 3)])
    supports = (real_line(), imaginary_line(), real_line())
    fields = (
        ExternalField.poly([0.0, 0.0, t / 2.0, 0.0, 0.25]),
        ExternalField.zero(),
        ExternalField.table([-1.0, 0.0, 1.0], [0.0, bump, 0.0]),
    )
    constraints = () if sigma is None else (UpperConstraint(1, float(sigma)),)
    return ProblemSpec(C, supports, fields, masses, constraints)


def _toeplitz(params: dict) -> ProblemSpec:
    """Tridiagonal interaction data for band widths p (upper), q (lower).

    d = p+q-1 components, masses (1/q, ..., (q-1)/q, 1, (p-1)/p, ..., 1/p),
    no external fields.  The compact component q-1 (0-based) sits on a
    segment; the remaining supports default to the real line, standing in
    for the symbol-dependent curves, which are out of scope here.
    """
    p = int(params.pop("p", 2))
    q = int(params.pop("q", 2))
    if p < 1 or q < 1:
        raise BadParams(f"need p, q >= 1, got p={p}, q={q}")
    d = p + q - 1
    rows = [[Fraction(0)] * d for _ in range(d)]
    for i in range(d):
        rows[i][i] = Fraction(1)
        if i + 1 < d:
            rows[i][i + 1] = Fraction(-1, 2)
            rows[i + 1][i] = Fraction(-1, 2)
    masses = [Fraction(k, q) for k in range(1, q)] + [Fraction(1)] \
        + [Fraction(p - k, p) for k in range(1, p)]
    supports = tuple(interval(-1.0, 1.0) if i == q - 1 else real_line() for i in range(d))
    fields = tuple(ExternalField.zero() for _ in range(d))
    return ProblemSpec(InteractionMatrix.from_rows(rows), supports, fields,
                       MassVector.from_values(masses), ())


def _scalar_quadratic(params: dict) -> ProblemSpec:
    """d=1, V(x) = x^2 on the real line, unit mass."""
    return ProblemSpec(
        InteractionMatrix.from_rows([[1]]),
        (real_line(),),
        (ExternalField.poly([0.0, 0.0, 1.0]),),
        MassVector.from_values([1]),
    )


def _scalar_weak(params: dict) -> ProblemSpec:
    """d=1, V(x) = log(1+|x|^2) on the real line: exact tail cancellation."""
    return ProblemSpec(
        InteractionMatrix.from_rows([[1]]),
        (real_line(),),
        (ExternalField.logquad(1.0),),
        MassVector.from_values([1]),
    )


def _scalar_compact(params: dict) -> ProblemSpec:
    """d=1, field-free unit mass on the segment [-1, 1]."""
    return ProblemSpec(
        InteractionMatrix.from_rows([[1]]),
        (interval(-1.0, 1.0),),
        (ExternalField.zero(),),
        MassVector.from_values([1]),
    )


_BUILTINS = {
    "two-matrix": _two_matrix,
    "toeplitz": _toeplitz,
    "scalar-quadratic": _scalar_quadratic,
    "scalar-weak": _scalar_weak,
    "scalar-compact": _scalar_compact,
}


def builtin_names() -> list[str]:
    return sorted(_BUILTINS)


def load_builtin(name: str, **params) -> ProblemSpec:
    """Instantiate a builtin scenario; unknown names and params raise."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {builtin_names()}") from None
    params = dict(params)
    try:
        spec = factory(params)
    except (TypeError, ValueError) as exc:
        raise BadParams(str(exc)) from exc
    if params:
        raise BadParams(f"unused parameters for {name!r}: {sorted(params)}")
    return spec


def scenario_report(name: str, params: Optional[dict] = None, cells: int = 200,
                    pole_clearance: float = 1e-3,
                    opts: Optional[SolveOptions] = None) -> dict:
    """Classify, discretize, and solve a builtin; return a summary dict."""
    spec = load_builtin(name, **(params or {}))
    validated = validate_spec(spec)
    report = classify_admissibility(validated)
    problem = discretize(validated, cells=cells, pole_clearance=pole_clearance)
    sol = solve(assemble(problem), opts or SolveOptions(tol=1e-7))
    return {
        "name": name,
        "class": report.overall,
        "coupled_masses": [float(v) for v in validated.cm],
        "components": [
            {"index": c.index, "class": c.cls, "liminf": c.liminf}
            for c in report.components
        ],
        "energy": sol.energy,
        "kkt_residual": sol.kkt_residual,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "masses": [float(np.sum(w)) for w in sol.weights],
    }
