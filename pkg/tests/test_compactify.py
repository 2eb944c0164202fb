import math

import numpy as np
import pytest

from vequilib import (
    CapViolation,
    DiscreteMeasure,
    ExternalField,
    InteractionMatrix,
    MassMismatch,
    MassVector,
    ProblemSpec,
    UpperConstraint,
    assemble,
    discretize,
    interaction_energy,
    interval,
    load_builtin,
    real_line,
    transform_field,
    validate_spec,
    vector_energy,
)

from helpers import random_spd


def compact_spec(d=2, fields=None, masses=None, constraints=()):
    supports = tuple(interval(-1.0 + 0.2 * i, 1.0 + 0.2 * i) for i in range(d))
    rng = np.random.default_rng(d)
    C = InteractionMatrix.from_rows(random_spd(rng, d).tolist())
    return ProblemSpec(
        C,
        supports,
        fields or tuple(ExternalField.zero() for _ in range(d)),
        MassVector.from_values(masses or [1.0] * d),
        constraints,
    )


# --- transform_field ---------------------------------------------------------

def test_zero_field_zero_coupling():
    # second component of the coupled builtin: V = 0 and Cm = 0
    tf = transform_field(ExternalField.zero(), 0.0, real_line())
    x = np.array([0.0, 1.0 + 0j, 100.0j])
    assert np.array_equal(tf.values_at_plane(x), np.zeros(3))
    assert tf.north_pole_value == 0.0


def test_exact_cancellation():
    tf = transform_field(ExternalField.logquad(1.0), 1.0, real_line())
    x = np.array([0.0, 3.0, -17.0, 1000.0])
    assert np.max(np.abs(tf.values_at_plane(x))) <= 1e-12
    assert abs(tf.north_pole_value) <= 1e-9


def test_compact_bump_pole_value():
    field = ExternalField.table([-1.0, 0.0, 1.0], [0.0, 1.0, 0.0])
    tf = transform_field(field, 0.0, real_line())
    assert tf.north_pole_value == 0.0
    assert tf.component_class == "weak"


def test_bounded_support_has_no_pole_value():
    tf = transform_field(ExternalField.zero(), 1.0, interval(-1, 1))
    assert tf.north_pole_value is None


def test_inverse_relation_recovers_field():
    validated = validate_spec(load_builtin("two-matrix"))
    spec = validated.spec
    for i in range(3):
        tf = transform_field(spec.fields[i], float(validated.cm[i]), spec.supports[i])
        pts = np.concatenate([p.point(np.linspace(0.0, 1.0, 50)) if p.bounded
                              else p.point(np.geomspace(1e-3, 1e3, 50))
                              for p in spec.supports[i].pieces])
        recovered = tf.values_at_plane(pts) + validated.cm[i] * np.log1p(np.abs(pts) ** 2)
        direct = spec.fields[i].values(pts)
        scale = np.maximum(1.0, np.abs(direct))
        assert np.max(np.abs(recovered - direct) / scale) <= 1e-10


def test_lower_bound_is_a_bound():
    validated = validate_spec(load_builtin("two-matrix"))
    spec = validated.spec
    tf = transform_field(spec.fields[0], float(validated.cm[0]), spec.supports[0])
    pts = np.linspace(-50.0, 50.0, 1001)
    assert np.all(tf.values_at_plane(pts) >= tf.lower_bound - 1e-9)


# --- discretize ----------------------------------------------------------------

def test_discretize_builds_consistent_problem():
    validated = validate_spec(load_builtin("two-matrix"))
    problem = discretize(validated, cells=60)
    assert problem.d == 3
    assert all(g.n == 60 for g in problem.grids)
    assert problem.caps[0] is None and problem.caps[1] is not None
    assert all(not e.any() for e in problem.excluded)  # quartic field stays finite


def test_vector_energy_zero_fields_matches_plane_energy():
    # with V = 0 the compactified energy equals the plane interaction energy
    spec = compact_spec(d=2)
    validated = validate_spec(spec)
    problem = discretize(validated, cells=120)
    from vequilib import plane_grid, uniform_measure

    weights, measures = [], []
    for i in range(2):
        g = plane_grid(spec.supports[i], 120, component=i)
        mu = uniform_measure(g, float(spec.masses.values[i]))
        weights.append(mu.weights)
        measures.append(mu)
    sphere_side = vector_energy(problem, weights)
    plane_side = interaction_energy(measures, spec.C.matrix)
    assert sphere_side == pytest.approx(plane_side, abs=2e-3)


def test_vector_energy_infinite_sentinel():
    def half_blocked(x):
        return np.where(np.real(x) < 0.0, np.inf, 0.0)

    spec = ProblemSpec(
        InteractionMatrix.from_rows([[1]]),
        (interval(-1.0, 1.0),),
        (ExternalField.from_function(half_blocked, declared_growth=0.0),),
        MassVector.from_values([1.0]),
    )
    problem = discretize(validate_spec(spec), cells=16)
    assert problem.excluded[0].sum() == 8
    w = np.full(16, 1.0 / 16)
    assert vector_energy(problem, [w]) == math.inf
    # feasible candidate avoiding the excluded half is finite
    w_ok = np.zeros(16)
    w_ok[~problem.excluded[0]] = 1.0 / 8
    assert math.isfinite(vector_energy(problem, [w_ok]))


def test_vector_energy_mass_and_cap_checks():
    spec = compact_spec(d=1, constraints=(UpperConstraint(0, 1.0),))
    problem = discretize(validate_spec(spec), cells=16)
    with pytest.raises(MassMismatch):
        vector_energy(problem, [np.full(16, 1.0)])
    overcap = np.zeros(16)
    overcap[0] = 1.0  # cap per cell is 2/16
    with pytest.raises(CapViolation):
        vector_energy(problem, [overcap])


def test_vector_energy_dominates_minimum():
    # any feasible candidate has energy >= the minimized energy
    from vequilib import SolveOptions, solve

    validated = validate_spec(load_builtin("scalar-compact"))
    problem = discretize(validated, cells=64)
    qp = assemble(problem)
    best = solve(qp, SolveOptions(tol=1e-9)).energy
    rng = np.random.default_rng(17)
    for _ in range(5):
        w = rng.random(64)
        w /= w.sum()
        assert vector_energy(problem, [w]) >= best - 1e-9
    assert best == pytest.approx(np.log(2.0), abs=5e-3)


def test_mass_rescaling_identity():
    # energy with masses m on mu_i = m_i nu_i equals the unit-mass energy
    # with matrix (c_ij m_i m_j) and fields m_i V_i
    rng = np.random.default_rng(23)
    d = 2
    base = compact_spec(d=d, fields=(
        ExternalField.poly([0.0, 0.0, 0.5]),
        ExternalField.table([-1.0, 0.0, 1.0], [0.0, 2.0, 0.0]),
    ), masses=[1.5, 0.5])
    m = base.masses.values
    scaled_rows = (base.C.matrix * np.outer(m, m)).tolist()
    unit = ProblemSpec(
        InteractionMatrix.from_rows(scaled_rows),
        base.supports,
        tuple(ExternalField.from_function(
            lambda x, f=f, mi=mi: mi * f.values(x), declared_growth=0.0)
            for f, mi in zip(base.fields, m)),
        MassVector.from_values([1.0, 1.0]),
    )
    p1 = discretize(validate_spec(base), cells=40)
    p2 = discretize(validate_spec(unit), cells=40)
    nus = [rng.random(40) for _ in range(d)]
    nus = [w / w.sum() for w in nus]
    mus = [mi * w for mi, w in zip(m, nus)]
    e1 = vector_energy(p1, mus)
    e2 = vector_energy(p2, nus)
    assert e1 == pytest.approx(e2, rel=1e-10)
