import math
from fractions import Fraction

import numpy as np
import pytest

from vequilib import (
    DegenerateSupport,
    ExternalField,
    InfeasibleConstraint,
    InteractionMatrix,
    MassVector,
    NonPositiveMass,
    NotPositiveDefinite,
    ProblemSpec,
    Segment,
    SupportSet,
    UnclassifiableField,
    UpperConstraint,
    classify_admissibility,
    interaction_cholesky,
    interval,
    load_builtin,
    real_line,
    validate_spec,
)


def scalar_spec(field=None, support=None, mass=1):
    return ProblemSpec(
        InteractionMatrix.from_rows([[1]]),
        (support or interval(-1.0, 1.0),),
        (field or ExternalField.zero(),),
        MassVector.from_values([mass]),
    )


def test_two_matrix_spec_is_valid():
    validated = validate_spec(load_builtin("two-matrix"))
    assert validated.d == 3


def test_scalar_compact_spec_is_valid():
    assert validate_spec(scalar_spec()).d == 1


def test_indefinite_matrix_rejected():
    # eigenvalues 3 and -1
    spec = ProblemSpec(
        InteractionMatrix.from_rows([[1, 2], [2, 1]]),
        (interval(-1, 1), interval(2, 3)),
        (ExternalField.zero(), ExternalField.zero()),
        MassVector.from_values([1, 1]),
    )
    with pytest.raises(NotPositiveDefinite):
        validate_spec(spec)


def test_asymmetric_matrix_rejected():
    with pytest.raises(NotPositiveDefinite):
        interaction_cholesky(np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_nonpositive_mass_rejected():
    with pytest.raises(NonPositiveMass):
        validate_spec(scalar_spec(mass=0))


def test_degenerate_pieces_rejected():
    with pytest.raises(DegenerateSupport):
        Segment(1.0 + 0j, 1.0 + 0j)
    with pytest.raises(DegenerateSupport):
        SupportSet(())


def test_infeasible_constraint_rejected():
    # density 0.3 over total length 2 gives cap 0.6 < mass 1
    spec = ProblemSpec(
        InteractionMatrix.from_rows([[1]]),
        (interval(-1.0, 1.0),),
        (ExternalField.zero(),),
        MassVector.from_values([1]),
        (UpperConstraint(0, 0.3),),
    )
    with pytest.raises(InfeasibleConstraint):
        validate_spec(spec)


# --- Cholesky -------------------------------------------------------------

def test_cholesky_identity():
    B = interaction_cholesky(np.eye(3))
    assert np.array_equal(B, np.eye(3))


def test_cholesky_2x2_closed_form():
    C = np.array([[1.0, -0.5], [-0.5, 1.0]])
    B = interaction_cholesky(C)
    assert np.allclose(B, [[1.0, -0.5], [0.0, np.sqrt(3) / 2]], atol=1e-15)
    assert np.max(np.abs(B.T @ B - C)) <= 1e-12


def test_cholesky_two_matrix_entries():
    C = load_builtin("two-matrix").C
    B = interaction_cholesky(C)
    assert B[0, 0] == pytest.approx(1.0, abs=1e-15)
    assert B[0, 1] == pytest.approx(-0.5, abs=1e-15)
    assert B[1, 1] == pytest.approx(np.sqrt(3) / 2, abs=1e-15)
    assert np.max(np.abs(B.T @ B - C.matrix)) <= 1e-12
    assert np.all(np.diag(B) > 0)


def test_cholesky_quadratic_form_matches():
    rng = np.random.default_rng(42)
    C = load_builtin("two-matrix").C.matrix
    B = interaction_cholesky(C)
    for _ in range(100):
        x = rng.standard_normal(3)
        assert x @ C @ x == pytest.approx(np.sum((B @ x) ** 2), abs=1e-12)


# --- coupled masses -------------------------------------------------------

def test_coupled_masses_two_matrix_exact():
    validated = validate_spec(load_builtin("two-matrix"))
    assert validated.cm_exact == (Fraction(2, 3), Fraction(0), Fraction(0))
    assert validated.cm.tolist() == [2 / 3, 0.0, 0.0]


def test_coupled_masses_toeplitz_22():
    validated = validate_spec(load_builtin("toeplitz", p=2, q=2))
    assert validated.cm_exact == (Fraction(0), Fraction(1, 2), Fraction(0))
    assert validated.cm.tolist() == [0.0, 0.5, 0.0]


def test_coupled_masses_identity():
    spec = ProblemSpec(
        InteractionMatrix.from_rows([[1, 0], [0, 1]]),
        (interval(-1, 1), interval(2, 3)),
        (ExternalField.zero(), ExternalField.zero()),
        MassVector.from_values([1, 1]),
    )
    assert validate_spec(spec).cm.tolist() == [1.0, 1.0]


def test_coupled_masses_linear_in_m():
    base = load_builtin("two-matrix")
    for alpha in (2, Fraction(1, 2), 4):
        scaled = ProblemSpec(
            base.C,
            base.supports,
            base.fields,
            MassVector.from_values([alpha * m for m in base.masses.exact]),
            (),
        )
        v1 = validate_spec(scaled).cm
        v0 = validate_spec(ProblemSpec(base.C, base.supports, base.fields, base.masses, ())).cm
        assert np.array_equal(v1, float(alpha) * v0)


# --- admissibility --------------------------------------------------------

def test_two_matrix_classifies_weak():
    report = classify_admissibility(load_builtin("two-matrix"))
    assert report.overall == "weak"
    assert [c.cls for c in report.components] == ["strong", "weak", "weak"]


def test_quadratic_field_is_strong():
    report = classify_admissibility(load_builtin("scalar-quadratic"))
    assert report.overall == "strong"
    assert report.components[0].liminf == math.inf


def test_log_field_is_weak_with_zero_liminf():
    report = classify_admissibility(load_builtin("scalar-weak"))
    assert report.overall == "weak"
    assert abs(report.components[0].liminf) <= 1e-9


def test_compact_support_class():
    report = classify_admissibility(load_builtin("scalar-compact"))
    assert report.overall == "bounded-support"
    assert report.components[0].liminf is None


def test_zero_field_with_positive_coupling_inadmissible():
    # V = 0 on an unbounded support with Cm = 1: tail drops like -log(1+x^2)
    report = classify_admissibility(scalar_spec(support=real_line()))
    assert report.overall == "inadmissible"
    assert report.components[0].liminf == -math.inf


def test_sampled_tail_strong_detection():
    f = ExternalField.from_function(lambda x: np.real(x) ** 2)  # no declared growth
    report = classify_admissibility(scalar_spec(field=f, support=real_line()))
    assert report.components[0].cls == "strong"


def test_unclassifiable_field_reported():
    def wobble(x):
        u = np.log1p(np.abs(x) ** 2)
        return -0.5 * u + 3.0 * np.cos(np.pi * np.log2(np.abs(x) + 1e-300))

    spec = scalar_spec(field=ExternalField.from_function(wobble), support=real_line())
    with pytest.raises(UnclassifiableField):
        classify_admissibility(spec)


def test_class_invariant_under_bounded_perturbation():
    # declared-growth path: adding a compactly supported bump changes nothing
    base = load_builtin("scalar-weak")
    bumped = ProblemSpec(
        base.C,
        base.supports,
        (ExternalField(
            lambda x: base.fields[0].values(x) + np.interp(
                np.real(x), [-1.0, 0.0, 1.0], [0.0, 5.0, 0.0]),
            declared_growth=base.fields[0].declared_growth,
        ),),
        base.masses,
    )
    assert classify_admissibility(bumped).overall == classify_admissibility(base).overall


def test_ray_normalization():
    from vequilib import Ray

    r = Ray(0.0, 3.0 + 4.0j)
    assert abs(abs(r.u) - 1.0) < 1e-15
