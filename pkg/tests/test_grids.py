import numpy as np
import pytest

from vequilib import (
    DiscreteMeasure,
    GridMismatch,
    InfeasibleConstraint,
    UpperConstraint,
    build_grid,
    density_to_plane,
    discretize_constraint,
    grid_to_csv,
    imaginary_line,
    interval,
    plane_grid,
    push_forward,
    real_line,
    sphere_image,
    uniform_measure,
)
from vequilib.problem import Ray, SupportSet


def test_segment_grid_uniform_cells():
    g = build_grid(interval(-1.0, 1.0), 8)
    assert g.n == 8
    assert np.allclose(g.plane_lengths, 0.25)
    # centers lie on the sphere
    from vequilib import sphere_defect
    assert sphere_defect(g.centers).max() <= 1e-12


def test_ray_grid_chord_ratio():
    g = build_grid(SupportSet((Ray(0.0, 1.0),)), 8, pole_clearance=1e-3)
    assert g.n == 8
    assert g.h.max() / g.h.min() <= 4.0


def test_offset_ray_grid_chord_ratio():
    g = build_grid(SupportSet((Ray(5.0 + 2.0j, 1j),)), 16, pole_clearance=1e-3)
    assert g.h.max() / g.h.min() <= 4.0


def test_full_line_grid_mirror_symmetric():
    g = build_grid(real_line(), 40)
    half = g.n // 2
    plus, minus = g.plane_centers[:half], g.plane_centers[half:]
    assert np.array_equal(plus, -minus)
    assert np.array_equal(g.centers[:half, 0], -g.centers[half:, 0])
    assert np.array_equal(g.centers[:half, 2], g.centers[half:, 2])


def test_pole_clearance_respected():
    eps = 1e-3
    for support in (real_line(), imaginary_line()):
        g = build_grid(support, 64, pole_clearance=eps)
        dist = np.linalg.norm(g.endpoints.reshape(-1, 3) - [0.0, 0.0, 1.0], axis=1)
        assert dist.min() >= eps * (1 - 1e-12)


def test_cells_do_not_overlap():
    g = build_grid(interval(-1.0, 1.0), 16)
    starts = np.real(g.plane_breaks[:, 0])
    ends = np.real(g.plane_breaks[:, 1])
    assert np.all(ends[:-1] <= starts[1:] + 1e-15)
    # plane preimages cover the support
    assert starts[0] == -1.0 and ends[-1] == 1.0


def test_minimum_cell_count_enforced():
    with pytest.raises(ValueError):
        build_grid(interval(-1, 1), 4)


def test_push_forward_preserves_weights():
    g = plane_grid(interval(-1.0, 1.0), 10)
    w = np.zeros(10)
    w[3] = 0.2
    w[7] = 0.8
    mu = DiscreteMeasure(g, w)
    pushed = push_forward(mu)
    assert np.array_equal(pushed.weights, w)
    assert pushed.mass == mu.mass
    assert pushed.grid.side == "sphere"


def test_push_forward_rejects_sphere_measures():
    g = build_grid(interval(-1.0, 1.0), 10)
    with pytest.raises(GridMismatch):
        push_forward(DiscreteMeasure(g, np.full(10, 0.1)))


def test_push_forward_linear():
    g = plane_grid(interval(-1.0, 1.0), 12)
    rng = np.random.default_rng(0)
    wa, wb = rng.random(12), rng.random(12)
    combo = push_forward(DiscreteMeasure(g, 2.0 * wa + 3.0 * wb))
    parts = 2.0 * push_forward(DiscreteMeasure(g, wa)).weights \
        + 3.0 * push_forward(DiscreteMeasure(g, wb)).weights
    assert np.array_equal(combo.weights, parts)


def test_discretize_constraint_unit_density():
    g = build_grid(interval(-1.0, 1.0), 8)
    caps = discretize_constraint(UpperConstraint(0, 1.0), g, mass=1.0)
    assert np.allclose(caps, 0.25)

    g4 = build_grid(interval(-1.0, 1.0), 8)
    caps4 = discretize_constraint(UpperConstraint(0, 2.0), g4, mass=1.0)
    assert np.allclose(caps4, 0.5)


def test_discretize_constraint_infinite_density():
    g = build_grid(interval(-1.0, 1.0), 8)
    caps = discretize_constraint(UpperConstraint(0, np.inf), g, mass=1.0)
    assert np.all(np.isinf(caps))


def test_discretize_constraint_infeasible():
    g = build_grid(interval(-1.0, 1.0), 8)
    with pytest.raises(InfeasibleConstraint):
        discretize_constraint(UpperConstraint(0, 0.3), g, mass=1.0)


def test_density_to_plane_bookkeeping():
    g = build_grid(interval(0.0, 0.5), 8)
    w = np.full(8, 0.125)
    pts, dens = density_to_plane(w, g)
    assert np.allclose(dens, 0.125 / g.plane_lengths)
    assert np.sum(dens * g.plane_lengths) == pytest.approx(1.0, abs=1e-12)
    # single cell worth: weight 1 over plane length 0.5 -> density 2
    assert np.sum(w) * 2.0 == pytest.approx(np.sum(dens * g.plane_lengths) * 2.0)


def test_uniform_measure_constant_density():
    g = build_grid(interval(-1.0, 1.0), 16)
    mu = uniform_measure(g, mass=2.0)
    _, dens = density_to_plane(mu.weights, g)
    assert np.allclose(dens, dens[0])
    assert mu.mass == pytest.approx(2.0, abs=1e-14)


def test_sphere_image_matches_build_grid():
    support = interval(-1.0, 1.0)
    direct = build_grid(support, 10)
    mapped = sphere_image(plane_grid(support, 10))
    assert np.array_equal(direct.centers, mapped.centers)
    assert np.array_equal(direct.h, mapped.h)


def test_grid_csv_shape():
    g = build_grid(interval(-1.0, 1.0), 8)
    text = grid_to_csv(g)
    lines = text.strip().split("\n")
    assert lines[0].startswith("cell_index,plane_start_re")
    assert len(lines) == 9
    assert len(lines[1].split(",")) == 9


def test_refinement_energies_cauchy():
    # scalar compact case: energies at n and 2n approach each other
    from vequilib import SolveOptions, assemble, discretize, load_builtin, solve, validate_spec

    validated = validate_spec(load_builtin("scalar-compact"))
    energies = {}
    for n in (50, 100, 200):
        problem = discretize(validated, cells=n)
        energies[n] = solve(assemble(problem), SolveOptions(tol=1e-9)).energy
    assert abs(energies[100] - energies[50]) <= 1.0 / 50
    assert abs(energies[200] - energies[100]) <= 1.0 / 100
