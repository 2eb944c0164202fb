"""Vector equilibrium measures in logarithmic potential theory.

The library minimizes energies of the form

    sum_ij c_ij I(mu_i, mu_j) + sum_i int V_i dmu_i

over vectors of positive measures with prescribed masses, supports
(segments and rays in the plane, possibly unbounded), and optional
density caps.  Unbounded problems are compactified onto a sphere of
radius 1/2 through inverse stereographic projection, the fields pick up
the shift -(sum_j c_ij m_j) log(1+|x|^2), and the discretized energy
becomes a strictly convex quadratic program over capped simplices.
"""

from .compactify import SphereProblem, TransformedField, discretize, transform_field, vector_energy
from .errors import (
    BadParams,
    CapViolation,
    DegenerateSupport,
    ExcludedAllCells,
    GridMismatch,
    InfeasibleConstraint,
    MassMismatch,
    NegativeRegularization,
    NonPositiveMass,
    NotPositiveDefinite,
    UnclassifiableField,
    UnknownScenario,
    VequilibError,
)
from .geometry import chordal_distance, map_point, pole_distance, sphere_defect
from .grids import (
    CellGrid,
    DiscreteMeasure,
    build_grid,
    density_to_plane,
    discretize_constraint,
    grid_to_csv,
    plane_grid,
    push_forward,
    sphere_image,
    uniform_measure,
)
from .io import dump_problem, dumps17, load_problem, spec_from_dict, spec_to_dict
from .kernel import (
    KernelBlock,
    energy_on_sphere_check,
    interaction_energy,
    interaction_energy_factored,
    kernel_matrix,
    mutual_energy,
    north_pole_potential,
    potential,
    regularized_energy_probe,
)
from .problem import (
    AdmissibilityReport,
    ExternalField,
    InteractionMatrix,
    MassVector,
    ProblemSpec,
    Ray,
    Segment,
    SupportSet,
    UpperConstraint,
    ValidatedProblem,
    classify_admissibility,
    coupled_masses,
    imaginary_line,
    interaction_cholesky,
    interval,
    real_line,
    validate_spec,
)
from .qp import (
    EnergyQP,
    Solution,
    SolveOptions,
    assemble,
    brute_force_minimize,
    kkt_residual,
    project_capped_simplex,
    solve,
)
from .scenarios import builtin_names, load_builtin, scenario_report

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
