"""Symplectic intersection indices and Sturm-type oscillation theory.

The package computes Maslov-type intersection indices (CLM, Robbin-Salamon,
Conley-Zehnder, L-Maslov, triple, Hormander) of Lagrangian and symplectic
paths, spectral flow of discretized first-order operator families, Morse
indices of Morse-Sturm systems, and ships executable versions of the
classical comparison/oscillation theorems plus a Kepler conjugate-point
application. See the module docstrings for the conventions; the README
walks through the main entry points.
"""

from .errors import (
    CollisionError,
    ConvergenceError,
    DegenerateCrossingError,
    FrameError,
    IdenticallyDegenerateError,
    PreconditionError,
    RefinementError,
    SchemaError,
    SympsturmError,
    TransversalityError,
    UnsupportedBoundaryError,
)
from .symplectic import (
    LagrangianCheck,
    SymplecticSpace,
    double_space,
    graph_lagrangian,
    horizontal_frame,
    inertia,
    intersect_three,
    intersection,
    is_lagrangian,
    random_lagrangian,
    random_symmetric,
    random_symplectic_matrix,
    standard_space,
    subspace_sum,
    vertical_frame,
)
from .paths import (
    ClosedFormPath,
    ConstantLeg,
    FlowLeg,
    FlowPath,
    InversePath,
    IteratedPath,
    PairPath,
    ReparametrizedPath,
    diagonal_frame,
    graph_leg,
    omega_graph_frame,
    pair_against_constant,
    pair_frame,
    rotation_path,
)
from .flows import (
    BoundaryCondition,
    CoefficientPath,
    FundamentalSolution,
    GeneratorPath,
    MorseSturmSystem,
    boundary_lagrangian,
    c_of_Z,
    discrete_morse_index,
    integrate_fundamental,
    morse_sturm_to_hamiltonian,
)
from .indices import (
    CrossingRecord,
    CrossingSet,
    IndexReport,
    PlusCurveReport,
    clm_index,
    crossing_form,
    cz_index,
    detect_crossings,
    hormander_index,
    iota_omega,
    iterate_flow,
    l_maslov_index,
    maslov_pair_index,
    plus_curve_report,
    rs_index,
    triple_index,
)
from .spectral import (
    OperatorFamily,
    SpectralFlowReport,
    comparison_flow,
    constant_family,
    relative_morse_check,
    spectral_flow,
)
from .theorems import (
    TheoremReport,
    alternation_bound,
    comparison_principle,
    cz_maslov_bound,
    iteration_bounds,
    iteration_invariant_linearity,
    nonoscillation,
    oscillation_bound,
    zeros_theorem,
)
from .applications import (
    FocalSetup,
    KeplerConjugateReport,
    KeplerOrbit,
    conjugate_focal_comparison,
    first_conjugate_distance,
    focal_lagrangian,
    jacobi_field,
    kepler_curvature,
    kepler_orbit,
)
from .suites import SUITES, run_suite, summarize

__version__ = "0.1.0"
