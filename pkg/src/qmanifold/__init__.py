"""Riemannian geometry of ground-state manifolds of parametrized Hamiltonians.

The bundled model is the two-parameter f=1 interacting boson (LMG) model;
any :class:`~qmanifold.model.HamiltonianFamily` or metric callable can be
fed to the geometry and geodesic machinery.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateGroundStateError,
    EigensolverError,
    MetricDegenerateError,
    NoDegeneracyError,
    QManifoldError,
    SeparatrixError,
)
from .model import (
    HamiltonianFamily,
    LmgModel,
    ParameterPoint,
    ShiftedFamily,
    TwoLevelModel,
    lmg_derivatives,
    lmg_matrix,
    two_level_matrix,
)
from .spectrum import (
    DiabolicPoint,
    DpSeed,
    dp_refine,
    dp_seeds,
    energy_gap,
    energy_gaps,
    fock_probabilities,
    refine_all,
)
from .geometry import (
    FamilyMetric,
    FunctionMetric,
    LinearMap,
    MetricField,
    PolarMap,
    SmoothingMap,
    christoffel,
    geometric_tensor,
    metric_field,
    metric_from_overlaps,
    pullback_metric,
    ricci_scalar,
)
from .geodesic import (
    GeodesicControls,
    GeodesicTrace,
    ShootingControls,
    integrate_cauchy,
    path_length,
    solve_dirichlet,
)
from .meanfield import (
    CondensateState,
    MeanFieldSolution,
    condensate_fraction,
    condensate_geometry,
    condensate_vector,
    hb_energy,
    hb_metric_f1,
    hb_metric_general,
    hb_minimize,
    phase_classify,
    qpt_separatrix,
)
from .dpgeom import (
    DpChart,
    approx_error_profile,
    circle_length,
    dp_polar_field,
    two_level_gap,
    two_level_map,
    two_level_metric,
)
