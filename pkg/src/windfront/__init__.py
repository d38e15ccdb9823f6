"""windfront: wavefronts, cut loci and fastest paths for navigation under wind.

Metrics (Riemannian, Randers, Zermelo, Kropina, SSTK) are described by
closed-form or gridded fields; fronts are propagated as families of
lightlike pregeodesics of an associated spacetime.
"""

from .errors import *  # noqa: F401,F403
from .finsler import (
    CustomMetric,
    FinslerMetric,
    KropinaMetric,
    NavigationData,
    RandersCoefficients,
    RandersMetric,
    RiemannianMetric,
    SSTKProjectedMetric,
    ZermeloMetric,
    domain_contains,
    eval_metric,
    fundamental_tensor,
    indicatrix_sample,
    isotropic,
    path_length,
    randers_from_zermelo,
    zermelo,
    zermelo_from_randers,
)
from .geodesics import IntegratorParams, integrate_pregeodesic, lightlike_orthogonal_init
from .navigation import PathResult, ball_boundary, distance, fastest_path, reverse
from .runner import run_scenario
from .scenario import load_scenario, parse_scenario, render_scenario
from .spacetime import (
    SSTKMetric,
    fermat_from_sstk,
    spacetime_for,
    sstk_from_zermelo,
    zermelo_from_sstk,
)
from .wavefront import (
    Grid2D,
    InitialFront,
    arrival_time_field,
    detect_cuts,
    front_at,
    propagate,
)

__version__ = "0.1.0"
