"""Transport geometry of discrete parametric statistical models.

Weighted-graph ground metrics induce a probability-dependent Laplacian whose
pseudo-inverse equips the simplex interior, and any model parametrized over
it, with a transport (Wasserstein) metric.  On top of that structure the
package computes Fisher-Rao and transport metric tensors, action-minimizing
geodesics and distances, the parameter-space Fokker-Planck flow of the KL
divergence, Ricci curvature lower bounds with their convergence-rate
counterparts, and log-Sobolev / Talagrand / HWI checks, plus the softmax
family sweeps and figure/CSV reporting driven by the ``wasserstat`` CLI.

Hot numerical loops are jitted with numba; set WASSERSTAT_DISABLE_NUMBA=1 to
run the identical kernels interpreted.
"""

__version__ = "0.1.0"

from ._kernels import NUMBA_ENABLED
from .curvature import (
    CurvatureReport,
    convexity_residuals,
    kl_hessian_matrix,
    ricci_lower_bound,
)
from .errors import (
    BoundaryStallError,
    ConfigurationError,
    DegenerateMetricError,
    DegenerateRateError,
    DomainError,
    InapplicableError,
    NumericalDegeneracyError,
    WasserstatError,
)
from .expfam import (
    DEFAULT_OMEGAS,
    ExponentialFamily1D,
    evaluate,
    family_from_angle,
    k3_graph,
    softmax_model,
    sweep_grid,
)
from .flow import (
    ConvergenceRate,
    Trajectory,
    convergence_rate,
    fit_decay_rate,
    fpe_step,
    fpe_trajectory,
    initial_grid,
    second_difference_rates,
)
from .geodesic import (
    PathOnParams,
    constant_speed_geodesic,
    distance_w,
    minimize_action,
)
from .ground_metric import (
    Distribution,
    Graph,
    incidence_matrix,
    laplacian,
    laplacian_pinv,
    mobility_matrix,
    mobility_vector,
    volume_form,
)
from .inequalities import (
    InequalityResult,
    find_minimizer,
    hwi_check,
    log_sobolev_check,
    talagrand_check,
    write_inequality_csv,
)
from .manifold import (
    MetricTensor,
    StatisticalModel,
    christoffel_symbols,
    coordinate_hessians,
    fisher_rao_metric,
    jacobian,
    kl_divergence,
    kl_gradient,
    relative_fisher_information,
    simplex_chart_model,
    wasserstein_metric,
)
from .report import SweepRow, read_sweep_csv, write_sweep_csv
from .sweep import SweepParams, evaluate_config, run_sweep

__all__ = [name for name in dir() if not name.startswith("_")]
