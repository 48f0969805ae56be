"""Ricci curvature lower bound via the transport Hessian of the KL divergence.

At each parameter point the Hessian of theta -> KL(p(theta) || q) with
respect to the transport geometry decomposes as

    M(theta) = G_F(theta)
             + sum_i  d2 p_i / dtheta^2 * log(p_i / q_i)
             - sum_k  Gamma^k(theta) * dKL/dtheta_k,

Fisher information plus the second differential of the parametrization
against the log ratio, minus the Christoffel correction.  The curvature
lower bound kappa is the minimum over a parameter grid of the smallest
generalized eigenvalue of (M, G_W); it certifies kappa-geodesic convexity of
the KL divergence, checked directly by ``convexity_residuals``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import NumericalDegeneracyError, WasserstatError
from .ground_metric import Graph, as_probability, volume_form
from .manifold import (
    FD_SCALE,
    StatisticalModel,
    christoffel_symbols,
    coordinate_hessians,
    fisher_rao_metric,
    kl_divergence,
    kl_gradient,
    probabilities,
    wasserstein_metric,
)
from .geodesic import constant_speed_geodesic

DEFAULT_GRID_POINTS = 41


def kl_hessian_matrix(model: StatisticalModel, graph: Graph, theta, q,
                      fd_step=None) -> np.ndarray:
    """Transport Hessian of the KL divergence at theta, symmetrized.

    Symmetrization absorbs the O(step) asymmetry that finite differences
    leave in the Christoffel term.
    """
    theta = model.require_in_domain(theta)
    q = as_probability(q)
    p = probabilities(model, theta)
    GF = fisher_rao_metric(model, theta).matrix
    H = coordinate_hessians(model, theta)
    logr = np.log(p / q)
    second = np.einsum("nij,n->ij", H, logr)
    gamma = christoffel_symbols(model, graph, theta, fd_step=fd_step)
    grad = kl_gradient(model, theta, q)
    M = GF + second - np.einsum("k,kij->ij", grad, gamma)
    return 0.5 * (M + M.T)


def smallest_generalized_eigenvalue(M: np.ndarray, G: np.ndarray) -> float:
    """Smallest eigenvalue of the pencil M v = lambda G v with G SPD.

    Solved by Cholesky reduction of G (scipy's symmetric-definite path),
    which shares its spectrum with G^{-1} M.
    """
    vals = scipy.linalg.eigh(M, G, eigvals_only=True)
    return float(vals[0])


@dataclass
class CurvatureReport:
    """Per-grid-point smallest generalized eigenvalues and their minimum."""

    grid: np.ndarray
    lambdas: np.ndarray
    kappa: float
    q: np.ndarray
    diff_provenance: str  # "analytic" | "fd"
    failures: list[tuple[int, str]] = field(default_factory=list)

    def to_csv(self, path) -> None:
        d = self.grid.shape[1]
        header = ",".join(f"theta_{a + 1}" for a in range(d)) + ",lambda_min"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header + "\n")
            for k in range(self.grid.shape[0]):
                cells = [repr(float(x)) for x in self.grid[k]]
                cells.append(repr(float(self.lambdas[k])))
                fh.write(",".join(cells) + "\n")


def default_grid(model: StatisticalModel,
                 points_per_dim: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Uniform grid over the domain box, inset by one finite-difference
    stencil margin per coordinate so every point admits Christoffel symbols."""
    axes = []
    for a in range(model.dim):
        lo, hi = model.theta_min[a], model.theta_max[a]
        m = 1.0001 * FD_SCALE * max(1.0, abs(lo), abs(hi))
        axes.append(np.linspace(lo + m, hi - m, points_per_dim))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def ricci_lower_bound(model: StatisticalModel, graph: Graph, q, grid=None,
                      points_per_dim: int = DEFAULT_GRID_POINTS) -> CurvatureReport:
    """kappa = min over the grid of the smallest eigenvalue of (M, G_W).

    Grid points where the evaluation fails (degenerate metric, stencil out
    of the domain) are recorded and excluded; if every point fails the
    report is impossible and NumericalDegeneracyError is raised.
    """
    q = as_probability(q)
    grid = default_grid(model, points_per_dim) if grid is None \
        else np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[0] == 0:
        raise NumericalDegeneracyError("empty curvature grid")
    for theta in grid:
        model.require_in_domain(theta)
    lambdas = np.full(grid.shape[0], np.nan)
    failures: list[tuple[int, str]] = []

    ka = _flow_kernel_args(model, graph, q)
    if ka is not None:
        lams, _ = _kernels.lambda_grid(np.ascontiguousarray(grid[:, 0]), *ka, FD_SCALE)
        lambdas[:] = lams
    else:
        for k, theta in enumerate(grid):
            try:
                M = kl_hessian_matrix(model, graph, theta, q)
                G = wasserstein_metric(model, graph, theta).matrix
                lambdas[k] = smallest_generalized_eigenvalue(M, G)
            except WasserstatError as exc:
                failures.append((k, str(exc)))
    if np.all(np.isnan(lambdas)):
        raise NumericalDegeneracyError(
            "curvature evaluation failed at every grid point"
        )
    provenance = ("analytic"
                  if model.jacobian_fn is not None and model.second_diff_fn is not None
                  else "fd")
    return CurvatureReport(
        grid=grid,
        lambdas=lambdas,
        kappa=float(np.nanmin(lambdas)),
        q=q,
        diff_provenance=provenance,
        failures=failures,
    )


def _flow_kernel_args(model, graph, q):
    if model.softmax_stat is None or model.dim != 1:
        return None
    hi, lo = graph.edge_arrays()
    return (np.ascontiguousarray(model.softmax_stat, dtype=float),
            np.ascontiguousarray(q, dtype=float), hi, lo,
            np.ascontiguousarray(graph.weights, dtype=float), volume_form(graph))


@dataclass
class ConvexityResult:
    """Residuals of the geodesic-convexity inequality at sampled times."""

    t: np.ndarray
    residuals: np.ndarray
    path: "object"


def convexity_residuals(model: StatisticalModel, graph: Graph, theta0, theta1,
                        q, kappa: float, samples: int = 11,
                        N: int = 64) -> ConvexityResult:
    """Check kappa-geodesic convexity of the KL divergence directly.

    Builds the constant-speed geodesic between the endpoints and returns

        (1-t) KL(0) + t KL(1) - (kappa/2) t (1-t) dist^2 - KL(t)

    at ``samples`` times snapped to path nodes (so t=0 and t=1 are the exact
    endpoints); all residuals should be >= -1e-6 when kappa comes from
    ``ricci_lower_bound``.
    """
    q = as_probability(q)
    path = constant_speed_geodesic(model, graph, theta0, theta1, N=N)
    idx = np.unique(np.round(np.linspace(0, N, samples)).astype(int))
    t = idx / N
    kl0 = kl_divergence(probabilities(model, path.nodes[0]), q)
    kl1 = kl_divergence(probabilities(model, path.nodes[-1]), q)
    d2 = path.distance ** 2
    residuals = np.empty(t.shape[0])
    for j, k in enumerate(idx):
        klt = kl_divergence(probabilities(model, path.nodes[k]), q)
        residuals[j] = ((1.0 - t[j]) * kl0 + t[j] * kl1
                        - 0.5 * kappa * t[j] * (1.0 - t[j]) * d2 - klt)
    return ConvexityResult(t=t, residuals=residuals, path=path)
