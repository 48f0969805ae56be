"""Parametric statistical models and their metric tensors.

A model maps a box domain in R^d into the interior of the probability
simplex.  Two Riemannian structures on the parameter space matter here: the
transport (Wasserstein) metric, pulled back through the weighted-Laplacian
pseudo-inverse,

    G_W(theta) = J(theta)^T L(p(theta))^+ J(theta),

and the classical Fisher-Rao metric.  The module also provides the KL
divergence and its Euclidean gradient, per-coordinate Hessians of the
parametrization, Christoffel symbols of the transport metric (by central
finite differences of G_W), and the relative Fisher information, i.e. the
squared transport-gradient norm of the KL divergence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import (
    ConfigurationError,
    DegenerateMetricError,
    DomainError,
    NumericalDegeneracyError,
)
from .ground_metric import (
    INTERIOR_TOL,
    Graph,
    as_probability,
    incidence_matrix,
    volume_form,
)

# Central-difference step per coordinate: FD_SCALE * max(1, |theta_k|).
FD_SCALE = 1e-4

# Rank guard for metric tensors: smallest eigenvalue must exceed this times
# the largest.
METRIC_RANK_TOL = 1e-12

# Condition-number guard when inverting G_W.
METRIC_COND_MAX = 1e12


@dataclass
class StatisticalModel:
    """Parametrization of a discrete model over an axis-aligned box domain.

    ``map`` takes a parameter vector of length ``dim`` to a probability
    vector.  Analytic first/second differentials are optional; central finite
    differences are used when absent.  ``map_batch``/``jacobian_batch``
    vectorize evaluation over a stack of parameter points and only matter for
    speed.  ``softmax_stat`` marks one-parameter softmax (exponential) families
    by their sufficient statistic, which enables the compiled fast paths.
    """

    dim: int
    theta_min: np.ndarray
    theta_max: np.ndarray
    map: Callable[[np.ndarray], np.ndarray]
    jacobian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    second_diff_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    map_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jacobian_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""
    softmax_stat: Optional[np.ndarray] = None

    def __post_init__(self):
        self.theta_min = np.atleast_1d(np.asarray(self.theta_min, dtype=float))
        self.theta_max = np.atleast_1d(np.asarray(self.theta_max, dtype=float))
        if self.theta_min.shape != (self.dim,) or self.theta_max.shape != (self.dim,):
            raise ConfigurationError("domain bounds must match the parameter dimension")
        if np.any(self.theta_min >= self.theta_max):
            raise ConfigurationError("domain box is empty")

    def in_domain(self, theta, margin: float = 0.0) -> bool:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return bool(
            np.all(theta >= self.theta_min + margin)
            and np.all(theta <= self.theta_max - margin)
        )

    def require_in_domain(self, theta, margin: float = 0.0) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.dim,):
            raise DomainError(f"parameter has shape {theta.shape}, expected ({self.dim},)")
        if not self.in_domain(theta, margin):
            raise DomainError(
                f"theta={theta.tolist()} outside domain "
                f"[{self.theta_min.tolist()}, {self.theta_max.tolist()}]"
                + (f" with margin {margin:g}" if margin else "")
            )
        return theta


@dataclass(frozen=True)
class MetricTensor:
    """A d x d metric evaluated at a parameter point."""

    matrix: np.ndarray
    flavor: str  # "wasserstein" | "fisher_rao"
    theta: np.ndarray

    def __post_init__(self):
        if not np.allclose(self.matrix, self.matrix.T, atol=1e-12):
            raise NumericalDegeneracyError(f"{self.flavor} metric not symmetric")


def fd_steps(theta, scale: float = FD_SCALE) -> np.ndarray:
    """Per-coordinate central-difference step sizes."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return scale * np.maximum(1.0, np.abs(theta))


def probabilities(model: StatisticalModel, theta) -> np.ndarray:
    """Evaluate the parametrization, checking the image stays interior."""
    p = np.asarray(model.map(np.atleast_1d(np.asarray(theta, dtype=float))), dtype=float)
    if p.min() < INTERIOR_TOL:
        raise ConfigurationError(
            f"model leaves the simplex interior at theta={np.atleast_1d(theta).tolist()}"
            f" (min p = {p.min():.3e})"
        )
    return p


def probabilities_batch(model: StatisticalModel, thetas: np.ndarray) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    if model.map_batch is not None:
        return np.asarray(model.map_batch(thetas), dtype=float)
    return np.stack([np.asarray(model.map(t), dtype=float) for t in thetas])


def jacobian(model: StatisticalModel, theta) -> np.ndarray:
    """n x d Jacobian of the parametrization; columns sum to zero.

    Uses the analytic differential when supplied, otherwise central finite
    differences with per-coordinate steps from ``fd_steps``.
    """
    theta = model.require_in_domain(theta)
    if model.jacobian_fn is not None:
        return np.asarray(model.jacobian_fn(theta), dtype=float)
    return _fd_jacobian(model, theta)


def _fd_jacobian(model: StatisticalModel, theta: np.ndarray) -> np.ndarray:
    steps = fd_steps(theta)
    cols = []
    for k in range(model.dim):
        e = np.zeros(model.dim)
        e[k] = steps[k]
        cols.append((probabilities(model, theta + e) - probabilities(model, theta - e))
                    / (2.0 * steps[k]))
    return np.stack(cols, axis=1)


def jacobian_batch(model: StatisticalModel, thetas: np.ndarray) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    if model.jacobian_batch is not None:
        return np.asarray(model.jacobian_batch(thetas), dtype=float)
    if model.jacobian_fn is not None:
        return np.stack([np.asarray(model.jacobian_fn(t), dtype=float) for t in thetas])
    return np.stack([_fd_jacobian(model, t) for t in thetas])


def _laplacian_solve_pieces(graph: Graph):
    """Static arrays reused by the stacked Laplacian solves."""
    inc = incidence_matrix(graph)
    d = volume_form(graph)
    hi, lo = graph.edge_arrays()
    return inc, d, hi, lo


def _gw_matrices(graph: Graph, ps: np.ndarray, js: np.ndarray) -> np.ndarray:
    """Stacked J^T L(p)^+ J for batches of probabilities and Jacobians.

    Because the Jacobian columns sum to zero, L^+ J equals (L + P)^{-1} J
    with P the projector onto constants, so a single linear solve per point
    suffices.
    """
    inc, d, hi, lo = _laplacian_solve_pieces(graph)
    mob = 0.5 * (ps[:, hi] / d[hi] + ps[:, lo] / d[lo])  # (m, E)
    L = np.einsum("ei,me,ej->mij", inc, mob, inc, optimize=True)
    L += 1.0 / graph.n
    try:
        X = np.linalg.solve(L, js)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(f"Laplacian solve failed: {exc}") from exc
    G = np.einsum("mni,mnj->mij", js, X)
    return 0.5 * (G + np.swapaxes(G, 1, 2))


def wasserstein_metric_batch(model: StatisticalModel, graph: Graph,
                             thetas: np.ndarray) -> np.ndarray:
    """Stacked transport metric tensors, (m, d, d).  No rank guard."""
    thetas = np.asarray(thetas, dtype=float)
    ps = probabilities_batch(model, thetas)
    if ps.min() < INTERIOR_TOL:
        raise ConfigurationError("model leaves the simplex interior on the batch")
    js = jacobian_batch(model, thetas)
    return _gw_matrices(graph, ps, js)


def wasserstein_metric(model: StatisticalModel, graph: Graph, theta) -> MetricTensor:
    """Pullback transport metric G_W(theta); symmetric positive definite.

    Raises DegenerateMetricError when the Jacobian is numerically
    rank-deficient (smallest eigenvalue below 1e-12 times the largest).
    """
    theta = model.require_in_domain(theta)
    G = _gw_matrices(graph, probabilities(model, theta)[None, :],
                     jacobian(model, theta)[None, :, :])[0]
    _check_rank(G, theta)
    return MetricTensor(matrix=G, flavor="wasserstein", theta=theta)


def _check_rank(G: np.ndarray, theta) -> None:
    eigs = np.linalg.eigvalsh(G)
    if eigs[0] <= METRIC_RANK_TOL * max(eigs[-1], 0.0) or eigs[-1] <= 0.0:
        raise DegenerateMetricError(
            f"metric eigenvalues {eigs.tolist()} at theta={np.atleast_1d(theta).tolist()}"
            " indicate rank deficiency"
        )


def fisher_rao_metric(model: StatisticalModel, theta) -> MetricTensor:
    """Fisher-Rao metric sum_i (d_a log p_i)(d_b log p_i) p_i."""
    theta = model.require_in_domain(theta)
    p = probabilities(model, theta)
    J = jacobian(model, theta)
    G = (J / p[:, None]).T @ J
    return MetricTensor(matrix=0.5 * (G + G.T), flavor="fisher_rao", theta=theta)


def kl_divergence(p, q) -> float:
    """Relative entropy sum_i p_i log(p_i / q_i) between interior vectors."""
    p = as_probability(p)
    q = as_probability(q)
    return float(np.dot(p, np.log(p / q)))


def kl_gradient(model: StatisticalModel, theta, q) -> np.ndarray:
    """Euclidean gradient of theta -> KL(p(theta) || q).

    Equals J^T log(p/q): the constant offset in the usual log(p/q) + 1 form
    dies against the zero column sums of J.
    """
    theta = model.require_in_domain(theta)
    q = as_probability(q)
    p = probabilities(model, theta)
    J = jacobian(model, theta)
    return J.T @ np.log(p / q)


def coordinate_hessians(model: StatisticalModel, theta) -> np.ndarray:
    """Hessians of every coordinate p_i, stacked as (n, d, d).

    The stack sums to the zero matrix over i because probabilities sum to 1.
    """
    theta = model.require_in_domain(theta)
    if model.second_diff_fn is not None:
        return np.asarray(model.second_diff_fn(theta), dtype=float)
    d = model.dim
    steps = fd_steps(theta)
    p0 = probabilities(model, theta)
    n = p0.shape[0]
    H = np.zeros((n, d, d))
    for a in range(d):
        ea = np.zeros(d)
        ea[a] = steps[a]
        H[:, a, a] = (probabilities(model, theta + ea) - 2.0 * p0
                      + probabilities(model, theta - ea)) / steps[a] ** 2
        for b in range(a + 1, d):
            eb = np.zeros(d)
            eb[b] = steps[b]
            mixed = (probabilities(model, theta + ea + eb)
                     - probabilities(model, theta + ea - eb)
                     - probabilities(model, theta - ea + eb)
                     + probabilities(model, theta - ea - eb)) / (4.0 * steps[a] * steps[b])
            H[:, a, b] = mixed
            H[:, b, a] = mixed
    return H


def metric_derivatives(model: StatisticalModel, graph: Graph, theta,
                       fd_step=None) -> np.ndarray:
    """Central-difference dG_W/dtheta_a, stacked as (d, d, d) over a.

    The stencil must stay inside the domain box; otherwise DomainError.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    steps = fd_steps(theta) if fd_step is None else np.full(model.dim, float(fd_step))
    model.require_in_domain(theta, margin=0.0)
    points = []
    for a in range(model.dim):
        e = np.zeros(model.dim)
        e[a] = steps[a]
        if not (model.in_domain(theta + e) and model.in_domain(theta - e)):
            raise DomainError(
                f"theta={theta.tolist()} too close to the domain boundary for the"
                f" finite-difference stencil (step {steps[a]:g})"
            )
        points.append(theta + e)
        points.append(theta - e)
    G = wasserstein_metric_batch(model, graph, np.asarray(points))
    dG = np.empty((model.dim, model.dim, model.dim))
    for a in range(model.dim):
        dG[a] = (G[2 * a] - G[2 * a + 1]) / (2.0 * steps[a])
    return dG


def christoffel_symbols(model: StatisticalModel, graph: Graph, theta,
                        fd_step=None) -> np.ndarray:
    """Christoffel symbols of the transport metric, shape (d, d, d).

    Index order is [k, i, j] for Gamma^k_{ij}; always computed from finite
    differences of G_W, including for models with analytic Jacobians.
    """
    theta = model.require_in_domain(theta)
    G = wasserstein_metric(model, graph, theta).matrix
    dG = metric_derivatives(model, graph, theta, fd_step=fd_step)
    d = model.dim
    # bracket[i, j, l] = dG[i][j, l] + dG[j][i, l] - dG[l][i, j]
    bracket = dG + dG.transpose(1, 0, 2) - dG.transpose(2, 0, 1)
    rhs = 0.5 * bracket.reshape(d * d, d).T  # rows l, columns flattened (i, j)
    gamma = solve_spd(G, rhs).reshape(d, d, d)  # [k, i, j]
    # enforce exact (i, j) symmetry against FD round-off
    return 0.5 * (gamma + gamma.transpose(0, 2, 1))


def solve_spd(G: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve with a symmetric positive definite matrix via Cholesky,
    with a condition-number guard instead of silent regularization."""
    eigs = np.linalg.eigvalsh(G)
    if eigs[0] <= 0.0 or eigs[-1] / eigs[0] > METRIC_COND_MAX:
        raise DegenerateMetricError(
            f"metric condition number beyond {METRIC_COND_MAX:.0e}"
            f" (eigenvalues {eigs.tolist()})"
        )
    c, low = scipy.linalg.cho_factor(G)
    return scipy.linalg.cho_solve((c, low), rhs)


def relative_fisher_information(model: StatisticalModel, graph: Graph,
                                theta, q) -> float:
    """Squared transport-gradient norm of the KL divergence at theta.

    Equals kl_gradient^T G_W^{-1} kl_gradient; the instantaneous dissipation
    of the parameter-space Fokker-Planck flow.
    """
    g = kl_gradient(model, theta, q)
    G = wasserstein_metric(model, graph, theta).matrix
    return float(g @ solve_spd(G, g))


def simplex_chart_model(n: int, margin: float = 0.05) -> StatisticalModel:
    """Chart on the full simplex: theta = (p_1, ..., p_{n-1}), last coordinate
    1 - sum(theta).

    The default box [margin, (1 - margin)/(n - 1)]^{n-1} keeps every
    coordinate, including the dependent one, at least ``margin``.  Through
    this chart the parameter-space machinery reproduces the transport
    geometry of the simplex itself.
    """
    if n < 2:
        raise ConfigurationError("simplex chart needs n >= 2 states")
    d = n - 1
    J = np.vstack([np.eye(d), -np.ones((1, d))])

    def prob(theta):
        return np.concatenate([theta, [1.0 - theta.sum()]])

    def prob_batch(thetas):
        return np.concatenate([thetas, 1.0 - thetas.sum(axis=1, keepdims=True)], axis=1)

    return StatisticalModel(
        dim=d,
        theta_min=np.full(d, margin),
        theta_max=np.full(d, (1.0 - margin) / d),
        map=prob,
        jacobian_fn=lambda theta: J,
        second_diff_fn=lambda theta: np.zeros((n, d, d)),
        map_batch=prob_batch,
        jacobian_batch=lambda thetas: np.broadcast_to(J, (len(thetas), n, d)).copy(),
        name=f"simplex_chart(n={n})",
    )


def validate_differentials(model: StatisticalModel, rng=None, n_samples: int = 5,
                           rtol: float = 1e-5) -> None:
    """Cross-check analytic differentials against central differences on a
    random sample of interior points; raises ConfigurationError on mismatch."""
    if model.jacobian_fn is None and model.second_diff_fn is None:
        return
    rng = np.random.default_rng(0) if rng is None else rng
    lo = model.theta_min + 0.05 * (model.theta_max - model.theta_min)
    hi = model.theta_max - 0.05 * (model.theta_max - model.theta_min)
    for _ in range(n_samples):
        theta = rng.uniform(lo, hi)
        if model.jacobian_fn is not None:
            J = np.asarray(model.jacobian_fn(theta), dtype=float)
            Jfd = _fd_jacobian(model, theta)
            scale = max(np.abs(J).max(), 1e-12)
            if np.abs(J - Jfd).max() > rtol * scale:
                raise ConfigurationError(
                    f"analytic Jacobian disagrees with finite differences at"
                    f" theta={theta.tolist()}"
                )
        if model.second_diff_fn is not None:
            H = np.asarray(model.second_diff_fn(theta), dtype=float)
            Hfd = _fd_coordinate_hessians(model, theta)
            scale = max(np.abs(H).max(), 1e-12)
            if np.abs(H - Hfd).max() > 10 * rtol * scale:
                raise ConfigurationError(
                    f"analytic second differential disagrees with finite"
                    f" differences at theta={theta.tolist()}"
                )


def _fd_coordinate_hessians(model: StatisticalModel, theta) -> np.ndarray:
    saved = model.second_diff_fn
    model.second_diff_fn = None
    try:
        return coordinate_hessians(model, theta)
    finally:
        model.second_diff_fn = saved
