"""Functional inequalities on parameter space.

With a positive curvature lower bound kappa, the KL divergence to the
reference measure, the relative Fisher information, and the transport
distance to the KL minimizer satisfy log-Sobolev and Talagrand inequalities;
the HWI inequality relates all three for any real kappa.  These checks
evaluate both sides numerically, with a small slack absorbing the geodesic
discretization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    InapplicableError,
    NumericalDegeneracyError,
)
from .flow import fpe_trajectory
from .geodesic import minimize_action
from .ground_metric import Graph, as_probability
from .manifold import (
    StatisticalModel,
    kl_divergence,
    probabilities,
    relative_fisher_information,
)

PASS_TOL = 1e-6

MINIMIZER_GRAD_TOL = 1e-12
MINIMIZER_AGREE_TOL = 1e-8
MINIMIZER_INCONSISTENT_TOL = 1e-4


@dataclass
class InequalityResult:
    """One evaluated inequality: pass iff slack = rhs - lhs >= -1e-6.

    ``flagged`` marks evaluations whose geodesic solve did not fully
    converge (typically boundary-hugging paths); they are reported, not
    silently failed.
    """

    kind: str  # "log-sobolev" | "talagrand" | "hwi"
    theta: np.ndarray
    lhs: float
    rhs: float
    slack: float
    passed: bool
    flagged: bool = False


def _result(kind, theta, lhs, rhs, flagged=False) -> InequalityResult:
    slack = rhs - lhs
    return InequalityResult(kind=kind, theta=np.atleast_1d(np.asarray(theta, float)),
                            lhs=float(lhs), rhs=float(rhs), slack=float(slack),
                            passed=bool(slack >= -PASS_TOL), flagged=flagged)


def default_seeds(model: StatisticalModel, per_dim: int = 3) -> np.ndarray:
    """Small deterministic seed set: a uniform per_dim^d grid over the box,
    inset 2% from the boundary."""
    axes = [np.linspace(model.theta_min[a] + 0.02 * (model.theta_max[a] - model.theta_min[a]),
                        model.theta_max[a] - 0.02 * (model.theta_max[a] - model.theta_min[a]),
                        per_dim)
            for a in range(model.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def find_minimizer(model: StatisticalModel, graph: Graph, q, seeds=None,
                   h: float = 1e-2, t_end: float = 400.0,
                   grad_tol: float = MINIMIZER_GRAD_TOL,
                   kappa: float = None) -> np.ndarray:
    """KL minimizer: flow each seed to gradient tolerance, keep the lowest
    terminus.

    When a positive kappa is supplied the termini are checked for agreement
    (theory guarantees a unique equilibrium); spread beyond 1e-4 raises
    NumericalDegeneracyError.
    """
    q = as_probability(q)
    seeds = default_seeds(model) if seeds is None \
        else np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.shape[0] == 0:
        raise ConfigurationError("need at least one seed")
    termini = []
    kls = []
    for seed in seeds:
        traj = fpe_trajectory(model, graph, seed, q, h, t_end, grad_tol=grad_tol)
        termini.append(traj.thetas[-1])
        kls.append(traj.kls[-1])
    termini = np.stack(termini)
    best = int(np.argmin(kls))
    if kappa is not None and kappa > 0 and seeds.shape[0] > 1:
        spread = float(np.max(np.abs(termini - termini[best])))
        if spread > MINIMIZER_INCONSISTENT_TOL:
            raise NumericalDegeneracyError(
                f"positive curvature bound {kappa:g} but flow termini spread"
                f" {spread:.3e} exceeds {MINIMIZER_INCONSISTENT_TOL:g}"
            )
    return termini[best]


def _kl_excess(model, theta, q, theta_star):
    kl = kl_divergence(probabilities(model, theta), q)
    kl_star = kl_divergence(probabilities(model, theta_star), q)
    return kl - kl_star


def log_sobolev_check(model: StatisticalModel, graph: Graph, theta, q,
                      kappa: float, theta_star=None) -> InequalityResult:
    """KL(theta) - KL(theta*)  <=  relative Fisher information / (2 kappa).

    Requires kappa > 0; otherwise the proposition does not apply.
    """
    if not kappa > 0.0:
        raise InapplicableError(f"log-Sobolev check needs kappa > 0, got {kappa!r}")
    theta_star = find_minimizer(model, graph, q, kappa=kappa) \
        if theta_star is None else np.asarray(theta_star, dtype=float)
    lhs = _kl_excess(model, theta, q, theta_star)
    rhs = relative_fisher_information(model, graph, theta, q) / (2.0 * kappa)
    return _result("log-sobolev", theta, lhs, rhs)


def talagrand_check(model: StatisticalModel, graph: Graph, theta, q,
                    kappa: float, theta_star=None, N: int = 64) -> InequalityResult:
    """(kappa/2) d_W(theta, theta*)^2  <=  KL(theta) - KL(theta*).

    Requires kappa > 0.
    """
    if not kappa > 0.0:
        raise InapplicableError(f"Talagrand check needs kappa > 0, got {kappa!r}")
    theta_star = find_minimizer(model, graph, q, kappa=kappa) \
        if theta_star is None else np.asarray(theta_star, dtype=float)
    path = minimize_action(model, graph, theta, theta_star, N=N)
    lhs = 0.5 * kappa * path.distance ** 2
    rhs = _kl_excess(model, theta, q, theta_star)
    return _result("talagrand", theta, lhs, rhs, flagged=not path.converged)


def hwi_check(model: StatisticalModel, graph: Graph, theta, q, kappa: float,
              theta_star=None, N: int = 64) -> InequalityResult:
    """KL(theta) - KL(theta*) <= sqrt(I) d_W - (kappa/2) d_W^2, any real kappa."""
    theta_star = find_minimizer(model, graph, q) \
        if theta_star is None else np.asarray(theta_star, dtype=float)
    path = minimize_action(model, graph, theta, theta_star, N=N)
    d = path.distance
    info = relative_fisher_information(model, graph, theta, q)
    lhs = _kl_excess(model, theta, q, theta_star)
    rhs = np.sqrt(max(info, 0.0)) * d - 0.5 * kappa * d * d
    return _result("hwi", theta, lhs, rhs, flagged=not path.converged)


def write_inequality_csv(results, path) -> None:
    results = list(results)
    if not results:
        raise ConfigurationError("no inequality results to write")
    d = results[0].theta.shape[0]
    header = ("kind," + ",".join(f"theta_{a + 1}" for a in range(d))
              + ",lhs,rhs,slack,passed,flagged")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for r in results:
            cells = [r.kind]
            cells += [repr(float(x)) for x in r.theta]
            cells += [repr(r.lhs), repr(r.rhs), repr(r.slack),
                      str(r.passed).lower(), str(r.flagged).lower()]
            fh.write(",".join(cells) + "\n")
