"""One-dimensional softmax (exponential) families on three states.

These are the experiment models: p(theta) proportional to exp(theta * c) with
a unit-norm sufficient statistic c.  Adding constants to c is immaterial, so
families are indexed by an angle on a half circle inside the sum-zero plane,
spanned by the fixed orthonormal basis

    u = (1, -1, 0) / sqrt(2),    v = (1, 1, -2) / sqrt(6).

The sweep crosses 30 such families with 10 ground metrics on the triangle
graph; weight triples are ordered (w12, w23, w13).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import ConfigurationError, DomainError
from .ground_metric import Distribution, Graph
from .manifold import StatisticalModel

U_BASIS = np.array([1.0, -1.0, 0.0]) / math.sqrt(2.0)
V_BASIS = np.array([1.0, 1.0, -2.0]) / math.sqrt(6.0)

# Ten weight triples: the three single-edge-removed metrics, the uniform one,
# and the six orderings of (1/6, 1/3, 1/2).  Declared configuration, override
# via the sweep config.
DEFAULT_OMEGAS: tuple[tuple[float, float, float], ...] = (
    (0.5, 0.5, 0.0),
    (0.5, 0.0, 0.5),
    (0.0, 0.5, 0.5),
    (1 / 3, 1 / 3, 1 / 3),
) + tuple(permutations((1 / 6, 1 / 3, 1 / 2)))

# Parameter-domain presets used by the shipped experiments.
DOMAIN_PRESETS: dict[str, tuple[float, float]] = {
    "narrow": (-0.5, 0.5),
    "unit": (-1.0, 1.0),
    "wide": (-2.0, 2.0),
    "extreme": (-4.0, 4.0),
}


@dataclass(frozen=True)
class ExponentialFamily1D:
    """Softmax family with unit-norm sufficient statistic and a box domain."""

    c: np.ndarray
    theta_min: float = -1.0
    theta_max: float = 1.0

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 1 or c.shape[0] < 2:
            raise ConfigurationError("sufficient statistic must be a vector of >= 2 states")
        if abs(np.linalg.norm(c) - 1.0) > 1e-12:
            raise ConfigurationError(
                f"sufficient statistic must have unit norm, got {np.linalg.norm(c)!r}"
            )
        if not self.theta_min < self.theta_max:
            raise ConfigurationError("empty parameter domain")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def to_model(self) -> StatisticalModel:
        return softmax_model(self.c, self.theta_min, self.theta_max)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_model(c, theta_min, theta_max, name: str = "") -> StatisticalModel:
    """StatisticalModel for p(theta) = softmax(theta * c) with analytic
    first and second differentials."""
    c = np.asarray(c, dtype=float)

    def prob(theta):
        return _softmax(theta[0] * c)

    def prob_batch(thetas):
        return _softmax(thetas[:, 0:1] * c[None, :])

    def jac(theta):
        p = prob(theta)
        return (p * (c - p @ c))[:, None]

    def jac_batch(thetas):
        p = prob_batch(thetas)
        mean = p @ c
        return (p * (c[None, :] - mean[:, None]))[:, :, None]

    def second(theta):
        p = prob(theta)
        dev = c - p @ c
        var = p @ (dev * dev)
        return (p * (dev * dev - var))[:, None, None]

    return StatisticalModel(
        dim=1,
        theta_min=np.array([theta_min], dtype=float),
        theta_max=np.array([theta_max], dtype=float),
        map=prob,
        jacobian_fn=jac,
        second_diff_fn=second,
        map_batch=prob_batch,
        jacobian_batch=jac_batch,
        name=name or f"softmax(c={np.round(c, 6).tolist()})",
        softmax_stat=c,
    )


def family_from_angle(phi: float, theta_min: float = -1.0,
                      theta_max: float = 1.0) -> ExponentialFamily1D:
    """Family whose statistic is cos(phi) u + sin(phi) v on the half circle.

    Families repeat with period pi up to model identity, so phi must lie in
    [0, pi).
    """
    if not 0.0 <= phi < math.pi:
        raise DomainError(f"angle {phi!r} outside [0, pi)")
    c = math.cos(phi) * U_BASIS + math.sin(phi) * V_BASIS
    return ExponentialFamily1D(c=c, theta_min=theta_min, theta_max=theta_max)


def evaluate(family: ExponentialFamily1D, theta: float) -> Distribution:
    """Evaluate the family at a parameter value inside its domain."""
    if not family.theta_min <= theta <= family.theta_max:
        raise DomainError(
            f"theta={theta!r} outside [{family.theta_min}, {family.theta_max}]"
        )
    return Distribution(_softmax(theta * family.c))


def k3_graph(omega: tuple[float, float, float]) -> Graph:
    """Triangle graph from a weight triple (w12, w23, w13); zero-weight edges
    are absent (the remaining graph must stay connected)."""
    w12, w23, w13 = (float(x) for x in omega)
    return Graph(3, [(0, 1), (1, 2), (0, 2)], [w12, w23, w13])


def sweep_angles(count: int = 30) -> np.ndarray:
    """Evenly spaced family angles k*pi/count, k = 0..count-1."""
    return np.arange(count) * math.pi / count


def sweep_grid(phis: int = 30, omegas=None, theta_domain=(-1.0, 1.0)
               ) -> list[tuple[ExponentialFamily1D, Graph]]:
    """Cross the families with the ground metrics: phis * len(omegas) configs,
    ordered family-major within each metric (metric-major overall)."""
    omegas = DEFAULT_OMEGAS if omegas is None else tuple(tuple(o) for o in omegas)
    lo, hi = float(theta_domain[0]), float(theta_domain[1])
    families = [family_from_angle(phi, lo, hi) for phi in sweep_angles(phis)]
    return [(fam, k3_graph(om)) for om in omegas for fam in families]
