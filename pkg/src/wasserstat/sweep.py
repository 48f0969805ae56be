"""Batch evaluation of (family, ground metric) configurations.

For every configuration the runner computes the curvature lower bound kappa
on a parameter grid and the uniform convergence rate K from a grid of
initial conditions, timing each; rows violating kappa <= K are flagged, not
dropped.  Configurations are independent, so the sweep parallelizes over
processes.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .curvature import ricci_lower_bound
from .errors import WasserstatError
from .expfam import DEFAULT_OMEGAS, family_from_angle, k3_graph, sweep_angles
from .flow import convergence_rate, initial_grid
from .ground_metric import Distribution
from .report import SweepRow


@dataclass
class SweepParams:
    phis: int = 30
    omegas: tuple = DEFAULT_OMEGAS
    theta_domain: tuple[float, float] = (-1.0, 1.0)
    q: object = "uniform"  # "uniform" or an explicit probability vector
    h: float = 1e-3
    T: float = 0.1
    initials_per_dim: int = 10
    grid_points: int = 41

    def resolve_q(self, n: int) -> np.ndarray:
        if isinstance(self.q, str):
            if self.q != "uniform":
                raise WasserstatError(f"unknown reference measure {self.q!r}")
            return np.full(n, 1.0 / n)
        return Distribution(np.asarray(self.q, dtype=float)).p

    def configs(self) -> list[tuple[int, float, tuple[float, float, float]]]:
        """(family_index, phi, omega) entries, metric-major like the plots."""
        angles = sweep_angles(self.phis)
        return [(fi, float(angles[fi]), tuple(om))
                for om in self.omegas for fi in range(self.phis)]


def evaluate_config(params: SweepParams, family_index: int, phi: float,
                    omega) -> SweepRow:
    """kappa and K for one (family, ground metric) pair."""
    start = time.perf_counter()
    flag = ""
    kappa = np.nan
    K = np.nan
    try:
        lo, hi = params.theta_domain
        family = family_from_angle(phi, lo, hi)
        graph = k3_graph(omega)
        model = family.to_model()
        q = params.resolve_q(family.n)
        report = ricci_lower_bound(model, graph, q,
                                   points_per_dim=params.grid_points)
        kappa = report.kappa
        rate = convergence_rate(model, graph, q,
                                initial_grid(model, params.initials_per_dim),
                                params.h, params.T)
        K = rate.K
    except WasserstatError as exc:
        flag = f"error:{exc}"
    runtime_ms = (time.perf_counter() - start) * 1e3
    return SweepRow(
        family_index=family_index,
        phi=phi,
        omega=tuple(float(x) for x in omega),
        kappa=float(kappa),
        K=float(K),
        theta_domain=(float(params.theta_domain[0]), float(params.theta_domain[1])),
        runtime_ms=runtime_ms,
        flag=flag,
    )


_WORKER_PARAMS: dict = {}


def _worker_init(params: SweepParams):
    _WORKER_PARAMS["params"] = params


def _worker(job):
    family_index, phi, omega = job
    return evaluate_config(_WORKER_PARAMS["params"], family_index, phi, omega)


def run_sweep(params: SweepParams = None, workers: int = 1) -> list[SweepRow]:
    """Evaluate every configuration; row order is metric-major and
    deterministic regardless of worker count."""
    params = SweepParams() if params is None else params
    jobs = params.configs()
    if workers <= 1:
        return [evaluate_config(params, *job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init,
                             initargs=(params,)) as pool:
        return list(pool.map(_worker, jobs, chunksize=8))
