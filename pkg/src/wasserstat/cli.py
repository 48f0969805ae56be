"""Command-line interface.

Subcommands: curvature | rate | sweep | geodesic | flow | inequalities.
Configuration is JSON (see README for the schema); flags override config
fields, and every command echoes its effective parameters into
``manifest.json`` in the output directory.

Exit codes: 0 success, 2 configuration or usage error, 3 mathematical
inapplicability, 4 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .curvature import default_grid, ricci_lower_bound
from .errors import (
    ConfigurationError,
    DegenerateRateError,
    DomainError,
    InapplicableError,
    NumericalDegeneracyError,
    WasserstatError,
)
from .expfam import DEFAULT_OMEGAS, family_from_angle, softmax_model
from .flow import convergence_rate, fpe_trajectory, initial_grid
from .geodesic import constant_speed_geodesic
from .ground_metric import Distribution, Graph
from .inequalities import (
    default_seeds,
    find_minimizer,
    hwi_check,
    log_sobolev_check,
    talagrand_check,
    write_inequality_csv,
)
from .manifold import simplex_chart_model
from .report import plot_kappa_vs_k, plot_simplex_families, write_sweep_csv
from .sweep import SweepParams, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INAPPLICABLE = 3
EXIT_DEGENERATE = 4


def load_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"malformed JSON in {path}: {exc.msg} at line {exc.lineno}"
            f" column {exc.colno}"
        ) from exc


def build_model(cfg: dict):
    spec = cfg.get("model")
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigurationError('config needs a "model" object with a "type"')
    kind = spec["type"]
    if kind == "expfam1d":
        dom = cfg.get("domain", {})
        lo = float(dom.get("theta_min", [-1.0])[0])
        hi = float(dom.get("theta_max", [1.0])[0])
        if "c" in spec:
            c = np.asarray(spec["c"], dtype=float)
            norm = np.linalg.norm(c)
            if norm == 0.0:
                raise ConfigurationError("sufficient statistic must be nonzero")
            c = c / norm
        elif "phi" in spec:
            c = family_from_angle(float(spec["phi"]), lo, hi).c
        else:
            raise ConfigurationError('expfam1d model needs "c" or "phi"')
        return softmax_model(c, lo, hi)
    if kind == "simplex_chart":
        n = int(spec.get("n", 3))
        model = simplex_chart_model(n)
        dom = cfg.get("domain")
        if dom:
            model.theta_min = np.asarray(dom["theta_min"], dtype=float)
            model.theta_max = np.asarray(dom["theta_max"], dtype=float)
        return model
    raise ConfigurationError(f"unknown model type {kind!r}")


def build_graph(cfg: dict) -> Graph:
    spec = cfg.get("graph")
    if spec is None:
        raise ConfigurationError('config needs a "graph" object')
    return Graph.from_dict(spec)


def build_q(cfg: dict, n: int) -> np.ndarray:
    spec = cfg.get("q", "uniform")
    if isinstance(spec, str):
        if spec != "uniform":
            raise ConfigurationError(f"unknown reference measure {spec!r}")
        return np.full(n, 1.0 / n)
    return Distribution(np.asarray(spec, dtype=float)).p


def write_manifest(out: Path, command: str, config: dict, outputs: list[str]):
    manifest = {
        "command": command,
        "version": __version__,
        "config": config,
        "outputs": outputs,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_curvature(cfg: dict, out: Path, args) -> int:
    model = build_model(cfg)
    graph = build_graph(cfg)
    q = build_q(cfg, graph.n)
    points = int(cfg.get("curvature", {}).get("grid_points", 41))
    report = ricci_lower_bound(model, graph, q, points_per_dim=points)
    csv = out / "curvature.csv"
    report.to_csv(csv)
    write_manifest(out, "curvature", cfg, [csv.name])
    print(f"kappa = {report.kappa!r}")
    return EXIT_OK


def cmd_rate(cfg: dict, out: Path, args) -> int:
    model = build_model(cfg)
    graph = build_graph(cfg)
    q = build_q(cfg, graph.n)
    fcfg = cfg.get("flow", {})
    h = float(fcfg.get("h", 1e-3))
    T = float(fcfg.get("T", 0.1))
    if "initials" in fcfg:
        initials = np.atleast_2d(np.asarray(fcfg["initials"], dtype=float))
    else:
        initials = initial_grid(model, int(fcfg.get("initials_per_dim", 10)))
    if initials.shape[0] == 0:
        raise ConfigurationError("empty initials list")
    rate = convergence_rate(model, graph, q, initials, h, T,
                            keep_trajectories=True)
    outputs = []
    for s, traj in enumerate(rate.trajectories):
        name = f"trajectory_{s:03d}.csv"
        traj.to_csv(out / name)
        outputs.append(name)
    summary = out / "rate.json"
    summary.write_text(json.dumps({
        "K": rate.K,
        "argmin_initial": rate.argmin_initial.tolist(),
        "ratios": [None if np.isnan(r) else r for r in rate.ratios.tolist()],
        "skipped": rate.skipped,
        "h": h,
        "T": T,
    }, indent=2) + "\n", encoding="utf-8")
    outputs.append(summary.name)
    write_manifest(out, "rate", cfg, outputs)
    print(f"K = {rate.K!r} (argmin initial {rate.argmin_initial.tolist()})")
    return EXIT_OK


def cmd_sweep(cfg: dict, out: Path, args) -> int:
    scfg = cfg.get("sweep", {})
    params = SweepParams(
        phis=int(scfg.get("phis", 30)),
        omegas=tuple(tuple(o) for o in scfg.get("omegas", DEFAULT_OMEGAS)),
        theta_domain=tuple(scfg.get("theta_domain", (-1.0, 1.0))),
        q=scfg.get("q", "uniform"),
        h=float(scfg.get("h", 1e-3)),
        T=float(scfg.get("T", 0.1)),
        initials_per_dim=int(scfg.get("initials", 10)),
        grid_points=int(scfg.get("grid_points", 41)),
    )
    jobs = params.configs()
    if args.dry_run:
        for fi, phi, om in jobs:
            print(f"family {fi:2d} phi={phi:.6f} omega={om}")
        print(f"{len(jobs)} configurations planned")
        return EXIT_OK
    rows = run_sweep(params, workers=args.workers)
    csv = out / "sweep.csv"
    write_sweep_csv(rows, csv)
    outputs = [csv.name]
    for value in ("kappa", "K"):
        name = f"simplex_{value}.svg"
        plot_simplex_families(rows, out / name, value=value)
        outputs.append(name)
    plot_kappa_vs_k(rows, out / "kappa_vs_K.svg")
    outputs.append("kappa_vs_K.svg")
    write_manifest(out, "sweep", cfg, outputs)
    failed = sum(1 for r in rows if r.flag.startswith("error"))
    print(f"{len(rows)} configurations, {failed} failed; results in {csv}")
    if failed > 0.05 * len(rows):
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_geodesic(cfg: dict, out: Path, args) -> int:
    model = build_model(cfg)
    graph = build_graph(cfg)
    gcfg = cfg.get("geodesic", {})
    if "theta0" not in gcfg or "theta1" not in gcfg:
        raise ConfigurationError('geodesic command needs geodesic.theta0/theta1')
    theta0 = np.asarray(gcfg["theta0"], dtype=float)
    theta1 = np.asarray(gcfg["theta1"], dtype=float)
    N = int(gcfg.get("N", 64))
    path = constant_speed_geodesic(model, graph, theta0, theta1, N=N)
    csv = out / "geodesic.csv"
    path.to_csv(csv)
    write_manifest(out, "geodesic", cfg, [csv.name])
    print(f"distance = {path.distance!r} (converged={path.converged})")
    return EXIT_OK


def cmd_flow(cfg: dict, out: Path, args) -> int:
    model = build_model(cfg)
    graph = build_graph(cfg)
    q = build_q(cfg, graph.n)
    fcfg = cfg.get("flow", {})
    if "theta0" not in fcfg:
        raise ConfigurationError("flow command needs flow.theta0")
    theta0 = np.asarray(fcfg["theta0"], dtype=float)
    h = float(fcfg.get("h", 1e-3))
    t_end = float(fcfg.get("t_end", 1.0))
    traj = fpe_trajectory(model, graph, theta0, q, h, t_end)
    csv = out / "trajectory.csv"
    traj.to_csv(csv)
    write_manifest(out, "flow", cfg, [csv.name])
    print(f"terminal = {traj.terminal}, final KL = {traj.kls[-1]!r}")
    return EXIT_OK


def cmd_inequalities(cfg: dict, out: Path, args) -> int:
    model = build_model(cfg)
    graph = build_graph(cfg)
    q = build_q(cfg, graph.n)
    icfg = cfg.get("inequalities", {})
    kinds = icfg.get("kinds", ["log-sobolev", "talagrand", "hwi"])
    kappa = icfg.get("kappa")
    if kappa is None:
        kappa = ricci_lower_bound(
            model, graph, q,
            points_per_dim=int(icfg.get("grid_points", 41))).kappa
    kappa = float(kappa)
    seeds = icfg.get("seeds")
    theta_star = find_minimizer(
        model, graph, q,
        seeds=None if seeds is None else np.asarray(seeds, dtype=float),
        kappa=kappa if kappa > 0 else None)
    grid = default_grid(model, int(icfg.get("grid_points", 41)))
    results = []
    for kind in kinds:
        for theta in grid:
            if kind == "log-sobolev":
                results.append(log_sobolev_check(model, graph, theta, q,
                                                 kappa, theta_star))
            elif kind == "talagrand":
                results.append(talagrand_check(model, graph, theta, q,
                                               kappa, theta_star))
            elif kind == "hwi":
                results.append(hwi_check(model, graph, theta, q, kappa,
                                         theta_star))
            else:
                raise ConfigurationError(f"unknown inequality kind {kind!r}")
    csv = out / "inequalities.csv"
    write_inequality_csv(results, csv)
    write_manifest(out, "inequalities", cfg, [csv.name])
    n_fail = sum(1 for r in results if not r.passed)
    print(f"kappa = {kappa!r}, theta* = {theta_star.tolist()}, "
          f"{len(results)} checks, {n_fail} failed")
    return EXIT_OK


COMMANDS = {
    "curvature": cmd_curvature,
    "rate": cmd_rate,
    "sweep": cmd_sweep,
    "geodesic": cmd_geodesic,
    "flow": cmd_flow,
    "inequalities": cmd_inequalities,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wasserstat",
        description="Transport geometry of discrete statistical models: "
                    "curvature bounds, convergence rates, geodesics, flows.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--workers", type=int, default=1,
                       help="parallel workers (sweep only)")
        p.add_argument("--dry-run", action="store_true",
                       help="list planned configurations without computing")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InapplicableError, DegenerateRateError) as exc:
        # a rate query from equilibrium is mathematically undefined, not a
        # numerical failure, so it shares the inapplicability exit code
        print(f"inapplicable: {exc}", file=sys.stderr)
        return EXIT_INAPPLICABLE
    except NumericalDegeneracyError as exc:
        print(f"degenerate: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except WasserstatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
