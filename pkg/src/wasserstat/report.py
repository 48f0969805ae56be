"""CSV tables and self-contained SVG figures for sweep results.

SVG is written directly (no imaging dependency): output is deterministic,
valid XML, diffable in tests.  Simplex panels draw each family as its curve
in barycentric coordinates, colored blue (low) to yellow (high) by the
reported value; comparison panels plot kappa (red) against K (blue) per
ground metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

KAPPA_K_SLACK = 1e-6

# Barycentric triangle: p -> p1*A + p2*B + p3*C.
TRI_A = (0.0, 0.0)
TRI_B = (1.0, 0.0)
TRI_C = (0.5, math.sqrt(3.0) / 2.0)


@dataclass
class SweepRow:
    """One sweep configuration's results."""

    family_index: int
    phi: float
    omega: tuple[float, float, float]
    kappa: float
    K: float
    theta_domain: tuple[float, float]
    runtime_ms: float
    flag: str = ""


SWEEP_HEADER = ("family_index,phi,omega_12,omega_23,omega_13,kappa,K,"
                "theta_min,theta_max,runtime_ms,flag")


def write_sweep_csv(rows, path) -> None:
    """Stable column order, repr-exact floats, newline-terminated.

    Rows violating kappa <= K + 1e-6 are written with a kappa_exceeds_K flag
    appended, never dropped.
    """
    rows = list(rows)
    if not rows:
        raise ConfigurationError("no sweep rows to write")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(SWEEP_HEADER + "\n")
        for row in rows:
            flag = row.flag
            if not (row.kappa <= row.K + KAPPA_K_SLACK) and "error" not in flag:
                flag = (flag + ";" if flag else "") + "kappa_exceeds_K"
            cells = [str(row.family_index), repr(float(row.phi))]
            cells += [repr(float(x)) for x in row.omega]
            cells += [repr(float(row.kappa)), repr(float(row.K))]
            cells += [repr(float(x)) for x in row.theta_domain]
            cells += [repr(float(row.runtime_ms)), flag]
            fh.write(",".join(cells) + "\n")


def read_sweep_csv(path) -> list[SweepRow]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != SWEEP_HEADER:
            raise ConfigurationError(f"unexpected sweep CSV header: {header!r}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            rows.append(SweepRow(
                family_index=int(parts[0]),
                phi=float(parts[1]),
                omega=(float(parts[2]), float(parts[3]), float(parts[4])),
                kappa=float(parts[5]),
                K=float(parts[6]),
                theta_domain=(float(parts[7]), float(parts[8])),
                runtime_ms=float(parts[9]),
                flag=parts[10],
            ))
    return rows


# ---------------------------------------------------------------------------
# SVG primitives


def _fmt(x) -> str:
    return format(float(x), ".6g")


def _svg_document(width, height, body) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}"'
        f' height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">\n'
        '<rect width="100%" height="100%" fill="white"/>\n'
        + "\n".join(body) + "\n</svg>\n"
    )


def _polyline(points, color, width=1.2) -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
    return (f'<polyline points="{pts}" fill="none" stroke="{color}"'
            f' stroke-width="{_fmt(width)}"/>')


def _line(x1, y1, x2, y2, color="#444444", width=1.0) -> str:
    return (f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}"'
            f' y2="{_fmt(y2)}" stroke="{color}" stroke-width="{_fmt(width)}"/>')


def _circle(x, y, r, color) -> str:
    return f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}" fill="{color}"/>'


def _text(x, y, s, size=10, anchor="middle", color="#222222") -> str:
    s = (s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))
    return (f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{_fmt(size)}"'
            f' font-family="sans-serif" text-anchor="{anchor}" fill="{color}">{s}</text>')


def _rect(x, y, w, h, fill) -> str:
    return (f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}"'
            f' height="{_fmt(h)}" fill="{fill}"/>')


def _blue_yellow(u: float) -> str:
    """Linear blue (low) to yellow (high)."""
    u = min(max(float(u), 0.0), 1.0)
    r = int(round(40 + u * (250 - 40)))
    g = int(round(60 + u * (220 - 60)))
    b = int(round(200 + u * (45 - 200)))
    return f"#{r:02x}{g:02x}{b:02x}"


def _group_by_omega(rows):
    groups: dict[tuple, list] = {}
    order = []
    for row in rows:
        key = tuple(round(float(x), 12) for x in row.omega)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    return order, groups


def _omega_label(omega) -> str:
    return "w=(" + ", ".join(_fmt(x) for x in omega) + ")"


# ---------------------------------------------------------------------------
# Figures


def plot_simplex_families(rows, path, value: str = "kappa",
                          samples: int = 101) -> None:
    """One triangle per ground metric; every family drawn as its curve in
    barycentric coordinates, colored by ``value`` ("kappa" or "K") on a
    blue-to-yellow scale with the extrema annotated in a legend."""
    from .expfam import family_from_angle

    rows = list(rows)
    if not rows:
        raise ConfigurationError("no rows to plot")
    if value not in ("kappa", "K"):
        raise ConfigurationError(f"value must be kappa or K, not {value!r}")
    order, groups = _group_by_omega(rows)
    vals = np.array([getattr(r, value) for r in rows], dtype=float)
    finite = vals[np.isfinite(vals)]
    vmin = float(finite.min()) if finite.size else 0.0
    vmax = float(finite.max()) if finite.size else 1.0
    span = vmax - vmin if vmax > vmin else 1.0

    cell, pad, legend_h = 150.0, 18.0, 46.0
    ncols = min(5, len(order))
    nrows_fig = (len(order) + ncols - 1) // ncols
    width = ncols * (cell + pad) + pad
    height = nrows_fig * (cell + pad + 16.0) + pad + legend_h
    body = []
    tri_h = TRI_C[1]
    for gi, key in enumerate(order):
        col, rowpos = gi % ncols, gi // ncols
        x0 = pad + col * (cell + pad)
        y0 = pad + rowpos * (cell + pad + 16.0)
        scale = cell / 1.0

        def to_xy(p, x0=x0, y0=y0, scale=scale):
            bx = p[0] * TRI_A[0] + p[1] * TRI_B[0] + p[2] * TRI_C[0]
            by = p[0] * TRI_A[1] + p[1] * TRI_B[1] + p[2] * TRI_C[1]
            return (x0 + bx * scale, y0 + (tri_h - by) * scale + 10.0)

        corners = [to_xy(v) for v in (np.eye(3))]
        body.append(_polyline(corners + corners[:1], "#888888", 1.0))
        for row in groups[key]:
            fam = family_from_angle(row.phi, row.theta_domain[0],
                                    row.theta_domain[1])
            thetas = np.linspace(row.theta_domain[0], row.theta_domain[1], samples)
            z = thetas[:, None] * fam.c[None, :]
            z -= z.max(axis=1, keepdims=True)
            ps = np.exp(z)
            ps /= ps.sum(axis=1, keepdims=True)
            v = getattr(row, value)
            color = _blue_yellow((v - vmin) / span) if np.isfinite(v) else "#bbbbbb"
            body.append(_polyline([to_xy(p) for p in ps], color))
        body.append(_text(x0 + cell / 2.0, y0 + cell + 12.0, _omega_label(key), 9))
    # legend: discrete gradient bar with min/max annotation
    ly = height - legend_h + 12.0
    bar_w, bar_h, bar_x = 220.0, 12.0, pad
    nseg = 32
    for i in range(nseg):
        body.append(_rect(bar_x + i * bar_w / nseg, ly, bar_w / nseg + 0.5, bar_h,
                          _blue_yellow((i + 0.5) / nseg)))
    body.append(_text(bar_x, ly + bar_h + 12.0, f"min {value} = {_fmt(vmin)}",
                      9, anchor="start"))
    body.append(_text(bar_x + bar_w, ly + bar_h + 12.0,
                      f"max {value} = {_fmt(vmax)}", 9, anchor="end"))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_svg_document(width, height, body))


def _scaled(points, x0, y0, w, h, xlim, ylim):
    (xa, xb), (ya, yb) = xlim, ylim
    sx = w / (xb - xa) if xb > xa else 1.0
    sy = h / (yb - ya) if yb > ya else 1.0
    return [(x0 + (x - xa) * sx, y0 + h - (y - ya) * sy) for x, y in points]


def _series_panel(body, x0, y0, w, h, xlim, ylim, series, title=""):
    """Frame + y-extent labels + a list of (points, color, style) series."""
    body.append(_polyline([(x0, y0), (x0 + w, y0), (x0 + w, y0 + h),
                           (x0, y0 + h), (x0, y0)], "#444444", 1.0))
    body.append(_text(x0 - 3.0, y0 + h, _fmt(ylim[0]), 7, anchor="end"))
    body.append(_text(x0 - 3.0, y0 + 7.0, _fmt(ylim[1]), 7, anchor="end"))
    if title:
        body.append(_text(x0 + w / 2.0, y0 - 4.0, title, 9))
    for pts, color, style in series:
        scaled = _scaled(pts, x0, y0, w, h, xlim, ylim)
        if style == "line":
            body.append(_polyline(scaled, color))
        else:
            for x, y in scaled:
                body.append(_circle(x, y, 1.8, color))


def plot_kappa_vs_k(rows, path) -> None:
    """Per-ground-metric subplot of kappa (red) and K (blue) against the
    family index."""
    rows = list(rows)
    if not rows:
        raise ConfigurationError("no rows to plot")
    order, groups = _group_by_omega(rows)
    cell_w, cell_h, pad = 170.0, 110.0, 34.0
    ncols = min(5, len(order))
    nrows_fig = (len(order) + ncols - 1) // ncols
    width = ncols * (cell_w + pad) + pad
    height = nrows_fig * (cell_h + pad) + pad + 20.0
    body = []
    for gi, key in enumerate(order):
        col, rowpos = gi % ncols, gi // ncols
        x0 = pad + col * (cell_w + pad)
        y0 = pad + rowpos * (cell_h + pad)
        grp = sorted(groups[key], key=lambda r: r.family_index)
        xs = [r.family_index for r in grp]
        kap = [(x, r.kappa) for x, r in zip(xs, grp) if np.isfinite(r.kappa)]
        kk = [(x, r.K) for x, r in zip(xs, grp) if np.isfinite(r.K)]
        ys = [y for _, y in kap + kk]
        if not ys:
            continue
        lo, hi = min(ys), max(ys)
        margin = 0.05 * (hi - lo if hi > lo else 1.0)
        ylim = (lo - margin, hi + margin)
        xlim = (min(xs), max(xs) if max(xs) > min(xs) else min(xs) + 1)
        _series_panel(body, x0, y0, cell_w, cell_h, xlim, ylim,
                      [(kk, "#1f4fd6", "line"), (kap, "#d62728", "line")],
                      title=_omega_label(key))
    body.append(_text(pad, height - 8.0,
                      "red: curvature bound kappa, blue: convergence rate K",
                      9, anchor="start"))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_svg_document(width, height, body))


def plot_pointwise(model, graph, q, theta_grid, path, h: float = 1e-3,
                   T: float = 0.1) -> dict:
    """Per-starting-point convergence rates (markers) against the pointwise
    smallest Hessian eigenvalue (line), full view plus a second row zooming
    the y axis.  One-dimensional models only.  Returns the plotted series."""
    from .curvature import ricci_lower_bound
    from .errors import WasserstatError
    from .flow import convergence_rate

    theta_grid = np.atleast_2d(np.asarray(theta_grid, dtype=float))
    if theta_grid.shape[1] != 1:
        raise ConfigurationError("pointwise plot requires a 1-d model")
    report = ricci_lower_bound(model, graph, q, grid=theta_grid)
    rates = np.full(theta_grid.shape[0], np.nan)
    for i, th in enumerate(theta_grid):
        try:
            rates[i] = convergence_rate(model, graph, q, [th], h, T).K
        except WasserstatError:
            pass
    xs = theta_grid[:, 0]
    lam_pts = [(x, y) for x, y in zip(xs, report.lambdas) if np.isfinite(y)]
    rate_pts = [(x, y) for x, y in zip(xs, rates) if np.isfinite(y)]
    all_y = [y for _, y in lam_pts + rate_pts] or [0.0, 1.0]
    lo, hi = min(all_y), max(all_y)
    span = hi - lo if hi > lo else 1.0
    full = (lo - 0.05 * span, hi + 0.05 * span)
    lam_y = [y for _, y in lam_pts] or [lo, hi]
    llo, lhi = min(lam_y), max(lam_y)
    lspan = lhi - llo if lhi > llo else span
    zoom = (llo - 0.02 * lspan, lhi + 0.02 * lspan)

    pad, cell_w, cell_h = 44.0, 420.0, 150.0
    width = cell_w + 2 * pad
    height = 2 * (cell_h + pad) + pad
    xlim = (xs.min(), xs.max() if xs.max() > xs.min() else xs.min() + 1.0)
    body = []
    _series_panel(body, pad, pad, cell_w, cell_h, xlim, full,
                  [(lam_pts, "#d62728", "line"), (rate_pts, "#1f4fd6", "dots")],
                  title="rates (blue dots) vs smallest eigenvalue (red)")
    _series_panel(body, pad, 2 * pad + cell_h, cell_w, cell_h, xlim, zoom,
                  [(lam_pts, "#d62728", "line"), (rate_pts, "#1f4fd6", "dots")],
                  title="zoomed y axis")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_svg_document(width, height, body))
    return {"theta": xs, "lambda": report.lambdas, "rate": rates,
            "full_ylim": full, "zoom_ylim": zoom}
