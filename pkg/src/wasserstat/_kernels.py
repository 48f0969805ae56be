"""Compiled hot loops for one-parameter softmax families on small graphs.

The sweep workloads (Euler trajectories of the parameter-space Fokker-Planck
flow, curvature grids, geodesic boundary-value solves) spend essentially all
their time in tiny dense linear algebra repeated hundreds of thousands of
times.  The kernels below are written in nopython-compatible numpy and jitted
with numba; setting the environment variable ``WASSERSTAT_DISABLE_NUMBA=1``
(or leaving numba uninstalled) runs the identical code paths interpreted,
which is the reference behavior the compiled versions are benchmarked and
tested against.

All kernels take primitive arrays only:

    c          sufficient statistic of the softmax family (n,)
    q          reference distribution (n,)
    hi, lo     edge endpoint indices, one entry per edge, hi > lo
    w          positive edge weights (E,)
    dvol       normalized volume form (n,)

and parameter values are scalars (the families are one-dimensional).
"""

from __future__ import annotations

import os

import numpy as np

DISABLE_ENV = "WASSERSTAT_DISABLE_NUMBA"


def _want_numba() -> bool:
    flag = os.environ.get(DISABLE_ENV, "").strip().lower()
    if flag not in ("", "0", "false", "no"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _want_numba()

if NUMBA_ENABLED:
    from numba import njit
else:
    def njit(*args, **kwargs):  # identity decorator: interpreted fallback
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco


# Fraction of the macro step below which a flow substep counts as stalled.
H_MIN_FRAC = 2.0 ** -16

# Interior floor mirrored from ground_metric.INTERIOR_TOL (kernels cannot
# import it without dragging the package into nopython mode).
P_FLOOR = 1e-12


@njit(cache=True)
def softmax_1d(theta, c):
    z = theta * c
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


@njit(cache=True)
def solve_dense(A, b):
    """Gaussian elimination with partial pivoting on copies of A, b.

    LAPACK via np.linalg.solve costs ~1us of call overhead per 3x3 system,
    which dominates these kernels; elimination in-line is ~20x cheaper at
    the n <= 8 sizes used here.
    """
    n = A.shape[0]
    M = A.copy()
    x = b.copy()
    for col in range(n - 1):
        piv = col
        big = abs(M[col, col])
        for r in range(col + 1, n):
            if abs(M[r, col]) > big:
                big = abs(M[r, col])
                piv = r
        if piv != col:
            for cc in range(col, n):
                tmp = M[col, cc]
                M[col, cc] = M[piv, cc]
                M[piv, cc] = tmp
            tmp = x[col]
            x[col] = x[piv]
            x[piv] = tmp
        for r in range(col + 1, n):
            f = M[r, col] / M[col, col]
            if f != 0.0:
                for cc in range(col + 1, n):
                    M[r, cc] -= f * M[col, cc]
                x[r] -= f * x[col]
    for r in range(n - 1, -1, -1):
        s = x[r]
        for cc in range(r + 1, n):
            s -= M[r, cc] * x[cc]
        x[r] = s / M[r, r]
    return x


@njit(cache=True)
def gw_of_p(p, J, hi, lo, w, dvol):
    """Scalar transport metric J^T L(p)^+ J for a sum-zero vector J.

    Solves (L(p) + 11^T/n) x = J, exact on the sum-zero complement.
    """
    n = p.shape[0]
    A = np.full((n, n), 1.0 / n)
    for e in range(hi.shape[0]):
        i = hi[e]
        j = lo[e]
        m = w[e] * 0.5 * (p[i] / dvol[i] + p[j] / dvol[j])
        A[i, i] += m
        A[j, j] += m
        A[i, j] -= m
        A[j, i] -= m
    x = solve_dense(A, J)
    return np.dot(J, x)


@njit(cache=True)
def flow_stats(theta, c, q, hi, lo, w, dvol):
    """(G_W, dKL/dtheta, KL, min p) at a parameter value."""
    p = softmax_1d(theta, c)
    m = np.dot(p, c)
    J = p * (c - m)
    logr = np.log(p / q)
    kl = np.dot(p, logr)
    grad = np.dot(J, logr)
    gw = gw_of_p(p, J, hi, lo, w, dvol)
    return gw, grad, kl, p.min()


@njit(cache=True)
def flow_trajectory(theta0, c, q, hi, lo, w, dvol, h, n_steps,
                    tmin, tmax, grad_tol):
    """Explicit Euler integration of theta' = -G_W^{-1} dKL/dtheta.

    Each macro step advances exactly h, subdividing with halved substeps when
    a candidate would exit [tmin, tmax] or the simplex interior.  Returns
    (thetas, kls, last_idx, status) with entries valid up to last_idx and
    status 0 = ran to n_steps, 1 = gradient converged, 2 = boundary stall.
    """
    thetas = np.empty(n_steps + 1)
    kls = np.empty(n_steps + 1)
    theta = theta0
    gw, grad, kl, pmin = flow_stats(theta, c, q, hi, lo, w, dvol)
    thetas[0] = theta
    kls[0] = kl
    status = 0
    last = 0
    h_min = h * H_MIN_FRAC
    for k in range(n_steps):
        if abs(grad) <= grad_tol:
            status = 1
            break
        remaining = h
        stalled = False
        while remaining > 1e-30:
            v = grad / gw
            dt = remaining
            ok = False
            cand = theta
            while dt >= h_min:
                cand = theta - dt * v
                if tmin <= cand <= tmax:
                    pm = softmax_1d(cand, c).min()
                    if pm >= P_FLOOR:
                        ok = True
                        break
                dt *= 0.5
            if not ok:
                stalled = True
                break
            theta = cand
            remaining -= dt
            if remaining > 1e-30:
                gw, grad, kl, pmin = flow_stats(theta, c, q, hi, lo, w, dvol)
        if stalled:
            status = 2
            break
        gw, grad, kl, pmin = flow_stats(theta, c, q, hi, lo, w, dvol)
        thetas[k + 1] = theta
        kls[k + 1] = kl
        last = k + 1
    return thetas, kls, last, status


@njit(cache=True)
def lambda_at(theta, c, q, hi, lo, w, dvol, fd_scale):
    """Smallest (here: only) eigenvalue of G_W^{-1} M at a parameter value,
    where M is the transport Hessian of the KL divergence.

    For one-dimensional families the generalized eigenproblem is the scalar
    ratio M / G_W.  M combines the Fisher information (the variance of c),
    the second differential of the parametrization against log(p/q), and the
    Christoffel correction 0.5 * G_W' / G_W times the KL gradient, with G_W'
    from central differences.
    """
    p = softmax_1d(theta, c)
    m = np.dot(p, c)
    dev = c - m
    J = p * dev
    var = np.dot(p, dev * dev)
    logr = np.log(p / q)
    grad = np.dot(J, logr)
    # second derivative of p: p_i ((c_i - m)^2 - Var_p(c))
    s2 = 0.0
    for i in range(p.shape[0]):
        s2 += p[i] * (dev[i] * dev[i] - var) * logr[i]
    gw0 = gw_of_p(p, J, hi, lo, w, dvol)
    step = fd_scale * max(1.0, abs(theta))
    pp = softmax_1d(theta + step, c)
    mp = np.dot(pp, c)
    Jp = pp * (c - mp)
    gwp = gw_of_p(pp, Jp, hi, lo, w, dvol)
    pm = softmax_1d(theta - step, c)
    mm = np.dot(pm, c)
    Jm = pm * (c - mm)
    gwm = gw_of_p(pm, Jm, hi, lo, w, dvol)
    dgw = (gwp - gwm) / (2.0 * step)
    gamma = 0.5 * dgw / gw0
    M = var + s2 - gamma * grad
    return M / gw0, gw0


@njit(cache=True)
def lambda_grid(thetas, c, q, hi, lo, w, dvol, fd_scale):
    lams = np.empty(thetas.shape[0])
    gws = np.empty(thetas.shape[0])
    for k in range(thetas.shape[0]):
        lams[k], gws[k] = lambda_at(thetas[k], c, q, hi, lo, w, dvol, fd_scale)
    return lams, gws


@njit(cache=True)
def path_energy(nodes, c, hi, lo, w, dvol):
    """Discrete action N * sum_k (dtheta_k)^2 G_W(midpoint_k)."""
    N = nodes.shape[0] - 1
    E = 0.0
    for k in range(N):
        d = nodes[k + 1] - nodes[k]
        mid = 0.5 * (nodes[k + 1] + nodes[k])
        p = softmax_1d(mid, c)
        m = np.dot(p, c)
        J = p * (c - m)
        E += d * d * gw_of_p(p, J, hi, lo, w, dvol)
    return N * E


@njit(cache=True)
def _gw_at_theta(theta, c, hi, lo, w, dvol):
    p = softmax_1d(theta, c)
    m = np.dot(p, c)
    J = p * (c - m)
    return gw_of_p(p, J, hi, lo, w, dvol)


@njit(cache=True)
def path_energy_grad(nodes, c, hi, lo, w, dvol, fd_scale):
    """Energy, interior-node gradient, and per-segment midpoint metrics.

    dE/dx_j collects the two adjacent segments: metric values at their
    midpoints plus the chain-rule term through the midpoint itself, with
    dG_W by central differences.
    """
    N = nodes.shape[0] - 1
    gmid = np.empty(N)
    dgmid = np.empty(N)
    E = 0.0
    for k in range(N):
        d = nodes[k + 1] - nodes[k]
        mid = 0.5 * (nodes[k + 1] + nodes[k])
        g0 = _gw_at_theta(mid, c, hi, lo, w, dvol)
        step = fd_scale * max(1.0, abs(mid))
        gp = _gw_at_theta(mid + step, c, hi, lo, w, dvol)
        gm = _gw_at_theta(mid - step, c, hi, lo, w, dvol)
        gmid[k] = g0
        dgmid[k] = (gp - gm) / (2.0 * step)
        E += d * d * g0
    grad = np.empty(N - 1)
    for j in range(1, N):
        dl = nodes[j] - nodes[j - 1]
        dr = nodes[j + 1] - nodes[j]
        grad[j - 1] = N * (2.0 * dl * gmid[j - 1] - 2.0 * dr * gmid[j]
                           + 0.5 * dl * dl * dgmid[j - 1]
                           + 0.5 * dr * dr * dgmid[j])
    return N * E, grad, gmid


@njit(cache=True)
def _thomas_solve(sub, diag, sup, rhs):
    """Tridiagonal solve; sub[0] and sup[-1] are ignored."""
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = sup[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - sub[i] * cp[i - 1]
        cp[i] = sup[i] / m if i < n - 1 else 0.0
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / m
    x = np.empty(n)
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


@njit(cache=True)
def geodesic_minimize(nodes0, c, hi, lo, w, dvol, fd_scale, grad_tol,
                      max_iter, tmin, tmax):
    """Minimize the discrete action over interior nodes.

    Descent with monotone Armijo backtracking.  The raw gradient direction
    makes the iteration count scale with the O(N^2) condition number of the
    path Hessian, so the search direction is preconditioned with the
    frozen-metric quadratic part of the energy: the weighted path Laplacian
    2N tridiag(-g_{k-1}, g_{k-1}+g_k, -g_k), solved in O(N).  Candidates
    leaving [tmin, tmax] are rejected by the backtracking.

    Returns (nodes, energy, grad_norm, iterations, converged).
    """
    nodes = nodes0.copy()
    N = nodes.shape[0] - 1
    if N < 2:
        E = path_energy(nodes, c, hi, lo, w, dvol)
        return nodes, E, 0.0, 0, 1
    E, g, gmid = path_energy_grad(nodes, c, hi, lo, w, dvol, fd_scale)
    gnorm = np.sqrt(np.dot(g, g))
    it = 0
    converged = 0
    sub = np.empty(N - 1)
    diag = np.empty(N - 1)
    sup = np.empty(N - 1)
    while it < max_iter:
        if gnorm <= grad_tol:
            converged = 1
            break
        for u in range(N - 1):
            diag[u] = 2.0 * N * (gmid[u] + gmid[u + 1])
            sub[u] = -2.0 * N * gmid[u]
            sup[u] = -2.0 * N * gmid[u + 1]
        p = _thomas_solve(sub, diag, sup, g)
        slope = np.dot(g, p)  # > 0 since the preconditioner is SPD
        t = 1.0
        accepted = False
        cand = nodes.copy()
        E_new = E
        for _ in range(60):
            feasible = True
            for j in range(1, N):
                x = nodes[j] - t * p[j - 1]
                if x < tmin or x > tmax:
                    feasible = False
                    break
                cand[j] = x
            if feasible:
                E_new = path_energy(cand, c, hi, lo, w, dvol)
                if E_new <= E - 1e-4 * t * slope:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            break
        nodes = cand.copy()
        E2, g, gmid = path_energy_grad(nodes, c, hi, lo, w, dvol, fd_scale)
        E = E2
        gnorm = np.sqrt(np.dot(g, g))
        it += 1
    if gnorm <= grad_tol:
        converged = 1
    return nodes, E, gnorm, it, converged


@njit(cache=True)
def path_segment_speeds(nodes, c, hi, lo, w, dvol):
    """Per-segment metric speeds sqrt(dtheta^2 G_W(mid)) * N."""
    N = nodes.shape[0] - 1
    speeds = np.empty(N)
    for k in range(N):
        d = nodes[k + 1] - nodes[k]
        mid = 0.5 * (nodes[k + 1] + nodes[k])
        speeds[k] = np.sqrt(d * d * _gw_at_theta(mid, c, hi, lo, w, dvol)) * N
    return speeds
