"""Weighted ground-metric graph and the probability-dependent Laplacian.

The sample space is a finite set of states carrying a connected, undirected,
positively weighted graph.  For an interior probability vector ``p`` the graph
induces the weighted Laplacian

    L(p) = D^T Lambda(p) D,

where ``D`` is the signed incidence (discrete gradient) matrix scaled by
``sqrt(weight)`` per edge and ``Lambda(p)`` averages the density across each
edge's endpoints against the normalized volume form.  ``L(p)`` is symmetric
positive semidefinite with kernel spanned by the constant vector; its
pseudo-inverse is the metric tensor of the discrete transport geometry on the
simplex interior.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalDegeneracyError

# Reject probability vectors with entries below this as non-interior.
INTERIOR_TOL = 1e-12

# Kernel-separation guard for the pseudo-inverse: the second-smallest
# eigenvalue of L(p) must exceed this.
PINV_EIG_TOL = 1e-12

# Above this node count the pseudo-inverse falls back to a spectral
# decomposition instead of the rank-one-corrected direct solve.
PINV_DIRECT_MAX_N = 64


@dataclass(frozen=True)
class Graph:
    """Connected undirected graph with strictly positive edge weights.

    Edges are stored once per unordered pair, normalized to ``i > j`` (which
    fixes the sign convention of the incidence matrix).  Pairs supplied with
    weight zero are treated as absent and dropped.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    weights: np.ndarray

    def __init__(self, n, edges, weights):
        if n < 2:
            raise ConfigurationError(f"graph needs at least 2 nodes, got n={n}")
        if len(edges) != len(weights):
            raise ConfigurationError(
                f"{len(edges)} edges but {len(weights)} weights"
            )
        cleaned = {}
        for (i, j), w in zip(edges, weights):
            i, j = int(i), int(j)
            w = float(w)
            if i == j:
                raise ConfigurationError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ConfigurationError(f"edge ({i},{j}) out of range for n={n}")
            if w < 0.0:
                raise ConfigurationError(f"negative weight {w} on edge ({i},{j})")
            if w == 0.0:
                continue  # absent edge
            key = (max(i, j), min(i, j))
            if key in cleaned:
                raise ConfigurationError(f"duplicate edge {key}")
            cleaned[key] = w
        pairs = tuple(sorted(cleaned))
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", pairs)
        object.__setattr__(
            self, "weights", np.array([cleaned[e] for e in pairs], dtype=float)
        )
        self.weights.setflags(write=False)
        if not self._connected():
            raise ConfigurationError("graph is not connected")

    def _connected(self) -> bool:
        adj = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        seen = {0}
        stack = [0]
        while stack:
            for k in adj[stack.pop()]:
                if k not in seen:
                    seen.add(k)
                    stack.append(k)
        return len(seen) == self.n

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Endpoint index arrays (high, low) in storage order."""
        if self.n_edges == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        e = np.asarray(self.edges, dtype=np.int64)
        return e[:, 0], e[:, 1]

    def to_json(self) -> str:
        """Serialize as ``{"n": n, "edges": [[i, j, omega], ...]}``, 1-based."""
        return json.dumps(
            {
                "n": self.n,
                "edges": [
                    [i + 1, j + 1, w]
                    for (i, j), w in zip(self.edges, self.weights.tolist())
                ],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"invalid graph JSON: {exc}") from exc
        return cls.from_dict(obj)

    @classmethod
    def from_dict(cls, obj: dict) -> "Graph":
        try:
            n = int(obj["n"])
            rows = obj["edges"]
            edges = [(int(r[0]) - 1, int(r[1]) - 1) for r in rows]
            weights = [float(r[2]) for r in rows]
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ConfigurationError(f"malformed graph specification: {exc}") from exc
        return cls(n, edges, weights)


@dataclass(frozen=True)
class Distribution:
    """Strictly positive probability vector (interior of the simplex)."""

    p: np.ndarray = field(repr=False)

    def __init__(self, p):
        p = np.asarray(p, dtype=float).copy()
        if p.ndim != 1:
            raise ConfigurationError("probability vector must be 1-d")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ConfigurationError(f"probabilities sum to {p.sum()!r}, not 1")
        if p.min() < INTERIOR_TOL:
            raise ConfigurationError(
                f"probability {p.min():.3e} below interior tolerance {INTERIOR_TOL}"
            )
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @classmethod
    def uniform(cls, n: int) -> "Distribution":
        return cls(np.full(n, 1.0 / n))


def as_probability(p) -> np.ndarray:
    """Accept a Distribution or a raw array; return the validated vector."""
    if isinstance(p, Distribution):
        return p.p
    return Distribution(p).p


def volume_form(graph: Graph) -> np.ndarray:
    """Normalized volume form: node weight-degree over twice the total weight."""
    d = np.zeros(graph.n)
    hi, lo = graph.edge_arrays()
    np.add.at(d, hi, graph.weights)
    np.add.at(d, lo, graph.weights)
    return d / d.sum()


def incidence_matrix(graph: Graph) -> np.ndarray:
    """Discrete gradient: one row per edge (i, j) with i > j, entries
    +sqrt(w) at i and -sqrt(w) at j."""
    out = np.zeros((graph.n_edges, graph.n))
    hi, lo = graph.edge_arrays()
    root = np.sqrt(graph.weights)
    out[np.arange(graph.n_edges), hi] = root
    out[np.arange(graph.n_edges), lo] = -root
    return out


def mobility_vector(graph: Graph, p) -> np.ndarray:
    """Diagonal of the edge mobility matrix: the arithmetic mean of the
    volume-normalized density at the edge endpoints."""
    p = as_probability(p)
    d = volume_form(graph)
    hi, lo = graph.edge_arrays()
    return 0.5 * (p[hi] / d[hi] + p[lo] / d[lo])


def mobility_matrix(graph: Graph, p) -> np.ndarray:
    """Edge mobility as a diagonal |E| x |E| matrix."""
    return np.diag(mobility_vector(graph, p))


def laplacian(graph: Graph, p) -> np.ndarray:
    """Probability-dependent weighted Laplacian L(p).

    Symmetric PSD, annihilates constants; linear in p because the mobility is.
    """
    inc = incidence_matrix(graph)
    mob = mobility_vector(graph, p)
    return inc.T @ (mob[:, None] * inc)


def laplacian_pinv(graph: Graph, p) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of L(p).

    For modest n this exploits that the kernel is exactly the constants:
    with P the orthogonal projector onto constants, (L + P)^-1 - P inverts L
    on the sum-zero complement and vanishes on the kernel.  Larger problems
    use a spectral decomposition instead.

    Raises NumericalDegeneracyError when L(p) is nearly singular beyond the
    constant kernel (second-smallest eigenvalue below 1e-12).
    """
    L = laplacian(graph, p)
    n = graph.n
    eigs = np.linalg.eigvalsh(L)
    if eigs[1] < PINV_EIG_TOL:
        raise NumericalDegeneracyError(
            f"Laplacian second eigenvalue {eigs[1]:.3e} below {PINV_EIG_TOL};"
            " kernel is not numerically one-dimensional"
        )
    if n <= PINV_DIRECT_MAX_N:
        P = np.full((n, n), 1.0 / n)
        pinv = np.linalg.solve(L + P, np.eye(n)) - P
    else:
        w, V = np.linalg.eigh(L)
        inv = np.zeros_like(w)
        inv[1:] = 1.0 / w[1:]
        pinv = (V * inv) @ V.T
    return 0.5 * (pinv + pinv.T)
