"""Weighted undirected graphs, their Laplacians and connected components."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ValidationError

DEFAULT_ALPHA = 0.01
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class Graph:
    """Undirected graph stored as a dense symmetric weight matrix.

    Parameters
    ----------
    weights : (N, N) ndarray
        Non-negative, symmetric, zero diagonal.
    node_labels : list of str, optional
        Region names, one per node.
    """

    weights: np.ndarray
    node_labels: list[str] | None = field(default=None)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        _check_weights(w)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.node_labels is not None and len(self.node_labels) != w.shape[0]:
            raise ValidationError(
                f"{len(self.node_labels)} node labels for {w.shape[0]} nodes")

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def edges(self) -> list[tuple[int, int, float]]:
        """Upper-triangle edge list ``(i, j, w)`` with ``i < j``."""
        i, j = np.nonzero(np.triu(self.weights, k=1))
        return [(int(a), int(b), float(self.weights[a, b])) for a, b in zip(i, j)]


@dataclass(frozen=True)
class Laplacian:
    """``L + alpha * I`` for a combinatorial Laplacian ``L``."""

    matrix: np.ndarray
    alpha: float = 0.0

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.alpha < 0:
            raise ValidationError(f"alpha must be non-negative, got {self.alpha}")

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]


def _check_weights(w):
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValidationError(f"adjacency must be square, got shape {w.shape}")
    if w.shape[0] < 1:
        raise ValidationError("graph needs at least one node")
    if not np.all(np.isfinite(w)):
        raise ValidationError("adjacency contains non-finite values")
    if np.any(w < 0):
        i, j = np.argwhere(w < 0)[0]
        raise ValidationError(f"negative weight {w[i, j]} at ({i}, {j})")
    if np.any(np.diag(w) != 0):
        i = int(np.flatnonzero(np.diag(w))[0])
        raise ValidationError(f"self-loop with weight {w[i, i]} at node {i}")
    asym = np.abs(w - w.T)
    if asym.max() > SYMMETRY_TOL:
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        raise ValidationError(
            f"adjacency not symmetric: W[{i},{j}]={w[i, j]} but W[{j},{i}]={w[j, i]}")


def build_graph(source, n_nodes=None, node_labels=None) -> Graph:
    """Build a :class:`Graph` from a dense matrix or an edge list.

    ``source`` is an (N, N) weight matrix, or, when ``n_nodes`` is given (or
    the array is not square), a sequence of ``(i, j, weight)`` triples.
    Edge lists are symmetrized; a repeated edge keeps the last weight.
    """
    arr = np.asarray(source, dtype=np.float64)
    if n_nodes is None and arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        w = arr.copy()
        if w.size and np.abs(w - w.T).max() <= SYMMETRY_TOL:
            w = 0.5 * (w + w.T)
        return Graph(w, node_labels)

    edges = arr.reshape(-1, 3)
    if n_nodes is None:
        n_nodes = int(edges[:, :2].max()) + 1 if len(edges) else 0
    w = np.zeros((n_nodes, n_nodes))
    for i, j, wt in edges:
        if i != int(i) or j != int(j):
            raise ValidationError(f"non-integer node index in edge ({i}, {j})")
        i, j = int(i), int(j)
        if not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise ValidationError(f"edge ({i}, {j}) out of range for {n_nodes} nodes")
        if wt < 0:
            raise ValidationError(f"negative weight {wt} on edge ({i}, {j})")
        if i == j and wt != 0:
            raise ValidationError(f"self-loop with weight {wt} at node {i}")
        w[i, j] = w[j, i] = wt
    return Graph(w, node_labels)


def combinatorial_laplacian(g: Graph) -> Laplacian:
    """``D - W`` with ``D`` the diagonal degree matrix."""
    return Laplacian(np.diag(g.degrees) - g.weights, 0.0)


def regularized_laplacian(lap: Laplacian, alpha: float = DEFAULT_ALPHA) -> Laplacian:
    """``L + alpha * I``; positive definite for ``alpha > 0``."""
    if lap.alpha != 0:
        raise ValidationError("expected an unregularized Laplacian (alpha = 0)")
    if not alpha > 0:
        raise ValidationError(f"alpha must be positive, got {alpha}")
    return Laplacian(lap.matrix + alpha * np.eye(lap.n_nodes), float(alpha))


def laplacian(g: Graph, alpha: float = 0.0) -> Laplacian:
    lap = combinatorial_laplacian(g)
    return regularized_laplacian(lap, alpha) if alpha > 0 else lap


def smoothness_penalty(a, lap: Laplacian) -> float:
    """Quadratic form ``a L a^T``.

    Equals ``1/2 sum_i sum_{j~i} w_ij (a_i - a_j)^2 + alpha * sum_i a_i^2``.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (lap.n_nodes,):
        raise ValidationError(f"vector of shape {a.shape} for {lap.n_nodes} nodes")
    return float(max(a @ lap.matrix @ a, 0.0))


def connected_components(g: Graph) -> list[list[int]]:
    """Node partition induced by edges with ``W_ij > 0``.

    Components are ordered by their smallest node; members ascending.
    """
    labels = kernels.threshold_components(
        np.ascontiguousarray(g.weights), 0.0, True)
    return _groups(labels)


def _groups(labels) -> list[list[int]]:
    labels = np.asarray(labels)
    if labels.size == 0:
        return []
    order = np.argsort(labels, kind="stable")
    splits = np.flatnonzero(np.diff(labels[order])) + 1
    return [part.tolist() for part in np.split(order, splits)]


def is_connected_subset(g: Graph, nodes) -> bool:
    """Whether ``nodes`` induce a connected subgraph of ``g``."""
    nodes = np.asarray(sorted(set(int(i) for i in nodes)))
    if nodes.size == 0:
        return False
    sub = np.ascontiguousarray(g.weights[np.ix_(nodes, nodes)])
    return int(kernels.threshold_components(sub, 0.0, True).max()) == 0
