"""Ground-truth instances: backbone graph, folded-normal loadings, Laplace sources.

Two samplers live here. :func:`generate_instance` builds the benchmark
instance (K connected blocks patched together through shared nodes), and
:func:`sample_plate_model` forward-samples the full hierarchical model with
scales, Dirichlet mask and inverse-gamma noise on an arbitrary graph.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from .errors import NotPositiveDefiniteError, ValidationError
from .graph import DEFAULT_ALPHA, Graph, laplacian
from .model import standardize

LAPLACE_SCALE = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class SyntheticConfig:
    n_components: int = 5
    nodes_per_component: int = 10
    n_shared_nodes: int = 1
    t_samples: int = 1000
    noise_sigma: float = 0.01
    weight_low: float = 0.3
    weight_high: float = 0.4
    edge_prob: float = 0.3
    alpha: float = DEFAULT_ALPHA
    seed: int = 0

    def __post_init__(self):
        if self.n_components < 1 or self.nodes_per_component < 1 or self.t_samples < 2:
            raise ValidationError("n_components, nodes_per_component must be >= 1, t_samples >= 2")
        if not 0 < self.weight_low <= self.weight_high < 1:
            raise ValidationError(
                f"need 0 < weight_low <= weight_high < 1, got {self.weight_low}, {self.weight_high}")
        if not 0 <= self.n_shared_nodes < self.nodes_per_component:
            raise ValidationError("need 0 <= n_shared_nodes < nodes_per_component")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be non-negative")
        if not 0 <= self.edge_prob <= 1:
            raise ValidationError("edge_prob must lie in [0, 1]")
        if self.alpha <= 0:
            raise ValidationError("alpha must be positive")

    @property
    def n_nodes(self) -> int:
        step = self.nodes_per_component - self.n_shared_nodes
        return step * (self.n_components - 1) + self.nodes_per_component

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SyntheticInstance:
    """A generated problem with its ground truth.

    ``true_components`` are the sampled loadings in the units of the raw
    mixture ``S A + eps``; ``scaled_components`` are the same loadings
    divided by each raw column's standard deviation, i.e. the exact loadings
    of the standardized observations.
    """

    graph: Graph
    true_components: np.ndarray
    sources: np.ndarray
    observations: np.ndarray
    component_supports: list[list[int]]
    scaled_components: np.ndarray
    noise_sigma: float
    lambdas: np.ndarray | None = field(default=None)
    mask: np.ndarray | None = field(default=None)
    base_components: np.ndarray | None = field(default=None)


def _random_connected(m, edge_prob, rng):
    """Random spanning tree plus Erdos-Renyi extra edges; returns 0/1 adjacency."""
    adj = np.zeros((m, m), dtype=bool)
    order = rng.permutation(m)
    for pos in range(1, m):
        parent = order[rng.integers(0, pos)]
        adj[order[pos], parent] = adj[parent, order[pos]] = True
    extra = np.triu(rng.random((m, m)) < edge_prob, k=1)
    return adj | extra | extra.T


def generate_backbone(cfg: SyntheticConfig, rng) -> tuple[Graph, list[list[int]]]:
    """K random connected blocks, each sharing ``n_shared_nodes`` with the next.

    Block k covers nodes ``[k * step, k * step + m)`` with
    ``step = m - n_shared_nodes``. Edge weights are uniform on
    ``[weight_low, weight_high]``; an edge already placed by an earlier block
    keeps its weight.
    """
    if cfg.n_components > 1 and cfg.n_shared_nodes == 0:
        raise ValidationError("n_shared_nodes = 0 cannot connect more than one block")
    m = cfg.nodes_per_component
    step = m - cfg.n_shared_nodes
    w = np.zeros((cfg.n_nodes, cfg.n_nodes))
    supports = []
    for k in range(cfg.n_components):
        idx = np.arange(k * step, k * step + m)
        adj = _random_connected(m, cfg.edge_prob, rng)
        vals = rng.uniform(cfg.weight_low, cfg.weight_high, size=(m, m))
        vals = np.triu(vals, k=1)
        vals = (vals + vals.T) * adj
        block = w[np.ix_(idx, idx)]
        w[np.ix_(idx, idx)] = np.where(block > 0, block, vals)
        supports.append(idx.tolist())
    return Graph(w), supports


def block_precisions(graph: Graph, supports, alpha=DEFAULT_ALPHA):
    """Regularized Laplacian of the subgraph induced by each support."""
    out = []
    for idx in supports:
        sub = graph.weights[np.ix_(idx, idx)]
        out.append(laplacian(Graph(sub), alpha).matrix)
    return out


def _folded_normal(precision, rng):
    try:
        c = linalg.cholesky(precision, lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("precision matrix is not positive definite") from exc
    # P = C C^T  =>  z = C^-T e has covariance P^-1
    z = linalg.solve_triangular(c, rng.standard_normal(c.shape[0]), lower=True, trans="T")
    return np.abs(z)


def sample_folded_mvn_loadings(supports, precisions, rng, n_nodes=None):
    """Row k is ``|z|`` on ``supports[k]`` with ``z ~ N(0, precisions[k]^-1)``, 0 elsewhere."""
    if len(supports) != len(precisions):
        raise ValidationError("one precision matrix per support is required")
    if n_nodes is None:
        n_nodes = max(max(s) for s in supports) + 1
    a = np.zeros((len(supports), n_nodes))
    for k, (idx, prec) in enumerate(zip(supports, precisions)):
        prec = np.asarray(prec, dtype=np.float64)
        if prec.shape != (len(idx), len(idx)):
            raise ValidationError(f"precision {k} has shape {prec.shape} for {len(idx)} nodes")
        a[k, idx] = _folded_normal(prec, rng)
    return a


def sample_laplace_sources(t, k, rng):
    """i.i.d. Laplace(0, 1/sqrt(2)) entries: unit variance, no autocorrelation."""
    if t < 1 or k < 1:
        raise ValidationError("t and k must be >= 1")
    return rng.laplace(0.0, LAPLACE_SCALE, size=(t, k))


def _mix(s, a, sigma, rng):
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if s.ndim != 2 or a.ndim != 2 or s.shape[1] != a.shape[0]:
        raise ValidationError(f"cannot mix sources {s.shape} with loadings {a.shape}")
    raw = s @ a
    if sigma > 0:
        raw = raw + sigma * rng.standard_normal(raw.shape)
    return raw


def assemble_observations(s, a, sigma, rng):
    """``standardize(S A + eps)`` with ``eps ~ N(0, sigma^2)`` i.i.d."""
    return standardize(_mix(s, a, sigma, rng))


def _scaled(raw, a):
    return a / raw.std(axis=0)


def generate_instance(cfg: SyntheticConfig | None = None) -> SyntheticInstance:
    """Backbone, folded-normal loadings, Laplace sources and observations from one seed."""
    cfg = cfg or SyntheticConfig()
    rng = np.random.default_rng(cfg.seed)
    graph, supports = generate_backbone(cfg, rng)
    precisions = block_precisions(graph, supports, cfg.alpha)
    a = sample_folded_mvn_loadings(supports, precisions, rng, graph.n_nodes)
    s = sample_laplace_sources(cfg.t_samples, cfg.n_components, rng)
    raw = _mix(s, a, cfg.noise_sigma, rng)
    return SyntheticInstance(
        graph=graph,
        true_components=a,
        sources=s,
        observations=standardize(raw),
        component_supports=supports,
        scaled_components=_scaled(raw, a),
        noise_sigma=cfg.noise_sigma,
    )


def sample_plate_model(graph: Graph, k, t, pi_lambda=0.5, rng=None, alpha=DEFAULT_ALPHA):
    """Forward-sample every latent of the hierarchical model.

    Gamma distributions use shape/rate. ``lambda_k`` is drawn from
    Gamma(1, 1) with probability ``pi_lambda`` and Gamma(10, 10) otherwise,
    then sorted ascending. Each node's squared mask column is
    Dirichlet(1/K). Noise variance is 1 / Gamma(1, 1).
    """
    rng = np.random.default_rng(rng)
    if k < 1:
        raise ValidationError("k must be >= 1")
    n = graph.n_nodes
    prec = laplacian(graph, alpha).matrix
    s = sample_laplace_sources(t, k, rng)
    sigma2 = 1.0 / rng.gamma(1.0, 1.0)
    base = np.vstack([_folded_normal(prec, rng) for _ in range(k)])
    pick = rng.random(k) < pi_lambda
    lam = np.where(pick, rng.gamma(1.0, 1.0, size=k), rng.gamma(10.0, 1.0 / 10.0, size=k))
    lam = np.sort(lam)
    mask2 = rng.dirichlet(np.full(k, 1.0 / k), size=n).T
    mask = np.sqrt(mask2)
    a = lam[:, None] * (base * mask)
    raw = _mix(s, a, np.sqrt(sigma2), rng)
    return SyntheticInstance(
        graph=graph,
        true_components=a,
        sources=s,
        observations=standardize(raw),
        component_supports=[np.flatnonzero(row > 0).tolist() for row in a],
        scaled_components=_scaled(raw, a),
        noise_sigma=float(np.sqrt(sigma2)),
        lambdas=lam,
        mask=mask,
        base_components=base,
    )
