"""Composite-linearization solver for sparse, connected, non-negative loadings.

Each outer iteration linearizes ``Sigma(A) = A^T A + Diag(gamma)`` around the
current ``A`` and solves, by FISTA,

    min_{X, gamma}  tr(M S^-1) - log|M|,   M = A^T A + A^T X + X^T A + Diag(gamma)

with ``||X_j.|| <= delta`` and ``gamma`` in the unit box. The loadings are
then refit by FISTA on

    1/2 ||(A + X) - A'||^2 + (rho/2) tr(A' L A'^T) + s ||A'||_1

followed by clamping at zero and rescaling every column so that
``||A'_.i||^2 = 1 - gamma_i`` (unit variance per node).
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from . import kernels
from .errors import NotPositiveDefiniteError, NumericalError, TrustRegionError, ValidationError
from .graph import DEFAULT_ALPHA, Graph, Laplacian, laplacian
from .ica import vanilla_ica_warm_start
from .model import (
    cholesky,
    default_shrink,
    implied_correlation,
    is_standardized,
    pd_inverse,
    shrunk_correlation,
    stein_loss,
)

log = logging.getLogger(__name__)

GAMMA_EPS = 1e-6
GAMMA_INIT_FLOOR = 1e-3
MAX_RESTARTS = 5
MAX_BACKTRACKS = 40
BACKTRACK_RELAX = 0.9
WARM_STARTS = ("vanilla_ica", "random", "provided")


@dataclass(frozen=True)
class SolverConfig:
    n_components: int = 10
    sparsity_weight: float = 0.01
    connect_weight: float = 0.01
    trust_radius: float = 0.1
    alpha: float = DEFAULT_ALPHA
    max_outer: int = 200
    inner_max: int = 500
    inner_tol: float = 1e-8
    outer_tol: float = 1e-6
    patience: int = 10
    a_max: int = 200
    a_tol: float = 1e-10
    shrink: float | None = None
    seed: int = 0
    warm_start: str = "vanilla_ica"
    ica_max_iter: int = 1000

    def __post_init__(self):
        if self.n_components < 1:
            raise ValidationError("n_components must be >= 1")
        if self.sparsity_weight < 0 or self.connect_weight < 0:
            raise ValidationError("sparsity_weight and connect_weight must be >= 0")
        if not self.trust_radius > 0:
            raise ValidationError("trust_radius must be > 0")
        if self.alpha < 0:
            raise ValidationError("alpha must be >= 0")
        if min(self.max_outer, self.inner_max, self.a_max, self.patience) < 1:
            raise ValidationError("iteration caps must be >= 1")
        if not (self.inner_tol > 0 and self.outer_tol > 0 and self.a_tol > 0):
            raise ValidationError("tolerances must be > 0")
        if self.shrink is not None and not 0 <= self.shrink <= 1:
            raise ValidationError("shrink must lie in [0, 1]")
        if self.warm_start not in WARM_STARTS:
            raise ValidationError(f"warm_start must be one of {WARM_STARTS}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolverState:
    a_current: np.ndarray
    x: np.ndarray
    gamma: np.ndarray
    momentum_x: np.ndarray
    momentum_gamma: np.ndarray
    momentum_a: np.ndarray
    t: float = 1.0
    delta: float = 0.1
    outer_iter: int = 0
    inner_iters: int = 0
    loss_history: list = field(default_factory=list)
    best_loss: float = math.inf
    best_a: np.ndarray | None = None

    @classmethod
    def start(cls, a, gamma, delta):
        a = np.array(a, dtype=np.float64)
        gamma = np.array(gamma, dtype=np.float64)
        return cls(a_current=a, x=np.zeros_like(a), gamma=gamma,
                   momentum_x=np.zeros_like(a), momentum_gamma=gamma.copy(),
                   momentum_a=a.copy(), delta=delta)


@dataclass
class FitResult:
    loadings: np.ndarray
    gamma: np.ndarray
    final_loss: float
    final_objective: float
    outer_iters: int
    converged: bool
    loss_trace: list
    objective_trace: list
    best_trace: list
    shrink: float
    config: SolverConfig
    n_restarts: int = 0

    def summary(self) -> dict:
        return {
            "final_loss": self.final_loss,
            "final_objective": self.final_objective,
            "outer_iters": self.outer_iters,
            "converged": self.converged,
            "shrink": self.shrink,
            "n_restarts": self.n_restarts,
            "n_active_components": int(np.sum(np.linalg.norm(self.loadings, axis=1) > 0)),
        }


# linearized problem ---------------------------------------------------------

def linearized_cov(a, x, gamma):
    """``A^T A + A^T X + X^T A + Diag(gamma)``."""
    ax = a.T @ x
    m = a.T @ a + ax + ax.T
    m[np.diag_indices_from(m)] += gamma
    return m


def _m_inverse(a, x, gamma):
    try:
        return pd_inverse(linearized_cov(a, x, gamma), "linearized covariance")
    except NotPositiveDefiniteError as exc:
        raise TrustRegionError(str(exc)) from exc


def linearized_objective(a, x, gamma, s_inv) -> float:
    """``tr(M S^-1) - log|M|``; ``inf`` when ``M`` is not positive definite."""
    m = linearized_cov(a, x, gamma)
    try:
        c = cholesky(m, "linearized covariance")
    except NotPositiveDefiniteError:
        return math.inf
    return float(np.sum(m * s_inv) - 2.0 * np.sum(np.log(np.diag(c))))


def grad_x(a, x, gamma, s_inv):
    """``2 A (S^-1 - M^-1)``."""
    return 2.0 * a @ (s_inv - _m_inverse(a, x, gamma))


def grad_gamma(a, x, gamma, s_inv):
    """``diag(S^-1 - M^-1)``."""
    return np.diag(s_inv - _m_inverse(a, x, gamma)).copy()


def lipschitz_bounds(a, x, gamma, lap: Laplacian, rho):
    """Step-size constants ``(L_X, L_gamma, L_A)``, spectral norms throughout.

    ``L_X = sqrt(8) ||A K^-1|| ||K^-1|| ||A||`` with ``K = A^T A + Diag(gamma)``,
    ``L_gamma = max(diag(K2^-1))^2`` with ``K2 = A^T A + A^T X + X^T A`` (``K``
    replaces ``K2`` when the latter is singular), and ``L_A = ||I + rho L||``.
    """
    l_x, l_gamma = _x_gamma_bounds(a, x, gamma)
    return l_x, l_gamma, _norm2(np.eye(lap.n_nodes) + rho * lap.matrix)


def _x_gamma_bounds(a, x, gamma):
    k_inv = pd_inverse(implied_correlation(a, gamma), "A^T A + Diag(gamma)")
    l_x = math.sqrt(8.0) * _norm2(a @ k_inv) * _norm2(k_inv) * _norm2(a)
    try:
        k2_inv = pd_inverse(linearized_cov(a, x, np.zeros_like(gamma)), "K2")
    except NotPositiveDefiniteError:
        log.debug("K2 singular, L_gamma computed from A^T A + Diag(gamma)")
        k2_inv = k_inv
    # A = 0 would give a zero step constant
    return max(l_x, np.finfo(float).tiny), float(np.max(np.diag(k2_inv)) ** 2)


def _norm2(m) -> float:
    return float(linalg.norm(m, 2)) if m.size else 0.0


def project_row_ball(x, delta):
    """Rescale rows with Euclidean norm above ``delta`` onto the sphere."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    scale = np.where(norms > delta, delta / np.where(norms > 0, norms, 1.0), 1.0)
    return x * scale


def project_box01(gamma):
    return np.clip(gamma, GAMMA_EPS, 1.0 - GAMMA_EPS)


def _momentum(t):
    return (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0


@dataclass
class InnerResult:
    x: np.ndarray
    gamma: np.ndarray
    objective: float
    n_iter: int
    restarts: int
    delta: float


def inner_solve(state: SolverState, s_inv, cfg: SolverConfig) -> InnerResult:
    """FISTA on the linearized problem in ``(X, gamma)`` around ``state.a_current``.

    X and gamma move in one projected step with per-block constants
    ``(L_X, L_gamma)`` and a shared momentum scalar; a sufficient-decrease
    test doubles both constants where the bounds are too small. The best
    iterate seen (starting from ``X = 0``) is returned. If backtracking
    fails, the trust radius is halved and the solve restarts.
    """
    a = state.a_current
    gamma0 = project_box01(state.gamma)
    delta = cfg.trust_radius
    l_x, l_g = _x_gamma_bounds(a, np.zeros_like(a), gamma0)

    for restart in range(MAX_RESTARTS + 1):
        try:
            res = _inner_fista(a, gamma0, s_inv, delta, l_x, l_g, cfg, state)
        except TrustRegionError:
            res = None
        if res is not None:
            res.restarts = restart
            state.x, state.gamma = res.x, res.gamma
            state.delta = delta
            state.inner_iters += res.n_iter
            return res
        delta /= 2.0
        log.info("linearized objective left the PD cone; trust radius -> %g", delta)
    raise NumericalError(f"inner solve failed after {MAX_RESTARTS} trust-radius halvings")


def _inner_fista(a, gamma0, s_inv, delta, l_x, l_g, cfg, state):
    x = np.zeros_like(a)
    g = gamma0.copy()
    yx, yg = x.copy(), g.copy()
    t = 1.0
    f_prev = linearized_objective(a, x, g, s_inv)
    if not math.isfinite(f_prev):
        raise NumericalError("linearized objective is not finite at X = 0")
    best = (f_prev, x, g)
    # multiplier on (L_X, L_gamma): the bounds hold near the linearization
    # point but curvature grows as M nears singularity
    c = 1.0
    n_iter = 0
    for n_iter in range(1, cfg.inner_max + 1):
        try:
            m_inv = _m_inverse(a, yx, yg)
        except TrustRegionError:
            # extrapolated point left the PD cone: restart momentum
            yx, yg, t = x.copy(), g.copy(), 1.0
            m_inv = _m_inverse(a, yx, yg)
        d = s_inv - m_inv
        gx, gg = 2.0 * a @ d, np.diag(d).copy()
        f_y = linearized_objective(a, yx, yg, s_inv)
        for _ in range(MAX_BACKTRACKS):
            x_new = project_row_ball(yx - gx / (c * l_x), delta)
            g_new = project_box01(yg - gg / (c * l_g))
            dx, dg = x_new - yx, g_new - yg
            f = linearized_objective(a, x_new, g_new, s_inv)
            model = (f_y + float(np.sum(gx * dx) + gg @ dg)
                     + 0.5 * c * (l_x * float(np.sum(dx * dx)) + l_g * float(dg @ dg)))
            if f <= model + 1e-12 * max(1.0, abs(f_y)):
                break
            c *= 2.0
        else:
            return None
        t_new = _momentum(t)
        beta = (t - 1.0) / t_new
        yx = x_new + beta * (x_new - x)
        yg = g_new + beta * (g_new - g)
        x, g, t = x_new, g_new, t_new
        c = max(c * BACKTRACK_RELAX, 1.0)
        if f < best[0]:
            best = (f, x, g)
        if abs(f_prev - f) <= cfg.inner_tol * max(1.0, abs(f_prev)):
            break
        f_prev = f
    state.momentum_x, state.momentum_gamma, state.t = yx, yg, t
    return InnerResult(best[1], best[2], best[0], n_iter, 0, delta)


# A step ---------------------------------------------------------------------

def a_step_smooth(a, center, lap: Laplacian, rho) -> float:
    """``1/2 ||center - A||^2 + (rho/2) tr(A L A^T)``."""
    d = center - a
    return 0.5 * float(np.sum(d * d)) + 0.5 * rho * float(np.sum((a @ lap.matrix) * a))


def a_step_gradient(a, center, lap: Laplacian, rho):
    return (a - center) + rho * a @ lap.matrix


def prox_a(z, threshold, gamma):
    """Soft-threshold, clamp, rescale columns to ``||A_.i||^2 = 1 - gamma_i``."""
    target = np.sqrt(1.0 - np.asarray(gamma, dtype=np.float64))
    return kernels.prox_columns(np.ascontiguousarray(z, dtype=np.float64), float(threshold),
                                np.ascontiguousarray(target))


def update_a(a_prev, x, gamma, lap: Laplacian, cfg: SolverConfig, state: SolverState | None = None):
    """FISTA for the loadings given the direction ``X`` and noise ``gamma``."""
    gamma = np.asarray(gamma, dtype=np.float64)
    if np.any(gamma >= 1.0):
        raise ValidationError("1 - gamma must be positive for every node")
    rho = cfg.connect_weight
    l_a = _norm2(np.eye(lap.n_nodes) + rho * lap.matrix)
    thr = cfg.sparsity_weight / l_a
    center = a_prev + x
    a = np.array(a_prev, dtype=np.float64)
    ya = a.copy()
    t = 1.0
    for _ in range(cfg.a_max):
        a_new = prox_a(ya - a_step_gradient(ya, center, lap, rho) / l_a, thr, gamma)
        t_new = _momentum(t)
        ya = a_new + (t - 1.0) / t_new * (a_new - a)
        step = float(np.linalg.norm(a_new - a))
        a, t = a_new, t_new
        if step <= cfg.a_tol * max(1.0, float(np.linalg.norm(a))):
            break
    if state is not None:
        state.momentum_a = ya
    return a


# outer loop -----------------------------------------------------------------

def penalized_objective(a, gamma, s, lap: Laplacian, cfg: SolverConfig) -> float:
    """Stein loss plus the sparsity and connectedness penalties."""
    return (stein_loss(implied_correlation(a, gamma), s)
            + cfg.sparsity_weight * float(np.abs(a).sum())
            + 0.5 * cfg.connect_weight * float(np.sum((a @ lap.matrix) * a)))


def initial_point(a0, shrink):
    """Scale a non-negative warm start onto the unit-variance constraint."""
    a0 = np.abs(np.asarray(a0, dtype=np.float64))
    colnorm2 = np.sum(a0 * a0, axis=0)
    floor = max(shrink, GAMMA_INIT_FLOOR)
    gamma = np.clip(1.0 - colnorm2, floor, 1.0 - GAMMA_EPS)
    return prox_a(a0, 0.0, gamma), gamma


def _warm_start(y, cfg: SolverConfig, init):
    k, n = cfg.n_components, y.shape[1]
    if cfg.warm_start == "provided" or init is not None:
        if init is None:
            raise ValidationError("warm_start='provided' needs an initial loading matrix")
        init = np.asarray(init, dtype=np.float64)
        if init.shape != (k, n):
            raise ValidationError(f"initial loadings have shape {init.shape}, expected {(k, n)}")
        return init
    if cfg.warm_start == "random":
        return np.abs(np.random.default_rng(cfg.seed).standard_normal((k, n))) / math.sqrt(k)
    return vanilla_ica_warm_start(y, k, cfg.seed, cfg.ica_max_iter)


def fit(y, graph: Graph, cfg: SolverConfig | None = None, init=None,
        callback: Callable[[SolverState], None] | None = None) -> FitResult:
    """Estimate sparse, connected, non-negative loadings from standardized ``y``.

    Parameters
    ----------
    y : (T, N) ndarray
        Standardized time series (column mean 0, variance 1).
    graph : Graph
        Structural graph on the N nodes.
    cfg : SolverConfig
    init : (K, N) ndarray, optional
        Warm start; implies ``warm_start='provided'``.
    callback : callable, optional
        Called with the :class:`SolverState` after every outer iteration.

    Returns
    -------
    FitResult
        Best iterate by penalized objective. ``final_loss`` is its Stein loss.
    """
    cfg = cfg or SolverConfig()
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2:
        raise ValidationError(f"expected a T x N matrix, got shape {y.shape}")
    if not is_standardized(y):
        raise ValidationError("time series must be standardized (see gcica.model.standardize)")
    if graph.n_nodes != y.shape[1]:
        raise ValidationError(f"graph has {graph.n_nodes} nodes, data has {y.shape[1]} columns")
    k = cfg.n_components
    if k > min(y.shape):
        log.warning("n_components=%d exceeds min(T, N)=%d", k, min(y.shape))

    shrink = default_shrink(y) if cfg.shrink is None else cfg.shrink
    log.info("fit: %s, shrink=%g", cfg.to_dict(), shrink)
    s = shrunk_correlation(y, shrink)
    try:
        s_inv = pd_inverse(s, "sample correlation")
    except NotPositiveDefiniteError as exc:
        raise ValidationError(
            "sample correlation is not invertible; set shrink > 0 (or leave it unset "
            "for automatic selection)") from exc
    lap = laplacian(graph, cfg.alpha)

    a0, gamma0 = initial_point(_warm_start(y, cfg, init), shrink)
    state = SolverState.start(a0, gamma0, cfg.trust_radius)
    best_obj = math.inf
    best_gamma = gamma0
    best_trace, objective_trace = [], []
    stall = 0
    converged = False
    restarts = 0

    for it in range(1, cfg.max_outer + 1):
        inner = inner_solve(state, s_inv, cfg)
        restarts += inner.restarts
        a_new = update_a(state.a_current, inner.x, inner.gamma, lap, cfg, state)
        state.a_current = a_new
        state.gamma = inner.gamma
        state.outer_iter = it
        loss = stein_loss(implied_correlation(a_new, inner.gamma), s)
        obj = penalized_objective(a_new, inner.gamma, s, lap, cfg)
        state.loss_history.append(loss)
        objective_trace.append(obj)
        if obj < best_obj:
            rel = (best_obj - obj) / max(abs(best_obj), 1.0) if math.isfinite(best_obj) else math.inf
            best_obj, best_gamma = obj, inner.gamma.copy()
            state.best_a, state.best_loss = a_new.copy(), loss
        else:
            rel = 0.0
        best_trace.append(best_obj)
        stall = stall + 1 if rel < cfg.outer_tol else 0
        if callback is not None:
            callback(state)
        if stall >= cfg.patience:
            converged = True
            break

    best_a = state.best_a
    return FitResult(
        loadings=best_a,
        gamma=best_gamma,
        final_loss=stein_loss(implied_correlation(best_a, best_gamma), s),
        final_objective=best_obj,
        outer_iters=state.outer_iter,
        converged=converged,
        loss_trace=list(state.loss_history),
        objective_trace=objective_trace,
        best_trace=best_trace,
        shrink=shrink,
        config=cfg,
        n_restarts=restarts,
    )
