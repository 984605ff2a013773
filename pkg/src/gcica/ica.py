"""Symmetric FastICA with the log-cosh contrast, used as warm start and baseline."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ValidationError

log = logging.getLogger(__name__)


@dataclass
class IcaResult:
    mixing: np.ndarray      # K x N, Y ~= S @ mixing
    unmixing: np.ndarray    # N x K, S = Y @ unmixing
    sources: np.ndarray     # T x K, unit variance
    converged: bool
    n_iter: int


def _sym_decorrelate(w):
    # (W W^T)^{-1/2} W
    s, u = linalg.eigh(w @ w.T)
    s = np.clip(s, np.finfo(float).tiny, None)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ w


def fastica(y, n_components, seed=0, max_iter=1000, tol=1e-6) -> IcaResult:
    """Temporal ICA of a T x N matrix.

    ``y`` is whitened on its top ``n_components`` principal directions, then
    the fixed-point iteration ``W <- E[g(WZ) Z^T] - E[g'(WZ)] W`` with
    ``g = tanh`` runs under symmetric decorrelation until
    ``max |1 - |diag(W_new W^T)|| < tol``.
    """
    y = np.asarray(y, dtype=np.float64)
    t, n = y.shape
    k = int(n_components)
    if not 1 <= k <= min(t, n):
        raise ValidationError(f"n_components={k} must lie in [1, min(T, N)={min(t, n)}]")
    yc = y - y.mean(axis=0)
    cov = yc.T @ yc / t
    ev, vec = linalg.eigh(cov)
    ev, vec = ev[::-1][:k], vec[:, ::-1][:, :k]
    # eigenvector signs are arbitrary; pin them for reproducibility
    vec *= np.where(vec[np.argmax(np.abs(vec), axis=0), np.arange(k)] < 0, -1.0, 1.0)
    ev = np.clip(ev, np.finfo(float).eps * max(ev[0], 1.0), None)
    whiten = vec / np.sqrt(ev)          # N x K
    z = yc @ whiten                     # T x K, identity covariance

    rng = np.random.default_rng(seed)
    w = _sym_decorrelate(rng.standard_normal((k, k)))
    converged = False
    for it in range(1, max_iter + 1):
        u = z @ w.T
        g = np.tanh(u)
        gp = 1.0 - g * g
        w_new = _sym_decorrelate(g.T @ z / t - gp.mean(axis=0)[:, None] * w)
        lim = np.max(np.abs(np.abs(np.einsum("ij,ij->i", w_new, w)) - 1.0))
        w = w_new
        if lim < tol:
            converged = True
            break
    if not converged:
        log.warning("FastICA did not converge in %d iterations", max_iter)

    unmixing = whiten @ w.T                    # N x K
    sources = yc @ unmixing
    mixing = w @ (vec * np.sqrt(ev)).T         # K x N
    return IcaResult(mixing, unmixing, sources, converged, it)


def vanilla_ica_warm_start(y, n_components, seed=0, max_iter=1000, tol=1e-6):
    """Entrywise absolute value of the FastICA mixing rows (K x N)."""
    return np.abs(fastica(y, n_components, seed, max_iter, tol).mixing)
