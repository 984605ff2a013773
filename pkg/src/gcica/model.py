"""Correlation-level model: standardization, implied correlation and Stein loss.

Variances use divisor ``T`` throughout so that a standardized ``Y`` satisfies
``diag(Y^T Y) / T = 1`` exactly.
"""

import numpy as np
from scipy import linalg

from .errors import NotPositiveDefiniteError, ValidationError

PIVOT_TOL = 1e-12
SHRINK_LADDER = (1e-3, 1e-2, 1e-1)
MAX_CONDITION = 1e6


def standardize(raw):
    """Center and scale each column to mean 0, variance 1 (divisor T).

    Raises
    ------
    ValidationError
        If there are fewer than two rows or a column is constant.
    """
    y = np.array(raw, dtype=np.float64)
    if y.ndim != 2:
        raise ValidationError(f"expected a T x N matrix, got shape {y.shape}")
    if y.shape[0] < 2:
        raise ValidationError("need at least two time points")
    if not np.all(np.isfinite(y)):
        raise ValidationError("time series contains non-finite values")
    y -= y.mean(axis=0)
    sd = np.sqrt(np.mean(y * y, axis=0))
    scale = np.maximum(np.abs(np.asarray(raw, dtype=np.float64)).max(axis=0), 1.0)
    flat = sd <= 1e-12 * scale
    if flat.any():
        raise ValidationError(f"column {int(np.flatnonzero(flat)[0])} is constant")
    y /= sd
    return y


def is_standardized(y, mean_tol=1e-10, var_tol=1e-8) -> bool:
    y = np.asarray(y)
    return bool(np.all(np.abs(y.mean(axis=0)) < mean_tol)
                and np.all(np.abs(np.mean(y * y, axis=0) - 1.0) < var_tol))


def check_loadings(a):
    """Validate a K x N loading matrix (finite, non-negative)."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValidationError(f"loadings must be K x N, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("loadings contain non-finite values")
    if np.any(a < 0):
        raise ValidationError("loadings must be non-negative")
    return a


def check_noise(gamma, n=None):
    g = np.asarray(gamma, dtype=np.float64)
    if g.ndim != 1 or (n is not None and g.size != n):
        raise ValidationError(f"noise variances of shape {g.shape}, expected ({n},)")
    if np.any(g <= 0) or np.any(g >= 1):
        raise ValidationError("noise variances must lie in the open interval (0, 1)")
    return g


def implied_correlation(a, gamma):
    """``A^T A + Diag(gamma)``."""
    a = np.asarray(a, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    if a.shape[1] != gamma.size:
        raise ValidationError(f"loadings have {a.shape[1]} columns, gamma has {gamma.size}")
    sigma = a.T @ a
    sigma[np.diag_indices_from(sigma)] += gamma
    return sigma


def cholesky(m, what="matrix"):
    """Lower Cholesky factor; raises if any pivot is <= PIVOT_TOL."""
    try:
        c = linalg.cholesky(m, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NotPositiveDefiniteError(f"{what} is not positive definite") from exc
    if np.any(np.diag(c) <= PIVOT_TOL):
        raise NotPositiveDefiniteError(f"{what} is not positive definite (pivot <= {PIVOT_TOL})")
    return c


def logdet(m, what="matrix") -> float:
    c = cholesky(m, what)
    return 2.0 * float(np.sum(np.log(np.diag(c))))


def pd_inverse(m, what="matrix"):
    c = cholesky(m, what)
    inv = linalg.cho_solve((c, True), np.eye(m.shape[0]))
    return 0.5 * (inv + inv.T)


def stein_loss(sigma_hat, s) -> float:
    """``tr(sigma_hat S^-1) - log|sigma_hat S^-1| - N``; zero iff equal."""
    sigma_hat = np.asarray(sigma_hat, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if sigma_hat.shape != s.shape or sigma_hat.ndim != 2:
        raise ValidationError(f"shape mismatch {sigma_hat.shape} vs {s.shape}")
    cs = cholesky(s, "reference matrix")
    ch = cholesky(sigma_hat, "model matrix")
    # tr(H S^-1) = ||Cs^-1 Ch||_F^2
    q = linalg.solve_triangular(cs, ch, lower=True)
    tr = float(np.sum(q * q))
    ld = 2.0 * float(np.sum(np.log(np.diag(ch))) - np.sum(np.log(np.diag(cs))))
    return tr - ld - s.shape[0]


def sample_correlation(y):
    y = np.asarray(y, dtype=np.float64)
    c = y.T @ y / y.shape[0]
    return 0.5 * (c + c.T)


def shrunk_correlation(y, shrink):
    """``(1 - shrink) * Y^T Y / T + shrink * I``."""
    if not 0.0 <= shrink <= 1.0:
        raise ValidationError(f"shrink must lie in [0, 1], got {shrink}")
    c = (1.0 - shrink) * sample_correlation(y)
    c[np.diag_indices_from(c)] += shrink
    return c


def condition_number(c) -> float:
    ev = np.linalg.eigvalsh(c)
    if ev[0] <= 0:
        return np.inf
    return float(ev[-1] / ev[0])


def default_shrink(y) -> float:
    """0 if the sample correlation is well conditioned, else the smallest
    ladder value bringing its condition number under ``MAX_CONDITION``."""
    ev = np.linalg.eigvalsh(sample_correlation(y))
    for shrink in (0.0,) + SHRINK_LADDER:
        e = (1.0 - shrink) * ev + shrink
        if e[0] > 0 and e[-1] / e[0] < MAX_CONDITION:
            return shrink
    return SHRINK_LADDER[-1]


def variance_decomposition(lam, mask, sigma_a_diag, sigma2):
    """Per-node variance ``sum_k lam_k^2 D_ki^2 Sigma_ii + sigma2``."""
    lam = np.asarray(lam, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    sigma_a_diag = np.asarray(sigma_a_diag, dtype=np.float64)
    if mask.shape != (lam.size, sigma_a_diag.size):
        raise ValidationError(
            f"mask shape {mask.shape} does not match ({lam.size}, {sigma_a_diag.size})")
    return (lam ** 2) @ (mask ** 2) * sigma_a_diag + sigma2
