"""Slow reference implementations used only by the tests."""

import numpy as np

from gcica.solver import GAMMA_EPS, linearized_cov


def _obj_and_grads(a, x, g, s_inv):
    m = linearized_cov(a, x, g)
    sign, ld = np.linalg.slogdet(m)
    if sign <= 0:
        return np.inf, None, None
    d = s_inv - np.linalg.inv(m)
    return float(np.sum(m * s_inv) - ld), 2.0 * a @ d, np.diag(d).copy()


def projected_gradient(a, gamma0, s_inv, delta, step=1e-4, max_iter=10**6, tol=1e-13):
    """Plain joint projected gradient on the linearized problem, from X = 0."""
    x = np.zeros_like(a)
    g = np.clip(gamma0, GAMMA_EPS, 1 - GAMMA_EPS)
    f, gx, gg = _obj_and_grads(a, x, g, s_inv)
    for it in range(max_iter):
        xn = x - step * gx
        norms = np.linalg.norm(xn, axis=1, keepdims=True)
        xn = np.where(norms > delta, xn * delta / np.maximum(norms, 1e-300), xn)
        gn = np.clip(g - step * gg, GAMMA_EPS, 1 - GAMMA_EPS)
        fn, gxn, ggn = _obj_and_grads(a, xn, gn, s_inv)
        if not np.isfinite(fn):
            break
        done = abs(f - fn) < tol * max(1.0, abs(f))
        x, g, f, gx, gg = xn, gn, fn, gxn, ggn
        if done:
            break
    return x, g, f, it + 1


def central_difference(fun, x, h=1e-6):
    x = np.array(x, dtype=np.float64)
    out = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        out[idx] = (fun(xp) - fun(xm)) / (2 * h)
    return out


def tiny_inner_problem(seed, n=6, k=2, t=400):
    """A standardized N=6, K=2 problem and its linearization point."""
    from gcica.model import pd_inverse, sample_correlation, standardize

    rng = np.random.default_rng(seed)
    a_true = rng.uniform(0.1, 1.0, (k, n)) * (rng.random((k, n)) < 0.7)
    y = standardize(rng.laplace(size=(t, k)) @ a_true + 0.3 * rng.standard_normal((t, n)))
    s_inv = pd_inverse(sample_correlation(y))
    a = np.abs(a_true + 0.2 * rng.standard_normal((k, n)))
    a *= np.sqrt(0.6) / np.maximum(np.linalg.norm(a, axis=0), 1e-12)
    gamma = np.full(n, 0.4)
    return a, gamma, s_inv
