"""Cross-fit robustness: k-NN subject statistic, permutation tests, threshold clusters.

A bank stacks the components of many fits (one row each) with the subject
and scan each fit came from. The k-NN edge set ``E_k`` selects, for every
row, its ``k`` most correlated other rows; each selected ordered pair counts
once, so a mutual pair contributes twice.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ValidationError

log = logging.getLogger(__name__)

DEFAULT_ETAS = tuple(np.round(np.linspace(0.45, 0.95, 11), 2))
MIN_PERMUTATIONS = 100


@dataclass
class ComponentBank:
    components: np.ndarray
    subject_labels: np.ndarray
    scan_labels: np.ndarray
    fit_ids: np.ndarray
    n_dropped: int = 0

    @property
    def n_rows(self) -> int:
        return self.components.shape[0]


def make_bank(components, subjects, scans=None, fit_ids=None) -> ComponentBank:
    """Stack components with their labels, dropping constant rows."""
    comps = np.asarray(components, dtype=np.float64)
    if comps.ndim != 2:
        raise ValidationError(f"components must be M x N, got shape {comps.shape}")
    m = comps.shape[0]
    subjects = np.asarray(subjects)
    scans = np.zeros(m, dtype=int) if scans is None else np.asarray(scans)
    fit_ids = np.arange(m) if fit_ids is None else np.asarray(fit_ids)
    for name, lab in (("subject", subjects), ("scan", scans), ("fit id", fit_ids)):
        if lab.shape != (m,):
            raise ValidationError(f"{name} labels have shape {lab.shape}, expected ({m},)")
    keep = np.ptp(comps, axis=1) > 0
    dropped = int(m - keep.sum())
    if dropped:
        log.info("dropped %d constant component(s)", dropped)
    return ComponentBank(comps[keep], subjects[keep], scans[keep], fit_ids[keep], dropped)


def correlation_bank(bank: ComponentBank | np.ndarray) -> np.ndarray:
    """Pairwise Pearson correlation between rows, unit diagonal."""
    comps = bank.components if isinstance(bank, ComponentBank) else np.asarray(bank, float)
    c = comps - comps.mean(axis=1, keepdims=True)
    n = np.linalg.norm(c, axis=1)
    if np.any(n == 0):
        raise ValidationError("constant rows have no correlation; build the bank with make_bank")
    c /= n[:, None]
    corr = c @ c.T
    corr = np.clip(0.5 * (corr + corr.T), -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def knn_edges(corr, k):
    """For each row the ``k`` most correlated other rows (ties: lower index).

    Returns ``(neighbours, correlations)``, both M x k.
    """
    corr = np.asarray(corr, dtype=np.float64)
    m = corr.shape[0]
    if not 1 <= k <= m - 1:
        raise ValidationError(f"k={k} must lie in [1, {m - 1}]")
    work = corr.copy()
    np.fill_diagonal(work, -np.inf)
    nbrs = np.argsort(-work, axis=1, kind="stable")[:, :k]
    vals = np.take_along_axis(corr, nbrs, axis=1)
    return np.ascontiguousarray(nbrs, dtype=np.intp), np.ascontiguousarray(vals)


def _codes(labels):
    return np.unique(np.asarray(labels), return_inverse=True)[1].astype(np.intp).ravel()


def knn_statistic(corr, labels, k) -> float:
    """``s_k = sum over (i, j) in E_k of corr_ij [label_i == label_j]``."""
    nbrs, vals = knn_edges(corr, k)
    codes = _codes(labels)
    if codes.size != nbrs.shape[0]:
        raise ValidationError(f"{codes.size} labels for {nbrs.shape[0]} rows")
    return float(kernels.knn_match_sums(nbrs, vals, codes[None, :])[0, k - 1])


@dataclass
class PermutationResult:
    mode: str
    k: np.ndarray              # 1..kmax
    observed: np.ndarray       # statistic per k
    p_value: np.ndarray
    null: np.ndarray           # n_perm x kmax
    count_observed: np.ndarray
    count_p_value: np.ndarray

    def at(self, k):
        i = int(k) - 1
        return float(self.observed[i]), float(self.p_value[i]), self.null[:, i]


def _replicate_rng(seed, i):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(i),)))


def _permuted(codes, groups, n_perm, seed):
    out = np.empty((n_perm, codes.size), dtype=np.intp)
    for i in range(n_perm):
        rng = _replicate_rng(seed, i)
        if groups is None:
            out[i] = rng.permutation(codes)
        else:
            row = codes.copy()
            for idx in groups:
                row[idx] = codes[rng.permutation(idx)]
            out[i] = row
    return out


def _batched_sums(nbrs, vals, labels, threads):
    if threads <= 1 or labels.shape[0] < 2 * threads:
        return kernels.knn_match_sums(nbrs, vals, labels)
    chunks = np.array_split(labels, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda lab: kernels.knn_match_sums(nbrs, vals, np.ascontiguousarray(lab)), chunks))
    return np.vstack(parts)


def _p_values(observed, null):
    return (1.0 + np.sum(null >= observed[None, :] - 1e-12 * np.maximum(1.0, np.abs(observed)), axis=0)) / (1.0 + null.shape[0])


def permutation_curve(corr, subjects, kmax=10, n_perm=1000, seed=0, mode="subject",
                      scans=None, threads=1) -> PermutationResult:
    """Observed statistic and permutation p-values for every k in ``1..kmax``.

    ``mode="subject"`` permutes subject labels over all rows. ``mode="session"``
    keeps only same-subject pairs of ``E_k``, scores the correlation of those
    joining different scans, and permutes scan labels within each subject.
    The p-value is ``(1 + #{null >= observed}) / (1 + n_perm)``. A
    count-of-edges variant of the statistic is reported alongside.
    """
    if n_perm < MIN_PERMUTATIONS:
        raise ValidationError(f"n_perm must be >= {MIN_PERMUTATIONS}, got {n_perm}")
    nbrs, vals = knn_edges(corr, kmax)
    subj = _codes(subjects)
    if subj.size != nbrs.shape[0]:
        raise ValidationError(f"{subj.size} labels for {nbrs.shape[0]} rows")

    if mode == "subject":
        codes, groups, weights = subj, None, vals
    elif mode == "session":
        if scans is None:
            raise ValidationError("session mode needs scan labels")
        codes = _codes(scans)
        if codes.size != subj.size:
            raise ValidationError("scan and subject labels differ in length")
        # scan codes are only compared within a subject
        same_subject = (subj[:, None] == subj[nbrs]).astype(np.float64)
        weights = np.ascontiguousarray(vals * same_subject)
        groups = [np.flatnonzero(subj == s) for s in np.unique(subj)]
    else:
        raise ValidationError(f"mode must be 'subject' or 'session', got {mode!r}")
    if np.unique(codes).size < 2:
        log.warning("fewer than two distinct labels: every permutation equals the observed statistic")

    perms = _permuted(codes, groups, n_perm, seed)
    ones = np.ascontiguousarray(weights != 0, dtype=np.float64) if mode == "session" else np.ones_like(vals)
    obs = kernels.knn_match_sums(nbrs, weights, codes[None, :])[0]
    null = _batched_sums(nbrs, weights, perms, threads)
    obs_n = kernels.knn_match_sums(nbrs, ones, codes[None, :])[0]
    null_n = _batched_sums(nbrs, ones, perms, threads)
    if mode == "session":
        # same-scan mass -> cross-scan mass
        total = np.cumsum(weights.sum(axis=0))
        total_n = np.cumsum(ones.sum(axis=0))
        obs, null = total - obs, total[None, :] - null
        obs_n, null_n = total_n - obs_n, total_n[None, :] - null_n
    return PermutationResult(
        mode=mode,
        k=np.arange(1, kmax + 1),
        observed=obs,
        p_value=_p_values(obs, null),
        null=null,
        count_observed=obs_n,
        count_p_value=_p_values(obs_n, null_n),
    )


def permutation_test(corr, labels, k, n_perm=1000, seed=0, mode="subject", scans=None, threads=1):
    """``(observed s_k, p_value, null samples)`` for one k. See :func:`permutation_curve`."""
    return permutation_curve(corr, labels, k, n_perm, seed, mode, scans, threads).at(k)


@dataclass
class ClusterReport:
    eta: float
    labels: np.ndarray   # cluster id per row; id 0 is the largest cluster
    sizes: np.ndarray    # descending

    @property
    def n_clusters(self) -> int:
        return self.sizes.size


def threshold_clusters(corr, eta) -> ClusterReport:
    """Connected components of the graph with an edge wherever ``corr_ij >= eta``.

    Clusters are numbered by decreasing size, ties broken by smallest member.
    """
    if not 0 < eta < 1:
        raise ValidationError(f"eta must lie in (0, 1), got {eta}")
    return _clusters(corr, eta)


def _clusters(corr, eta):
    raw = kernels.threshold_components(np.ascontiguousarray(corr, dtype=np.float64), float(eta), False)
    sizes = np.bincount(raw)
    # raw ids already follow smallest-member order, so a stable sort keeps that as tie-break
    order = np.argsort(-sizes, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return ClusterReport(float(eta), rank[raw], sizes[order])


def cluster_means(bank: ComponentBank | np.ndarray, report: ClusterReport, top_n=5) -> np.ndarray:
    """Mean component of each of the ``top_n`` largest clusters (top_n x N)."""
    comps = bank.components if isinstance(bank, ComponentBank) else np.asarray(bank, float)
    n = min(top_n, report.n_clusters)
    return np.vstack([comps[report.labels == c].mean(axis=0) for c in range(n)]) if n else np.zeros((0, comps.shape[1]))


def eta_sweep(corr, etas=DEFAULT_ETAS) -> list[tuple[float, int]]:
    """Largest cluster size for each threshold; thresholds above 1 give singletons."""
    out = []
    for eta in etas:
        sizes = _clusters(corr, eta).sizes
        out.append((float(eta), int(sizes[0]) if sizes.size else 0))
    return out
