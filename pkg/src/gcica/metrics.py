"""Recovery metrics: component matching, spread, localization, sparsity, accuracy."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ValidationError
from .graph import Graph, Laplacian, combinatorial_laplacian

log = logging.getLogger(__name__)

RECOVERY_THRESHOLD = 0.8
TOP_N = 5


@dataclass
class MatchResult:
    pairs: list[tuple[int, int, float]]
    unmatched_recovered: list[int]
    unmatched_truth: list[int]

    @property
    def correlations(self) -> np.ndarray:
        return np.array([c for _, _, c in self.pairs], dtype=np.float64)


@dataclass
class MetricsReport:
    spread: float
    localization: float
    l1_sparsity: float
    n_recovered: int
    mean_top5: float
    localization_excluded: int = 0
    pairs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pairs"] = [[int(r), int(t), float(c)] for r, t, c in self.pairs]
        return d


def abs_row_correlation(a, b):
    """|Pearson correlation| between every row of ``a`` and every row of ``b``.

    Rows with zero variance correlate 0 with everything.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise ValidationError(f"row length mismatch: {a.shape[1]} vs {b.shape[1]}")
    za, zb = _unit_rows(a), _unit_rows(b)
    return np.clip(np.abs(za @ zb.T), 0.0, 1.0)


def _unit_rows(m):
    c = m - m.mean(axis=1, keepdims=True)
    n = np.linalg.norm(c, axis=1, keepdims=True)
    return np.divide(c, n, out=np.zeros_like(c), where=n > 0)


def match_components(recovered, truth) -> MatchResult:
    """Greedy one-to-one matching by descending absolute correlation.

    Ties go to the lower recovered index, then the lower truth index.
    """
    corr = abs_row_correlation(recovered, truth)
    kr, kt = corr.shape
    r_idx, t_idx = np.meshgrid(np.arange(kr), np.arange(kt), indexing="ij")
    order = np.lexsort((t_idx.ravel(), r_idx.ravel(), -corr.ravel()))
    used_r = np.zeros(kr, bool)
    used_t = np.zeros(kt, bool)
    pairs = []
    for flat in order:
        r, t = divmod(int(flat), kt)
        if used_r[r] or used_t[t]:
            continue
        used_r[r] = used_t[t] = True
        pairs.append((r, t, float(corr[r, t])))
        if len(pairs) == min(kr, kt):
            break
    return MatchResult(pairs, np.flatnonzero(~used_r).tolist(), np.flatnonzero(~used_t).tolist())


def spread(a, lap: Laplacian) -> float:
    """Mean over rows of ``A_k L A_k^T``."""
    a = np.asarray(a, dtype=np.float64)
    if lap.alpha != 0:
        raise ValidationError("spread is defined with the unregularized Laplacian")
    if a.shape[1] != lap.n_nodes:
        raise ValidationError(f"loadings have {a.shape[1]} columns for {lap.n_nodes} nodes")
    if a.shape[0] == 0:
        return 0.0
    return float(max(np.mean(np.einsum("kn,nm,km->k", a, lap.matrix, a)), 0.0))


def localization(recovered, supports, match: MatchResult) -> tuple[float, int]:
    """Sum over matched pairs of outside-support energy / inside-support energy.

    Returns the sum and the number of pairs excluded because their inside
    energy is zero (their ratio would be infinite).
    """
    recovered = np.asarray(recovered, dtype=np.float64)
    total, excluded = 0.0, 0
    for r, t, _ in match.pairs:
        inside = np.zeros(recovered.shape[1], bool)
        inside[list(supports[t])] = True
        e = recovered[r] ** 2
        e_in, e_out = float(e[inside].sum()), float(e[~inside].sum())
        if e_in == 0.0:
            excluded += 1
            continue
        total += e_out / e_in
    if excluded:
        log.warning("%d matched component(s) have no energy on their support", excluded)
    return total, excluded


def l1_sparsity(a) -> float:
    return float(np.abs(np.asarray(a, dtype=np.float64)).sum())


def recovery_report(match: MatchResult, threshold=RECOVERY_THRESHOLD, top_n=TOP_N):
    """``(n_recovered, mean_top5)``: pairs above ``threshold`` and the mean of
    the ``top_n`` largest pair correlations (all pairs if fewer)."""
    c = np.sort(match.correlations)[::-1]
    n_rec = int(np.sum(c > threshold))
    mean_top = float(np.mean(c[:top_n])) if c.size else 0.0
    return n_rec, mean_top


def evaluate(recovered, truth, graph: Graph, supports=None, threshold=RECOVERY_THRESHOLD) -> MetricsReport:
    """All metrics for one recovered loading matrix against ground truth.

    ``supports`` defaults to the non-zero pattern of each truth row.
    """
    recovered = np.asarray(recovered, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if supports is None:
        supports = [np.flatnonzero(row != 0).tolist() for row in truth]
    m = match_components(recovered, truth)
    n_rec, top = recovery_report(m, threshold)
    loc, excluded = localization(recovered, supports, m)
    return MetricsReport(
        spread=spread(recovered, combinatorial_laplacian(graph)),
        localization=loc,
        l1_sparsity=l1_sparsity(recovered),
        n_recovered=n_rec,
        mean_top5=top,
        localization_excluded=excluded,
        pairs=m.pairs,
    )
