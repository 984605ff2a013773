"""Pure-numpy twins of the compiled kernels in ``_kernels.pyx``."""

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components


def threshold_components(m, threshold, strict):
    m = np.asarray(m, dtype=np.float64)
    n = m.shape[0]
    upper = np.triu(m > threshold if strict else m >= threshold, k=1)
    _, raw = connected_components(csr_matrix(upper), directed=False)
    # relabel in order of first appearance
    _, first = np.unique(raw, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(order.size, dtype=np.intp)
    remap[order] = np.arange(order.size)
    return remap[raw].astype(np.intp, copy=False) if n else np.zeros(0, np.intp)


def knn_match_sums(nbrs, vals, labels):
    nbrs = np.asarray(nbrs, dtype=np.intp)
    vals = np.asarray(vals, dtype=np.float64)
    labels = np.asarray(labels)
    out = np.empty((labels.shape[0], nbrs.shape[1]))
    # chunked to bound the (perms, rows, k) boolean temporary
    step = max(1, 2**24 // max(1, nbrs.size))
    for lo in range(0, labels.shape[0], step):
        lab = labels[lo:lo + step]
        same = lab[:, :, None] == lab[:, nbrs]
        out[lo:lo + step] = np.cumsum((same * vals).sum(axis=1), axis=1)
    return out


def prox_columns(z, threshold, target):
    z = np.asarray(z, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    out = np.maximum(z - threshold, 0.0)
    norm2 = np.einsum("ij,ij->j", out, out)
    dead = norm2 == 0.0
    if dead.any():
        out[:, dead] = np.maximum(z[:, dead], 0.0)
        norm2[dead] = np.einsum("ij,ij->j", out[:, dead], out[:, dead])
    empty = norm2 == 0.0
    live = ~empty
    out[:, live] *= target[live] / np.sqrt(norm2[live])
    if empty.any():
        cols = np.flatnonzero(empty)
        rows = np.argmax(z[:, cols], axis=0)
        out[:, cols] = 0.0
        out[rows, cols] = target[cols]
    return out
