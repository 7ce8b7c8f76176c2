"""Hot numeric kernels.

Each kernel exists twice: a numba ``@njit`` loop version and a pure-numpy
version. The numba path is used unless ``SILOSIM_DISABLE_NUMBA`` is set to a
truthy value (or numba is not importable). Both paths implement the same
tie-break rules; floating-point sums may differ in the last ulp.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("SILOSIM_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


# --- pure numpy ------------------------------------------------------------

def pairwise_distances_np(X):
    n = X.shape[0]
    D = np.zeros((n, n), dtype=np.float64)
    iu, ju = np.triu_indices(n, 1)
    diff = X[iu] - X[ju]
    vals = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    D[iu, ju] = vals
    D[ju, iu] = vals
    return D


def knn_np(D, k):
    n = D.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        row = D[i].copy()
        row[i] = np.inf
        # stable sort keeps ascending index among equal distances
        order = np.argsort(row, kind="stable")
        out[i] = np.sort(order[:k])
    return out


def majority_centroid_np(labels, embeddings, n_labels):
    counts = np.bincount(labels, minlength=n_labels)
    best = counts.max()
    tied = counts == best
    # newest item whose label is among the tied ones
    for j in range(len(labels) - 1, -1, -1):
        if tied[labels[j]]:
            label = labels[j]
            break
    centroid = embeddings[labels == label].mean(axis=0)
    return int(label), centroid


def nearest_item_np(embeddings, query):
    diff = embeddings - query
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    # ties go to the most recently inserted (last) item
    return len(dist) - 1 - int(np.argmin(dist[::-1]))


# --- numba -----------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def pairwise_distances_nb(X):
        n, d = X.shape
        D = np.zeros((n, n), dtype=np.float64)
        for i in range(n):
            for j in range(i + 1, n):
                s = 0.0
                for c in range(d):
                    t = X[i, c] - X[j, c]
                    s += t * t
                v = np.sqrt(s)
                D[i, j] = v
                D[j, i] = v
        return D

    @njit(cache=True)
    def knn_nb(D, k):
        n = D.shape[0]
        out = np.empty((n, k), dtype=np.int64)
        for i in range(n):
            row = D[i].copy()
            row[i] = np.inf
            order = np.argsort(row, kind="mergesort")
            out[i] = np.sort(order[:k])
        return out

    @njit(cache=True)
    def _majority_centroid_nb(labels, embeddings, n_labels):
        m, d = embeddings.shape
        counts = np.zeros(n_labels, dtype=np.int64)
        for j in range(m):
            counts[labels[j]] += 1
        best = counts.max()
        label = -1
        for j in range(m - 1, -1, -1):
            if counts[labels[j]] == best:
                label = labels[j]
                break
        centroid = np.zeros(d, dtype=np.float64)
        for j in range(m):
            if labels[j] == label:
                for c in range(d):
                    centroid[c] += embeddings[j, c]
        for c in range(d):
            centroid[c] /= best
        return label, centroid

    def majority_centroid_nb(labels, embeddings, n_labels):
        label, centroid = _majority_centroid_nb(labels, embeddings, n_labels)
        return int(label), centroid

    @njit(cache=True)
    def nearest_item_nb(embeddings, query):
        m, d = embeddings.shape
        best = np.inf
        idx = -1
        for j in range(m):
            s = 0.0
            for c in range(d):
                t = embeddings[j, c] - query[c]
                s += t * t
            v = np.sqrt(s)
            if v <= best:
                best = v
                idx = j
        return idx

    pairwise_distances = pairwise_distances_nb
    knn = knn_nb
    majority_centroid = majority_centroid_nb
    nearest_item = nearest_item_nb
    BACKEND = "numba"
else:
    pairwise_distances = pairwise_distances_np
    knn = knn_np
    majority_centroid = majority_centroid_np
    nearest_item = nearest_item_np
    BACKEND = "numpy"
