"""Clustering metrics and the deterministic k-means used for centroid
initialization: Hungarian-matched accuracy and arithmetic-mean NMI."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

KMEANS_MAX_ITERS = 300


@dataclass(frozen=True)
class MetricReport:
    acc: float
    nmi: float
    confusion: np.ndarray  # square contingency table, prediction rows


def _pairwise_sq_dists(Z: np.ndarray, C: np.ndarray) -> np.ndarray:
    zz = np.einsum("ij,ij->i", Z, Z)
    cc = np.einsum("ij,ij->i", C, C)
    d = zz[:, None] + cc[None, :] - 2.0 * (Z @ C.T)
    return np.maximum(d, 0.0)


def _kmeans_pp_init(Z: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    n = Z.shape[0]
    centroids = np.empty((c, Z.shape[1]))
    centroids[0] = Z[int(rng.integers(n))]
    d2 = _pairwise_sq_dists(Z, centroids[:1]).ravel()
    for k in range(1, c):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))  # duplicate points: any choice is fine
        else:
            cum = np.cumsum(d2 / total)
            idx = int(np.searchsorted(cum, rng.random(), side="right"))
            idx = min(idx, n - 1)
        centroids[k] = Z[idx]
        d2 = np.minimum(d2, _pairwise_sq_dists(Z, centroids[k : k + 1]).ravel())
    return centroids


def kmeans(Z, c: int, seed: int = 0, max_iters: int = KMEANS_MAX_ITERS):
    """Lloyd iterations with k-means++ seeding, deterministic per seed.

    Empty clusters are re-seeded at the point farthest from its assigned
    centroid. Converges when assignments stop changing.
    """
    Z = np.asarray(Z, dtype=np.float64)
    n = Z.shape[0]
    if n < c:
        raise ValueError(f"cannot form {c} clusters from {n} points")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(Z, c, rng)
    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iters):
        d2 = _pairwise_sq_dists(Z, centroids)
        new_labels = d2.argmin(axis=1)
        point_d2 = d2[np.arange(n), new_labels]
        for k in range(c):
            members = new_labels == k
            if members.any():
                centroids[k] = Z[members].mean(axis=0)
            else:
                far = int(point_d2.argmax())
                centroids[k] = Z[far]
                new_labels[far] = k
                point_d2[far] = 0.0
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return centroids, labels


def contingency_table(pred, truth) -> np.ndarray:
    """Square prediction-by-truth count table, zero-padded to max id + 1."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError("prediction and truth lengths differ")
    size = int(max(pred.max(), truth.max())) + 1
    table = np.zeros((size, size), dtype=np.int64)
    np.add.at(table, (pred, truth), 1)
    return table


def clustering_accuracy(pred, truth) -> float:
    """Best accuracy over all one-to-one cluster-to-class matchings."""
    table = contingency_table(pred, truth)
    rows, cols = linear_sum_assignment(-table)
    return float(table[rows, cols].sum() / len(np.asarray(pred)))


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def _same_partition(a: np.ndarray, b: np.ndarray) -> bool:
    return len({(x, y) for x, y in zip(a.tolist(), b.tolist())}) == len(set(a.tolist())) == len(
        set(b.tolist())
    )


def nmi(pred, truth) -> float:
    """Mutual information normalized by the arithmetic mean of entropies.

    Returns 1 for labelings identical up to relabeling and 0 when either
    labeling is constant while the two partitions differ.
    """
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    table = contingency_table(pred, truth).astype(np.float64)
    n = table.sum()
    row = table.sum(axis=1)
    col = table.sum(axis=0)
    h_pred = _entropy(row)
    h_truth = _entropy(col)
    if h_pred == 0.0 or h_truth == 0.0:
        return 1.0 if _same_partition(pred, truth) else 0.0
    nz = table > 0
    mi = float((table[nz] / n * np.log(n * table[nz] / np.outer(row, col)[nz])).sum())
    return max(0.0, mi / (0.5 * (h_pred + h_truth)))


def evaluate_clustering(pred, truth) -> MetricReport:
    return MetricReport(
        acc=clustering_accuracy(pred, truth),
        nmi=nmi(pred, truth),
        confusion=contingency_table(pred, truth),
    )
