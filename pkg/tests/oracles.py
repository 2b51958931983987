"""Independent reference implementations used only to check the library:
brute-force scans, a projected-gradient simplex QP, explicit matrix powers.
Deliberately slow and simple."""

import itertools
import math

import numpy as np


def pairwise_cosine_brute(X):
    """Entrywise cosine matrix via explicit dot/norm per pair."""
    n = X.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            ni = math.sqrt(sum(float(v) ** 2 for v in X[i]))
            nj = math.sqrt(sum(float(v) ** 2 for v in X[j]))
            if ni == 0 or nj == 0:
                out[i, j] = 1.0 if i == j else 0.0
            else:
                out[i, j] = float(np.dot(X[i], X[j])) / (ni * nj)
    return out


def squared_dists_brute(X):
    n = X.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = float(((X[i] - X[j]) ** 2).sum())
    return out


def normalized_adjacency_brute(adj):
    """Entrywise evaluation of the self-loop-augmented normalization."""
    n = adj.shape[0]
    aug = adj + np.eye(n)
    deg = [float(aug[i].sum()) for i in range(n)]
    A = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            A[i, j] = aug[i, j] / math.sqrt(deg[i] * deg[j])
    return A, np.eye(n) - A


def hop_pairs_brute(adj, l):
    """Ordered (i, j) pairs adjacent at hop l, via explicit path counting."""
    n = adj.shape[0]
    b = (adj > 0).astype(np.int64)
    p = b.copy()
    for _ in range(l - 1):
        p = p @ b
    return [(i, j) for i in range(n) for j in range(n) if i != j and p[i, j] > 0]


def homophily_brute(adj, labels, l):
    pairs = hop_pairs_brute(adj, l)
    if not pairs:
        raise ValueError("no pairs")
    return sum(1 for i, j in pairs if labels[i] == labels[j]) / len(pairs)


def avg_similarity_brute(F, adj, l):
    pairs = hop_pairs_brute(adj, l)
    sims = []
    for i, j in pairs:
        ni = float(np.linalg.norm(F[i]))
        nj = float(np.linalg.norm(F[j]))
        sims.append(0.0 if ni == 0 or nj == 0 else float(F[i] @ F[j]) / (ni * nj))
    return sum(sims) / len(sims)


def project_simplex(v):
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, len(v) + 1) > (css - 1.0))[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1)
    return np.maximum(v - theta, 0.0)


def qp_row_oracle(lin, denom, i, max_iters=200_000, tol=1e-13):
    """Projected gradient descent for the frozen row surrogate:

        min_s  sum_j 0.5 * denom_j * s_j^2 - lin_j * s_j
        s.t.   s on the probability simplex, s_i = 0
    """
    free = np.ones(len(lin), dtype=bool)
    free[i] = False
    d = denom[free]
    l = lin[free]
    x = np.full(int(free.sum()), 1.0 / free.sum())
    eta = 1.0 / d.max()
    for _ in range(max_iters):
        x_new = project_simplex(x - eta * (d * x - l))
        if np.abs(x_new - x).max() < tol:
            x = x_new
            break
        x = x_new
    out = np.zeros(len(lin))
    out[free] = x
    return out


def matrix_power_filter(X, L, k, low=True):
    """Explicit operator power: (I - L/2)^k X or (L/2)^k X."""
    n = L.shape[0]
    op = np.eye(n) - 0.5 * L if low else 0.5 * L
    P = np.linalg.matrix_power(op, k)
    return P @ X


def best_permutation_accuracy(pred, truth):
    """Exhaustive max over cluster-to-class bijections; feasible for c <= 6."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    ids = sorted(set(pred.tolist()) | set(truth.tolist()))
    best = 0
    for perm in itertools.permutations(ids):
        mapping = dict(zip(ids, perm))
        best = max(best, sum(1 for p, t in zip(pred, truth) if mapping[p] == t))
    return best / len(pred)


def adam_reference(grads, lr, beta1=0.9, beta2=0.999, eps=1e-8, x0=0.0):
    """Scalar Adam recurrence unrolled step by step."""
    x, m, v = x0, 0.0, 0.0
    trace = []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        x = x - lr * m_hat / (math.sqrt(v_hat) + eps)
        trace.append(x)
    return trace
