"""Core graph representations: adjacency normalization, Laplacians, and
homophily / neighbor-similarity measurements.

Everything here works on dense float64 matrices. Hop-l adjacency means the
support of the l-th power of the adjacency matrix with the diagonal removed.
"""

from dataclasses import dataclass

import numpy as np

SYMMETRY_ATOL = 1e-9


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph held as a dense nonnegative adjacency matrix."""

    n: int
    adj: np.ndarray
    has_self_loops: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        if self.adj.shape != (self.n, self.n):
            raise ValueError(f"adjacency shape {self.adj.shape} does not match n={self.n}")
        if not np.all(np.isfinite(self.adj)):
            raise ValueError("adjacency contains non-finite weights")
        if np.any(self.adj < 0):
            raise ValueError("adjacency weights must be nonnegative")
        if not np.allclose(self.adj, self.adj.T, rtol=0, atol=SYMMETRY_ATOL):
            raise ValueError("adjacency must be symmetric")

    @classmethod
    def from_adjacency(cls, adj) -> "Graph":
        adj = np.asarray(adj, dtype=np.float64)
        loops = bool(np.any(np.diagonal(adj) != 0))
        return cls(n=adj.shape[0], adj=adj, has_self_loops=loops)


@dataclass(frozen=True)
class NormalizedGraph:
    """Symmetrically normalized adjacency and its Laplacian (L = I - A)."""

    a_norm: np.ndarray
    laplacian: np.ndarray

    @property
    def n(self) -> int:
        return self.a_norm.shape[0]


@dataclass(frozen=True)
class LabelVector:
    """Node class ids in {0..c-1}."""

    labels: np.ndarray
    c: int

    def __post_init__(self):
        if self.c < 1:
            raise ValueError("class count must be >= 1")
        if self.labels.ndim != 1:
            raise ValueError("labels must be a flat vector")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.c):
            raise ValueError(f"label ids must lie in [0, {self.c})")

    @classmethod
    def from_array(cls, labels, c=None) -> "LabelVector":
        labels = np.asarray(labels, dtype=np.int64)
        if c is None:
            c = int(labels.max()) + 1 if labels.size else 1
        return cls(labels=labels, c=int(c))


def normalize_adjacency(g: Graph) -> NormalizedGraph:
    """Self-loop augmented symmetric normalization of a raw graph.

    Adds the identity to the adjacency, takes D from the row sums of the
    augmented matrix, and returns A = D^{-1/2} (adj + I) D^{-1/2} together
    with L = I - A. Self-loops guarantee strictly positive degrees, so the
    inverse square root is always defined.
    """
    a_tilde = g.adj + np.eye(g.n)
    deg = a_tilde.sum(axis=1)
    d_inv_sqrt = 1.0 / np.sqrt(deg)
    a_norm = a_tilde * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]
    a_norm = 0.5 * (a_norm + a_norm.T)
    laplacian = np.eye(g.n) - a_norm
    return NormalizedGraph(a_norm=a_norm, laplacian=laplacian)


def _adjacency_of(g) -> np.ndarray:
    """Accept a Graph or a raw square matrix (reconstructed graphs may be
    asymmetric, so measurement helpers cannot insist on the Graph type)."""
    if isinstance(g, Graph):
        return g.adj
    adj = np.asarray(g, dtype=np.float64)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError("expected a square adjacency matrix")
    return adj


def hop_support(g, l: int) -> np.ndarray:
    """Boolean matrix of ordered pairs adjacent at hop l (diagonal removed).

    Uses powers of the binarized adjacency; the support of the l-th power of
    a nonnegative matrix equals the support of the power of its binarization,
    and binarizing avoids under/overflow for weighted inputs.
    """
    if l < 1:
        raise ValueError("hop order must be >= 1")
    adj = _adjacency_of(g)
    b = (adj > 0).astype(np.float64)
    p = b.copy()
    for _ in range(l - 1):
        p = p @ b
    support = p > 0
    np.fill_diagonal(support, False)
    return support


def homophily_ratio(g, y: LabelVector, l: int = 1) -> float:
    """Fraction of hop-l adjacent node pairs that share a label.

    Raises ValueError when no pair is adjacent at hop l (a 0/0 ratio would
    be meaningless).
    """
    support = hop_support(g, l)
    total = int(support.sum())
    if total == 0:
        raise ValueError(f"no pairs at hop {l}: homophily ratio undefined")
    same = y.labels[:, None] == y.labels[None, :]
    return float(np.logical_and(support, same).sum() / total)


def joint_hop_homophily(g, y: LabelVector) -> float:
    """Label agreement over pairs that are adjacent at both hop 1 and hop 2."""
    joint = np.logical_and(hop_support(g, 1), hop_support(g, 2))
    total = int(joint.sum())
    if total == 0:
        raise ValueError("no pairs adjacent at both hop 1 and hop 2")
    same = y.labels[:, None] == y.labels[None, :]
    return float(np.logical_and(joint, same).sum() / total)


def _row_normalize(F: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(F, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    out = F / safe[:, None]
    out[norms == 0] = 0.0  # zero rows stay zero: cosine against anything is 0
    return out


def neighbor_similarities(F, g, l: int = 1) -> np.ndarray:
    """Cosine similarity of feature rows over every ordered hop-l pair."""
    F = np.asarray(F, dtype=np.float64)
    if not np.all(np.isfinite(F)):
        raise ValueError("features contain non-finite values")
    support = hop_support(g, l)
    ii, jj = np.nonzero(support)
    if ii.size == 0:
        raise ValueError(f"no pairs at hop {l}: neighbor similarity undefined")
    Fn = _row_normalize(F)
    return np.einsum("ij,ij->i", Fn[ii], Fn[jj])


def avg_neighbor_similarity(F, g, l: int = 1) -> float:
    """Mean cosine similarity of features across hop-l adjacent pairs."""
    return float(neighbor_similarities(F, g, l).mean())
