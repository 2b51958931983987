"""Reconstruction of a heterophilic and a homophilic graph from raw data.

The heterophilic graph pairs nodes that are far apart in both feature space
and topology space: elementwise product of the complements of the cosine
similarity matrix and the normalized adjacency, sparsified to the m most
dissimilar partners per node.

The homophilic graph is a row-stochastic matrix S minimizing, per row,

    sum_j  S_ij * K_ij + S_ij^2 + (S2_ij - S_ij)^2        (S2 = S @ S)

subject to S_ij >= 0 and sum_j S_ij = 1, with S_ii pinned to 0. The feature
distance term pulls edges toward similar nodes; the S2 term aligns 1-hop
with 2-hop neighborhoods. Each outer iteration freezes S2 and the cross-row
couplings at the previous iterate and updates every row through a clamped
closed-form expression whose simplex multiplier is found by bisection.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .graphs import NormalizedGraph

ROW_SUM_TOL = 1e-10
MAX_BRACKET_DOUBLINGS = 10**6
MAX_BISECT_ITERS = 500


class SolverError(RuntimeError):
    """Raised when the row multiplier search cannot bracket or converge."""


@dataclass(frozen=True)
class SimilarityMatrix:
    """Pairwise cosine similarities of node features, values in [-1, 1]."""

    w: np.ndarray

    @property
    def n(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class HeterophilicGraph:
    """Sparse dissimilarity graph: at most m positive entries per row."""

    h: np.ndarray
    m: int
    degenerate: bool = False


@dataclass(frozen=True)
class HomophilicGraph:
    """Row-stochastic similarity graph with zero diagonal."""

    s: np.ndarray
    iterations_run: int
    residual: float


@dataclass(frozen=True)
class ReconstructedGraphs:
    homophilic: HomophilicGraph
    heterophilic: HeterophilicGraph
    similarity: SimilarityMatrix


@dataclass(frozen=True)
class RowSubproblem:
    """Frozen per-row problem data for the closed-form update.

    The update for row i, column j reads

        S_ij = [ (2*s2_row_j + lambda2 - k_row_j - 2*cross_row_j) / denom_j ]_+

    cross_row_j aggregates sum_{f != j} S_jf * C_f with the C_f coupling
    constants taken at the frozen iterate and C_f = 0 at f = i; denom_j is
    2*(2 + sum_{f != j} S_jf^2) and is strictly positive.
    """

    i: int
    k_row: np.ndarray
    s2_row: np.ndarray
    cross_row: np.ndarray
    denom: np.ndarray


def cosine_similarity_matrix(X) -> SimilarityMatrix:
    """Cosine similarity of every feature-row pair.

    Zero-norm rows get similarity 0 against everything; every diagonal entry
    is set to exactly 1.
    """
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    norms = np.linalg.norm(X, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    Xn = X / safe[:, None]
    Xn[norms == 0] = 0.0
    w = np.clip(Xn @ Xn.T, -1.0, 1.0)
    w = 0.5 * (w + w.T)
    np.fill_diagonal(w, 1.0)
    return SimilarityMatrix(w=w)


def build_heterophilic(w: SimilarityMatrix, a: NormalizedGraph, m: int = 5) -> HeterophilicGraph:
    """Keep, per node, the m partners most dissimilar in feature and topology.

    The dense score is (1 - W) * (1 - A) with the diagonal zeroed; larger
    score means more dissimilar. Ties break toward the smaller column index.
    When n - 1 <= m every off-diagonal entry is kept.
    """
    if m < 1:
        raise ValueError("edge budget m must be >= 1")
    if w.w.shape != a.a_norm.shape:
        raise ValueError("similarity and adjacency shapes differ")
    n = w.n
    h_full = (1.0 - w.w) * (1.0 - a.a_norm)
    np.fill_diagonal(h_full, 0.0)
    h_full = np.maximum(h_full, 0.0)
    h_full[h_full < 1e-12] = 0.0  # rounding residue of exact complements

    if n - 1 <= m:
        h = h_full
    else:
        h = np.zeros_like(h_full)
        for i in range(n):
            # stable argsort on the negated row: descending value, ties by index
            order = np.argsort(-h_full[i], kind="stable")
            keep = order[:m]
            h[i, keep] = h_full[i, keep]

    degenerate = not np.any(h > 0)
    if degenerate:
        warnings.warn("degenerate heterophilic graph: all dissimilarity scores are zero")
    return HeterophilicGraph(h=h, m=m, degenerate=degenerate)


def squared_distance_matrix(X) -> np.ndarray:
    """Matrix of squared Euclidean distances between feature rows."""
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    sq = np.einsum("ij,ij->i", X, X)
    K = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    K = 0.5 * (K + K.T)
    np.maximum(K, 0.0, out=K)
    np.fill_diagonal(K, 0.0)
    return K


def row_update(sub: RowSubproblem, lambda2: float) -> np.ndarray:
    """Clamped closed-form row for a given value of the simplex multiplier."""
    row = (2.0 * sub.s2_row + lambda2 - sub.k_row - 2.0 * sub.cross_row) / sub.denom
    np.maximum(row, 0.0, out=row)
    row[sub.i] = 0.0
    return row


def _clamped_sums(lin: np.ndarray, denom: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Row sums of the clamped update for per-row multipliers lam.

    lin holds the constant part of each numerator with the excluded diagonal
    position set to -inf so it can never activate.
    """
    vals = (lin + lam[:, None]) / denom[None, :]
    return np.maximum(vals, 0.0).sum(axis=1)


def _solve_lambda_batch(lin: np.ndarray, denom: np.ndarray) -> np.ndarray:
    """Per-row bisection for the multiplier making each clamped row sum to 1.

    The row sum is continuous, piecewise linear and nondecreasing in the
    multiplier. The lower bracket zeroes every numerator (sum 0); the upper
    bracket is found by doubling an offset until the sum reaches 1.
    """
    rows = lin.shape[0]
    lo = -np.max(lin, axis=1)  # all numerators <= 0, row sum exactly 0
    if not np.all(np.isfinite(lo)):
        raise SolverError("row numerators are not finite: cannot bracket multiplier")

    step = np.ones(rows)
    hi = lo + step
    for _ in range(MAX_BRACKET_DOUBLINGS):
        sums = _clamped_sums(lin, denom, hi)
        short = sums < 1.0
        if not np.any(short):
            break
        step[short] *= 2.0
        hi[short] = lo[short] + step[short]
    else:
        raise SolverError("bracket expansion exceeded doubling budget (malformed denominators?)")

    lam = 0.5 * (lo + hi)
    for _ in range(MAX_BISECT_ITERS):
        sums = _clamped_sums(lin, denom, lam)
        err = sums - 1.0
        if np.all(np.abs(err) <= ROW_SUM_TOL):
            return lam
        over = err > 0.0
        hi = np.where(over, lam, hi)
        lo = np.where(over, lo, lam)
        lam = 0.5 * (lo + hi)
    raise SolverError("bisection failed to reach the row-sum tolerance")


def _lin_matrix(sub: RowSubproblem) -> np.ndarray:
    lin = 2.0 * sub.s2_row - sub.k_row - 2.0 * sub.cross_row
    lin = lin[None, :].copy()
    lin[0, sub.i] = -np.inf
    return lin


def solve_lambda(sub: RowSubproblem) -> float:
    """Multiplier for which the clamped row sums to 1 within 1e-10."""
    return float(_solve_lambda_batch(_lin_matrix(sub), sub.denom)[0])


def _frozen_subproblem_parts(S: np.ndarray, K: np.ndarray):
    """Constant parts of every row subproblem at the frozen iterate S.

    Returns (lin, denom) with lin[i, j] = 2*S2_ij - K_ij - 2*cross_ij and
    cross_ij = sum_{f != j} S_jf * C_f(i, j), where

        C_f(i, j) = S2_if - S_ij * S_jf - S_if   (f != i),   C_i = 0.

    With a zero-diagonal S the f != j exclusion is vacuous, which lets the
    whole coupling collapse to matrix products:

        cross = (S2 - S) @ S.T - diag(S2 - S) * S.T - S * q + S * S.T^2

    with q the vector of squared row norms of S.
    """
    S2 = S @ S
    q = np.einsum("ij,ij->i", S, S)
    R = S2 - S
    cross = R @ S.T
    cross -= np.diagonal(R)[:, None] * S.T
    cross -= S * q[None, :]
    cross += S * (S.T**2)
    lin = 2.0 * S2 - K - 2.0 * cross
    denom = 2.0 * (2.0 + q)
    return lin, denom, S2, cross


def make_row_subproblem(S: np.ndarray, K: np.ndarray, i: int) -> RowSubproblem:
    """Freeze row i of the current iterate into a standalone subproblem."""
    _, denom, S2, cross = _frozen_subproblem_parts(S, K)
    return RowSubproblem(
        i=i, k_row=K[i].copy(), s2_row=S2[i].copy(), cross_row=cross[i].copy(), denom=denom
    )


def build_homophilic(X, a: NormalizedGraph, max_iters: int = 10, tol: float = 1e-4) -> HomophilicGraph:
    """Iterate the frozen-coupling row updates to a row-stochastic S.

    S starts as the normalized adjacency with its diagonal removed. Every
    outer iteration updates all rows from the same frozen iterate and stops
    when the largest row-wise L1 change drops below tol. Rows reach sum 1
    purely through the multiplier search, never by division.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    K = squared_distance_matrix(X)
    if not np.all(np.isfinite(K)):
        raise ValueError("non-finite feature distances")
    n = a.a_norm.shape[0]
    S = a.a_norm.copy()
    np.fill_diagonal(S, 0.0)

    residual = np.inf
    iterations = 0
    for _ in range(max_iters):
        lin, denom, _, _ = _frozen_subproblem_parts(S, K)
        lin_masked = lin.copy()
        np.fill_diagonal(lin_masked, -np.inf)
        lam = _solve_lambda_batch(lin_masked, denom)
        S_new = np.maximum((lin_masked + lam[:, None]) / denom[None, :], 0.0)
        np.fill_diagonal(S_new, 0.0)
        residual = float(np.abs(S_new - S).sum(axis=1).max())
        S = S_new
        iterations += 1
        if residual < tol:
            break
    return HomophilicGraph(s=S, iterations_run=iterations, residual=residual)


def reconstruct_graphs(
    X,
    a: NormalizedGraph,
    m: int = 5,
    max_iters: int = 10,
    tol: float = 1e-4,
) -> ReconstructedGraphs:
    """Full reconstruction: similarity matrix, heterophilic H, homophilic S."""
    w = cosine_similarity_matrix(X)
    hetero = build_heterophilic(w, a, m=m)
    homo = build_homophilic(X, a, max_iters=max_iters, tol=tol)
    return ReconstructedGraphs(homophilic=homo, heterophilic=hetero, similarity=w)
