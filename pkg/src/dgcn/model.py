"""Dual-encoder clustering network over filtered features and raw structure.

Two unshared MLP encoders map filtered node features and normalized
adjacency rows into separate subspaces; their concatenation feeds a decoder
and a Student-t soft cluster assignment. Training minimizes the unweighted
sum of three terms:

  cr   cross-view node-correlation pushed toward identity (anti-collapse)
  sce  scaled cosine error between features and their reconstruction
  clu  KL divergence from a sharpened self-training target to the assignment

The target distribution is refreshed from the current assignment every
epoch and treated as constant during differentiation.
"""

import warnings
from dataclasses import dataclass, asdict

import numpy as np

from .filters import FilterConfig, laplacian_of_reconstructed, low_pass, mixed_filter
from .graphs import NormalizedGraph, normalize_adjacency
from .metrics import evaluate_clustering, kmeans
from .nn import AdamState, Mlp, adam_step, backward, mlp_forward, mlp_init, save_params
from .reconstruct import ReconstructedGraphs, reconstruct_graphs

DEFAULT_HIDDEN = 256
DEFAULT_EMBED = 64


@dataclass
class TrainConfig:
    k: int
    mu: float
    beta: float = 1.0
    alpha: float = 1.0
    epochs: int = 500
    lr: float = 1e-2
    hidden: int = DEFAULT_HIDDEN
    embed: int = DEFAULT_EMBED
    seed: int = 0
    hetero_budget: int = 5
    homo_max_iters: int = 10
    homo_tol: float = 1e-4

    def __post_init__(self):
        FilterConfig(self.k, self.mu)  # validates ranges
        if self.beta < 1:
            raise ValueError("sharpening exponent beta must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.embed < 1 or self.hidden < 1:
            raise ValueError("layer widths must be positive")


@dataclass
class DgcnModel:
    enc_f: Mlp  # attribute encoder, input width d
    enc_a: Mlp  # structure encoder, input width n
    dec: Mlp  # decoder, input width 2*embed
    centroids: np.ndarray  # (c, 2*embed)
    alpha: float
    beta: float

    @classmethod
    def build(cls, d, n, c, hidden=DEFAULT_HIDDEN, embed=DEFAULT_EMBED, alpha=1.0, beta=1.0, seed=0):
        rng = np.random.default_rng(seed)
        return cls(
            enc_f=mlp_init((d, hidden, embed), rng),
            enc_a=mlp_init((n, hidden, embed), rng),
            dec=mlp_init((2 * embed, hidden, d), rng),
            centroids=np.zeros((c, 2 * embed)),
            alpha=alpha,
            beta=beta,
        )

    @property
    def embed_dim(self) -> int:
        return self.enc_f.out_dim


@dataclass(frozen=True)
class AssignmentMatrices:
    q: np.ndarray
    p: np.ndarray


def assignment_matrices(Z: np.ndarray, centroids: np.ndarray, alpha: float = 1.0) -> AssignmentMatrices:
    """Soft assignment and its sharpened self-training target."""
    q = soft_assignment(Z, centroids, alpha)
    return AssignmentMatrices(q=q, p=target_distribution(q))


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    cr: float
    sce: float
    clu: float


@dataclass
class TrainReport:
    losses: dict  # per-epoch traces: total, cr, sce, clu
    labels: np.ndarray
    acc: float | None
    nmi: float | None
    seed: int
    config: dict
    epochs_run: int

    def to_json_dict(self) -> dict:
        return {
            "losses": {k: list(map(float, v)) for k, v in self.losses.items()},
            "labels": [int(x) for x in self.labels],
            "acc": self.acc,
            "nmi": self.nmi,
            "seed": self.seed,
            "config": self.config,
            "epochs_run": self.epochs_run,
        }


def named_parameters(model: DgcnModel):
    """Flat (name, array) list covering both encoders, the decoder, and the
    cluster centroids; the order is the optimizer contract."""
    out = []
    for prefix, mlp in (("enc_f", model.enc_f), ("enc_a", model.enc_a), ("dec", model.dec)):
        for i, layer in enumerate(mlp.layers):
            out.append((f"{prefix}.{i}.weight", layer.weight))
            out.append((f"{prefix}.{i}.bias", layer.bias))
    out.append(("centroids", model.centroids))
    return out


def _safe_row_normalize(M: np.ndarray):
    norms = np.linalg.norm(M, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = M / safe[:, None]
    unit[norms == 0] = 0.0
    return unit, norms


def encode(model: DgcnModel, F: np.ndarray, A: np.ndarray):
    """Embeddings from both encoders plus their concatenation [Z_A | Z_F]."""
    Z_F, _ = mlp_forward(model.enc_f, F)
    Z_A, _ = mlp_forward(model.enc_a, A)
    return Z_F, Z_A, np.concatenate([Z_A, Z_F], axis=1)


def correlation_matrix(Z_A: np.ndarray, Z_F: np.ndarray) -> np.ndarray:
    """Cross-view cosine similarity: M_ij = cos(Z_A row i, Z_F row j)."""
    if Z_A.shape != Z_F.shape:
        raise ValueError("encoder output shapes differ")
    An, _ = _safe_row_normalize(Z_A)
    Bn, _ = _safe_row_normalize(Z_F)
    return An @ Bn.T


def loss_cr(M: np.ndarray) -> float:
    """Penalty for deviation of the cross-view correlation from identity."""
    n = M.shape[0]
    if n <= 1:
        raise ValueError("correlation loss needs at least 2 nodes")
    diag = np.diagonal(M)
    off_sq = (M**2).sum() - (diag**2).sum()
    return float(((diag - 1.0) ** 2).sum() / n**2 + off_sq / (n**2 - n))


def loss_cr_with_grads(Z_A: np.ndarray, Z_F: np.ndarray):
    """Correlation-reduction loss and its gradients w.r.t. both embeddings."""
    n = Z_A.shape[0]
    An, a_norms = _safe_row_normalize(Z_A)
    Bn, b_norms = _safe_row_normalize(Z_F)
    M = An @ Bn.T
    value = loss_cr(M)

    G = (2.0 / (n**2 - n)) * M
    idx = np.arange(n)
    G[idx, idx] = (2.0 / n**2) * (np.diagonal(M) - 1.0)

    gm = G * M
    dA = (G @ Bn - gm.sum(axis=1)[:, None] * An) / np.where(a_norms > 0, a_norms, 1.0)[:, None]
    dA[a_norms == 0] = 0.0
    dB = (G.T @ An - gm.sum(axis=0)[:, None] * Bn) / np.where(b_norms > 0, b_norms, 1.0)[:, None]
    dB[b_norms == 0] = 0.0
    return value, dA, dB


def _row_cosines(F: np.ndarray, F_hat: np.ndarray):
    Fn, f_norms = _safe_row_normalize(F)
    Gn, g_norms = _safe_row_normalize(F_hat)
    cos = np.einsum("ij,ij->i", Fn, Gn)
    return cos, Fn, Gn, f_norms, g_norms


def loss_sce(F: np.ndarray, F_hat: np.ndarray, beta: float) -> float:
    """Scaled cosine reconstruction error, summed over rows."""
    if beta < 1:
        raise ValueError("beta must be >= 1")
    if F.shape != F_hat.shape:
        raise ValueError("feature and reconstruction shapes differ")
    cos, *_ = _row_cosines(F, F_hat)
    return float(((1.0 - cos) ** beta).sum())


def loss_sce_with_grads(F: np.ndarray, F_hat: np.ndarray, beta: float):
    """Reconstruction loss and its gradient w.r.t. the reconstruction."""
    cos, Fn, Gn, _, g_norms = _row_cosines(F, F_hat)
    value = float(((1.0 - cos) ** beta).sum())
    coeff = -beta * (1.0 - cos) ** (beta - 1.0)
    dG = coeff[:, None] * (Fn - cos[:, None] * Gn) / np.where(g_norms > 0, g_norms, 1.0)[:, None]
    dG[g_norms == 0] = 0.0
    return value, dG


def _student_t_kernel(Z: np.ndarray, centroids: np.ndarray, alpha: float):
    diff = Z[:, None, :] - centroids[None, :, :]
    d2 = np.einsum("ncd,ncd->nc", diff, diff)
    T = 1.0 + d2 / alpha
    kernel = T ** (-(alpha + 1.0) / 2.0)
    return kernel, T


def soft_assignment(Z: np.ndarray, centroids: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    """Student-t similarity to each centroid, normalized per row."""
    if centroids.shape[0] < 2:
        raise ValueError("need at least 2 centroids")
    kernel, _ = _student_t_kernel(Z, centroids, alpha)
    return kernel / kernel.sum(axis=1, keepdims=True)


def target_distribution(q: np.ndarray) -> np.ndarray:
    """Self-training target: squared assignments normalized by cluster mass."""
    f = q.sum(axis=0)
    if np.any(f <= 0):
        warnings.warn("empty soft cluster in target distribution; flooring its mass")
        f = np.maximum(f, 1e-12)
    weight = q**2 / f[None, :]
    return weight / weight.sum(axis=1, keepdims=True)


def loss_clu(p: np.ndarray, q: np.ndarray) -> float:
    """KL divergence from the fixed target to the soft assignment."""
    if p.shape != q.shape:
        raise ValueError("target and assignment shapes differ")
    return float((p * (np.log(p) - np.log(q))).sum())


def loss_clu_with_grads(Z: np.ndarray, centroids: np.ndarray, alpha: float, p: np.ndarray):
    """Clustering loss plus gradients w.r.t. embeddings and centroids.

    The target p is a constant here; gradients flow only through the
    Student-t assignment.
    """
    kernel, T = _student_t_kernel(Z, centroids, alpha)
    q = kernel / kernel.sum(axis=1, keepdims=True)
    value = loss_clu(p, q)

    W = (p - q) / T  # (n, c)
    c0 = (alpha + 1.0) / alpha
    dZ = c0 * (W.sum(axis=1)[:, None] * Z - W @ centroids)
    dC = -c0 * (W.T @ Z - W.sum(axis=0)[:, None] * centroids)
    return value, dZ, dC, q


def assign(q: np.ndarray) -> np.ndarray:
    """Hard labels: per-row argmax, lowest cluster index on ties."""
    return q.argmax(axis=1).astype(np.int64)


def total_loss(model: DgcnModel, F: np.ndarray, A: np.ndarray, p: np.ndarray | None = None):
    """Full objective with gradients for every parameter.

    When p is None the target distribution is computed from the current
    assignment and frozen for this evaluation (the per-epoch refresh rule).
    Returns (LossBreakdown, grads, q) with grads keyed like
    named_parameters.
    """
    Z_F, tape_f = mlp_forward(model.enc_f, F)
    Z_A, tape_a = mlp_forward(model.enc_a, A)
    Z = np.concatenate([Z_A, Z_F], axis=1)
    F_hat, tape_d = mlp_forward(model.dec, Z)

    cr_value, dZA_cr, dZF_cr = loss_cr_with_grads(Z_A, Z_F)
    sce_value, dF_hat = loss_sce_with_grads(F, F_hat, model.beta)
    if p is None:
        q_now = soft_assignment(Z, model.centroids, model.alpha)
        p = target_distribution(q_now)
    clu_value, dZ_clu, dC, q = loss_clu_with_grads(Z, model.centroids, model.alpha, p)

    dec_grads, dZ_dec = backward(model.dec, tape_d, dF_hat)
    dZ = dZ_dec + dZ_clu
    emb = model.embed_dim
    dZA = dZ[:, :emb] + dZA_cr
    dZF = dZ[:, emb:] + dZF_cr
    enc_a_grads, _ = backward(model.enc_a, tape_a, dZA)
    enc_f_grads, _ = backward(model.enc_f, tape_f, dZF)

    grads = {}
    for prefix, layer_grads in (("enc_f", enc_f_grads), ("enc_a", enc_a_grads), ("dec", dec_grads)):
        for i, (dW, db) in enumerate(layer_grads):
            grads[f"{prefix}.{i}.weight"] = dW
            grads[f"{prefix}.{i}.bias"] = db
    grads["centroids"] = dC

    breakdown = LossBreakdown(
        total=cr_value + sce_value + clu_value, cr=cr_value, sce=sce_value, clu=clu_value
    )
    return breakdown, grads, q


def embedding_spread(Z: np.ndarray) -> float:
    """Mean per-dimension standard deviation across nodes; near zero means
    the representation collapsed."""
    return float(np.std(Z, axis=0).mean())


@dataclass(frozen=True)
class PipelineInputs:
    features: np.ndarray  # mixed-filter output, encoder input
    a_norm: np.ndarray  # structure encoder input: normalized raw adjacency
    normalized: NormalizedGraph
    reconstructed: ReconstructedGraphs


def prepare_inputs(dataset, cfg: TrainConfig, reconstructed: ReconstructedGraphs | None = None) -> PipelineInputs:
    """Reconstruct (unless supplied), filter, and expose the encoder inputs.

    The structure encoder always consumes the normalized raw adjacency; the
    reconstructed graphs only shape the feature filter. A degenerate
    heterophilic graph falls back to the pure low-pass filter.
    """
    norm = normalize_adjacency(dataset.graph)
    recon = reconstructed
    if recon is None:
        recon = reconstruct_graphs(
            dataset.features, norm, m=cfg.hetero_budget, max_iters=cfg.homo_max_iters, tol=cfg.homo_tol
        )
    L_S = laplacian_of_reconstructed(recon.homophilic.s).laplacian
    cfg_filter = FilterConfig(cfg.k, cfg.mu)
    if recon.heterophilic.degenerate:
        warnings.warn("degenerate heterophilic graph: filtering with the low-pass branch only")
        F = low_pass(dataset.features, L_S, cfg.k)
    else:
        L_H = laplacian_of_reconstructed(recon.heterophilic.h).laplacian
        F = mixed_filter(dataset.features, L_S, L_H, cfg_filter).f
    return PipelineInputs(features=F, a_norm=norm.a_norm, normalized=norm, reconstructed=recon)


INIT_KMEANS_RESTARTS = 10


def _init_centroids(Z: np.ndarray, c: int, seed: int) -> np.ndarray:
    """Best-inertia k-means over deterministic restarts; a single seeded run
    lands in poor local optima often enough to destabilize self-training."""
    best = None
    for attempt in range(INIT_KMEANS_RESTARTS):
        centroids, labels = kmeans(Z, c, seed=seed * INIT_KMEANS_RESTARTS + attempt)
        if len(np.unique(labels)) != c:
            continue
        inertia = float(((Z - centroids[labels]) ** 2).sum())
        if best is None or inertia < best[0]:
            best = (inertia, centroids)
    if best is None:
        raise RuntimeError(
            f"k-means produced an empty cluster in {INIT_KMEANS_RESTARTS} attempts"
        )
    return best[1]


def train(
    dataset,
    cfg: TrainConfig,
    reconstructed: ReconstructedGraphs | None = None,
    checkpoint_path=None,
) -> TrainReport:
    """Full training run: reconstruct, filter, k-means centroid init, then
    Adam on the joint objective with a per-epoch target refresh. The final
    parameters go to checkpoint_path when given."""
    pipe = prepare_inputs(dataset, cfg, reconstructed)
    F, A = pipe.features, pipe.a_norm
    n, d = F.shape
    c = dataset.clusters

    model = DgcnModel.build(
        d=d, n=n, c=c, hidden=cfg.hidden, embed=cfg.embed, alpha=cfg.alpha, beta=cfg.beta,
        seed=cfg.seed,
    )
    _, _, Z0 = encode(model, F, A)
    model.centroids = _init_centroids(Z0, c, cfg.seed)

    names = [name for name, _ in named_parameters(model)]
    params = [arr for _, arr in named_parameters(model)]
    state = AdamState.create(params, lr=cfg.lr)

    traces = {"total": [], "cr": [], "sce": [], "clu": []}
    q = None
    for _ in range(cfg.epochs):
        breakdown, grads, q = total_loss(model, F, A)
        traces["total"].append(breakdown.total)
        traces["cr"].append(breakdown.cr)
        traces["sce"].append(breakdown.sce)
        traces["clu"].append(breakdown.clu)
        adam_step(state, params, [grads[name] for name in names], names=names)

    _, _, Z_final = encode(model, F, A)
    labels = assign(assignment_matrices(Z_final, model.centroids, model.alpha).q)
    if checkpoint_path is not None:
        save_params(checkpoint_path, named_parameters(model), seed=cfg.seed)

    acc = nmi_val = None
    if dataset.labels is not None:
        report = evaluate_clustering(labels, dataset.labels.labels)
        acc, nmi_val = report.acc, report.nmi

    return TrainReport(
        losses=traces,
        labels=labels,
        acc=acc,
        nmi=nmi_val,
        seed=cfg.seed,
        config=asdict(cfg),
        epochs_run=cfg.epochs,
    )
