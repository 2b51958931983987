"""Graph-agnostic node clustering: reconstruct homophilic and heterophilic
graphs from raw attributed-graph data, filter features through a mixed
low/high-pass spectral operator, and cluster with a dual-encoder network."""

from .graphs import (
    Graph,
    LabelVector,
    NormalizedGraph,
    avg_neighbor_similarity,
    homophily_ratio,
    joint_hop_homophily,
    normalize_adjacency,
)
from .reconstruct import (
    HeterophilicGraph,
    HomophilicGraph,
    ReconstructedGraphs,
    SimilarityMatrix,
    build_heterophilic,
    build_homophilic,
    cosine_similarity_matrix,
    reconstruct_graphs,
    squared_distance_matrix,
)
from .filters import FilterConfig, FilteredFeatures, high_pass, laplacian_of_reconstructed, low_pass, mixed_filter
from .metrics import MetricReport, clustering_accuracy, evaluate_clustering, kmeans, nmi
from .data import NodeDataset, SynthConfig, load_dataset, load_matrix, save_matrix, synth_dataset, write_dataset
from .model import (
    AssignmentMatrices,
    DgcnModel,
    TrainConfig,
    TrainReport,
    assign,
    assignment_matrices,
    encode,
    loss_clu,
    loss_cr,
    loss_sce,
    soft_assignment,
    target_distribution,
    total_loss,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Graph",
    "LabelVector",
    "NormalizedGraph",
    "normalize_adjacency",
    "homophily_ratio",
    "joint_hop_homophily",
    "avg_neighbor_similarity",
    "SimilarityMatrix",
    "HeterophilicGraph",
    "HomophilicGraph",
    "ReconstructedGraphs",
    "cosine_similarity_matrix",
    "build_heterophilic",
    "build_homophilic",
    "squared_distance_matrix",
    "reconstruct_graphs",
    "FilterConfig",
    "FilteredFeatures",
    "laplacian_of_reconstructed",
    "low_pass",
    "high_pass",
    "mixed_filter",
    "MetricReport",
    "kmeans",
    "clustering_accuracy",
    "nmi",
    "evaluate_clustering",
    "NodeDataset",
    "SynthConfig",
    "load_dataset",
    "synth_dataset",
    "write_dataset",
    "save_matrix",
    "load_matrix",
    "AssignmentMatrices",
    "assignment_matrices",
    "DgcnModel",
    "TrainConfig",
    "TrainReport",
    "encode",
    "soft_assignment",
    "target_distribution",
    "loss_cr",
    "loss_sce",
    "loss_clu",
    "total_loss",
    "assign",
    "train",
]
