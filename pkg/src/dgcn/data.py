"""Dataset loading/saving in a documented on-disk format, binary matrix
serialization, and a planted-partition generator with controllable homophily.

On-disk layout (paths resolved relative to the manifest file):
  manifest.json  {"name", "n", "d", "c", "features", "edges", "labels"|null}
  features       CSV, n rows of d comma-separated decimals, no header
  edges          TSV, one edge per line as "u<TAB>v[<TAB>w]" (w defaults 1),
                 symmetrized on load; self-loops are dropped with a warning
  labels         CSV, single column of n integer class ids
"""

import csv
import json
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graphs import Graph, LabelVector

_MATRIX_MAGIC = b"DGCNMAT1"


class DataFormatError(ValueError):
    """Malformed dataset file; message carries file, line, and column."""


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    n: int
    d: int
    c: int
    features: Path
    edges: Path
    labels: Path | None


@dataclass(frozen=True)
class NodeDataset:
    name: str
    features: np.ndarray
    graph: Graph
    labels: LabelVector | None
    clusters: int

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SynthConfig:
    n: int
    c: int
    d: int
    homophily: float
    mean_degree: float
    feature_noise: float
    seed: int = 0

    def __post_init__(self):
        if not self.n >= self.c >= 2:
            raise ValueError("need n >= c >= 2")
        if not 0.0 <= self.homophily <= 1.0:
            raise ValueError("target homophily must be in [0, 1]")
        if self.mean_degree < 1:
            raise ValueError("mean degree must be >= 1")
        if self.feature_noise < 0:
            raise ValueError("feature noise must be >= 0")
        if self.d < self.c:
            raise ValueError("need d >= c to place class means at unit distances")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise DataFormatError(f"{path}: manifest not found")
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON ({exc})")
    for key in ("name", "n", "d", "c", "features", "edges"):
        if key not in raw:
            raise DataFormatError(f"{path}: manifest missing key '{key}'")
    base = path.parent
    labels = raw.get("labels")
    return DatasetManifest(
        name=str(raw["name"]),
        n=int(raw["n"]),
        d=int(raw["d"]),
        c=int(raw["c"]),
        features=base / raw["features"],
        edges=base / raw["edges"],
        labels=base / labels if labels else None,
    )


def _read_features(path: Path, n: int, d: int) -> np.ndarray:
    X = np.empty((n, d))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        row_count = 0
        for line_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if row_count >= n:
                raise DataFormatError(f"{path}: more than {n} feature rows")
            if len(row) != d:
                raise DataFormatError(
                    f"{path}, line {line_no}: expected {d} columns, found {len(row)}"
                )
            for col, cell in enumerate(row, start=1):
                try:
                    X[row_count, col - 1] = float(cell)
                except ValueError:
                    raise DataFormatError(
                        f"{path}, line {line_no}, column {col}: non-numeric cell {cell!r}"
                    )
            row_count += 1
    if row_count != n:
        raise DataFormatError(f"{path}: expected {n} feature rows, found {row_count}")
    if not np.all(np.isfinite(X)):
        raise DataFormatError(f"{path}: features contain non-finite values")
    return X


def _read_edges(path: Path, n: int) -> np.ndarray:
    adj = np.zeros((n, n))
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise DataFormatError(
                    f"{path}, line {line_no}: expected 'u<TAB>v[<TAB>w]', found {line!r}"
                )
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise DataFormatError(f"{path}, line {line_no}: non-integer node id")
            if not (0 <= u < n and 0 <= v < n):
                raise DataFormatError(
                    f"{path}, line {line_no}: node id out of range [0, {n})"
                )
            w = 1.0
            if len(parts) == 3:
                try:
                    w = float(parts[2])
                except ValueError:
                    raise DataFormatError(
                        f"{path}, line {line_no}, column 3: non-numeric weight {parts[2]!r}"
                    )
            if w < 0:
                raise DataFormatError(f"{path}, line {line_no}: negative edge weight")
            if u == v:
                warnings.warn(f"{path}, line {line_no}: dropping self-loop on node {u}")
                continue
            adj[u, v] = w
            adj[v, u] = w
    return adj


def _read_labels(path: Path, n: int, c: int) -> LabelVector:
    values = np.empty(n, dtype=np.int64)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        count = 0
        for line_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if count >= n:
                raise DataFormatError(f"{path}: more than {n} label rows")
            try:
                values[count] = int(row[0])
            except ValueError:
                raise DataFormatError(
                    f"{path}, line {line_no}, column 1: non-integer label {row[0]!r}"
                )
            count += 1
    if count != n:
        raise DataFormatError(f"{path}: expected {n} labels, found {count}")
    if values.min() < 0 or values.max() >= c:
        raise DataFormatError(f"{path}: label ids must lie in [0, {c})")
    return LabelVector(labels=values, c=c)


def load_dataset(manifest_path) -> NodeDataset:
    """Load and shape-check a dataset against its manifest."""
    manifest = load_manifest(manifest_path)
    X = _read_features(manifest.features, manifest.n, manifest.d)
    adj = _read_edges(manifest.edges, manifest.n)
    labels = _read_labels(manifest.labels, manifest.n, manifest.c) if manifest.labels else None
    return NodeDataset(
        name=manifest.name,
        features=X,
        graph=Graph.from_adjacency(adj),
        labels=labels,
        clusters=manifest.c,
    )


def _class_sizes(n: int, c: int) -> np.ndarray:
    sizes = np.full(c, n // c, dtype=np.int64)
    sizes[: n % c] += 1
    return sizes


def synth_dataset(cfg: SynthConfig) -> NodeDataset:
    """Planted-partition graph with features around unit-separated class means.

    Within/cross edge probabilities are chosen so the expected 1-hop
    homophily equals the target at the requested mean degree. Raises with
    the feasible homophily range when the combination needs a probability
    above 1.
    """
    rng = np.random.default_rng(cfg.seed)
    sizes = _class_sizes(cfg.n, cfg.c)
    labels = np.repeat(np.arange(cfg.c), sizes)

    pairs_in = float((sizes * (sizes - 1) // 2).sum())
    pairs_total = cfg.n * (cfg.n - 1) / 2.0
    pairs_out = pairs_total - pairs_in
    edges_expected = cfg.n * cfg.mean_degree / 2.0

    p_in = cfg.homophily * edges_expected / pairs_in if pairs_in else 0.0
    p_out = (1.0 - cfg.homophily) * edges_expected / pairs_out if pairs_out else 0.0
    if p_in > 1.0 or p_out > 1.0:
        h_lo = max(0.0, 1.0 - pairs_out / edges_expected)
        h_hi = min(1.0, pairs_in / edges_expected)
        raise ValueError(
            f"infeasible homophily/degree combination: target {cfg.homophily} needs "
            f"edge probability > 1; feasible homophily range is [{h_lo:.4f}, {h_hi:.4f}]"
        )

    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_in, p_out)
    upper = np.triu(rng.random((cfg.n, cfg.n)) < prob, k=1)
    adj = (upper | upper.T).astype(np.float64)

    means = np.zeros((cfg.c, cfg.d))
    means[np.arange(cfg.c), np.arange(cfg.c)] = 1.0 / np.sqrt(2.0)  # pairwise distance 1
    X = means[labels] + cfg.feature_noise * rng.standard_normal((cfg.n, cfg.d))

    name = f"synth-n{cfg.n}-c{cfg.c}-h{cfg.homophily:g}-seed{cfg.seed}"
    return NodeDataset(
        name=name,
        features=X,
        graph=Graph.from_adjacency(adj),
        labels=LabelVector(labels=labels, c=cfg.c),
        clusters=cfg.c,
    )


def write_dataset(dataset: NodeDataset, out_dir) -> Path:
    """Write a dataset in the documented on-disk format; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "features.csv", dataset.features, delimiter=",", fmt="%.17g")
    with open(out / "edges.tsv", "w") as fh:
        ii, jj = np.nonzero(np.triu(dataset.graph.adj, k=1))
        for u, v in zip(ii.tolist(), jj.tolist()):
            w = dataset.graph.adj[u, v]
            if w == 1.0:
                fh.write(f"{u}\t{v}\n")
            else:
                fh.write(f"{u}\t{v}\t{w:.17g}\n")
    labels_name = None
    if dataset.labels is not None:
        labels_name = "labels.csv"
        np.savetxt(out / labels_name, dataset.labels.labels, fmt="%d")
    manifest = {
        "name": dataset.name,
        "n": dataset.n,
        "d": dataset.d,
        "c": dataset.clusters,
        "features": "features.csv",
        "edges": "edges.tsv",
        "labels": labels_name,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest_path


def save_matrix(path, M) -> None:
    """Binary matrix dump: 16-byte header (magic, rows, cols), float64 LE body."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("save_matrix expects a 2-D array")
    with open(path, "wb") as fh:
        fh.write(_MATRIX_MAGIC)
        fh.write(struct.pack("<II", M.shape[0], M.shape[1]))
        fh.write(np.ascontiguousarray(M, dtype="<f8").tobytes())


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MATRIX_MAGIC))
        if magic != _MATRIX_MAGIC:
            raise DataFormatError(f"{path}: bad magic, not a matrix file")
        header = fh.read(8)
        if len(header) != 8:
            raise DataFormatError(f"{path}: truncated header")
        rows, cols = struct.unpack("<II", header)
        body = fh.read(8 * rows * cols)
        if len(body) != 8 * rows * cols:
            raise DataFormatError(f"{path}: truncated body")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).copy()
