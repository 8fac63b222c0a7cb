"""Dataset loading, synthetic graph generation, and matrix/split persistence.

On-disk layout per dataset: a JSON manifest referencing an edge list
("u<TAB>v" lines), a label file ("node<TAB>class"), a split file (three lines
of space-separated node ids: train, val, test), and a feature matrix (binary
``.bin`` or whitespace text ``.txt``). ``GSR_DATA_DIR`` is the default root
for named datasets.
"""
from __future__ import annotations

import json
import os
import pickle
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import Graph, LabeledSplit

MATRIX_MAGIC = b"GSRDMAT\x01"
MATRIX_VERSION = 1
MANIFEST_VERSION = 1


class DataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# dense matrix files

def save_matrix(path, matrix: np.ndarray) -> None:
    """Binary dense matrix: magic, version, rows, cols, row-major f32 LE payload."""
    m = np.ascontiguousarray(matrix, dtype="<f4")
    if m.ndim != 2:
        raise DataError("save_matrix expects a 2-D matrix")
    with open(path, "wb") as f:
        f.write(MATRIX_MAGIC)
        f.write(struct.pack("<IQQ", MATRIX_VERSION, m.shape[0], m.shape[1]))
        f.write(m.tobytes())


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(len(MATRIX_MAGIC))
        if magic != MATRIX_MAGIC:
            raise DataError(f"{path}: bad matrix magic")
        version, rows, cols = struct.unpack("<IQQ", f.read(20))
        if version != MATRIX_VERSION:
            raise DataError(f"{path}: unsupported matrix version {version}")
        payload = f.read()
    expected = rows * cols * 4
    if len(payload) != expected:
        raise DataError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<f4").reshape(rows, cols).copy()


def save_matrix_text(path, matrix: np.ndarray) -> None:
    """Text variant for small fixtures: 'rows cols' header then one row per line."""
    m = np.asarray(matrix, dtype=np.float32)
    with open(path, "w") as f:
        f.write(f"{m.shape[0]} {m.shape[1]}\n")
        for row in m:
            f.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_matrix_text(path) -> np.ndarray:
    path = Path(path)
    with open(path) as f:
        header = f.readline().split()
        if len(header) != 2:
            raise DataError(f"{path}: bad text matrix header")
        rows, cols = int(header[0]), int(header[1])
        data = np.loadtxt(f, dtype=np.float32, ndmin=2) if rows else np.empty((0, cols), np.float32)
    if data.shape != (rows, cols):
        raise DataError(f"{path}: matrix body {data.shape} does not match header {(rows, cols)}")
    return data


def load_matrix_any(path) -> np.ndarray:
    path = Path(path)
    if path.suffix in (".txt", ".tsv"):
        return load_matrix_text(path)
    return load_matrix(path)


# ---------------------------------------------------------------------------
# manifests

@dataclass(frozen=True)
class DatasetManifest:
    name: str
    num_nodes: int
    num_classes: int
    feature_dim: int
    edges_path: str
    features_path: str
    labels_path: str
    split_path: str
    format_version: int = MANIFEST_VERSION

    @classmethod
    def read(cls, path) -> "DatasetManifest":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise DataError(f"{path}: cannot read manifest ({e})") from e
        try:
            m = cls(name=raw["name"], num_nodes=int(raw["num_nodes"]),
                    num_classes=int(raw["num_classes"]), feature_dim=int(raw["feature_dim"]),
                    edges_path=raw["edges"], features_path=raw["features"],
                    labels_path=raw["labels"], split_path=raw["split"],
                    format_version=int(raw.get("format_version", MANIFEST_VERSION)))
        except KeyError as e:
            raise DataError(f"{path}: manifest missing key {e}") from e
        if m.format_version != MANIFEST_VERSION:
            raise DataError(f"{path}: unsupported manifest version {m.format_version}")
        return m

    def write(self, path) -> None:
        doc = {"format_version": self.format_version, "name": self.name,
               "num_nodes": self.num_nodes, "num_classes": self.num_classes,
               "feature_dim": self.feature_dim, "edges": self.edges_path,
               "features": self.features_path, "labels": self.labels_path,
               "split": self.split_path}
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def write_edge_list(path, edges: np.ndarray) -> None:
    with open(path, "w") as f:
        for u, v in edges:
            f.write(f"{u}\t{v}\n")


def read_edge_list(path) -> np.ndarray:
    rows = []
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{ln}: expected 'u<TAB>v'")
            rows.append((int(parts[0]), int(parts[1])))
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def write_labels(path, labels: np.ndarray) -> None:
    with open(path, "w") as f:
        for node, cls in enumerate(labels):
            f.write(f"{node}\t{cls}\n")


def read_labels(path, num_nodes: int) -> np.ndarray:
    labels = np.full(num_nodes, -1, dtype=np.int64)
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{ln}: expected 'node<TAB>class'")
            node, cls = int(parts[0]), int(parts[1])
            if not 0 <= node < num_nodes:
                raise DataError(f"{path}:{ln}: node {node} out of range")
            labels[node] = cls
    return labels


def write_split(path, split: LabeledSplit) -> None:
    with open(path, "w") as f:
        for mask in (split.train_mask, split.val_mask, split.test_mask):
            f.write(" ".join(str(i) for i in np.flatnonzero(mask)) + "\n")


def read_split(path, labels: np.ndarray) -> LabeledSplit:
    path = Path(path)
    lines = path.read_text().splitlines()
    if len(lines) < 3:
        raise DataError(f"{path}: split file needs three lines (train, val, test)")
    masks = []
    n = len(labels)
    for line in lines[:3]:
        mask = np.zeros(n, dtype=bool)
        ids = [int(x) for x in line.split()] if line.strip() else []
        for i in ids:
            if not 0 <= i < n:
                raise DataError(f"{path}: split node {i} out of range")
        mask[ids] = True
        masks.append(mask)
    return LabeledSplit(labels=labels, train_mask=masks[0], val_mask=masks[1],
                        test_mask=masks[2])


def load_dataset(manifest_path) -> tuple[Graph, np.ndarray, LabeledSplit]:
    """Load (graph, feature matrix X^F, labeled split) from a manifest.

    Edges are symmetrized and deduplicated; dimension/label/mask
    inconsistencies raise errors naming the offending file.
    """
    manifest_path = Path(manifest_path)
    m = DatasetManifest.read(manifest_path)
    base = manifest_path.parent
    for rel in (m.edges_path, m.features_path, m.labels_path, m.split_path):
        if not (base / rel).exists():
            raise DataError(f"{manifest_path}: referenced file {rel} does not exist")
    edges = read_edge_list(base / m.edges_path)
    g = Graph.from_edges(m.num_nodes, edges)
    x = load_matrix_any(base / m.features_path)
    if x.shape != (m.num_nodes, m.feature_dim):
        raise DataError(f"{base / m.features_path}: features {x.shape} do not match "
                        f"manifest ({m.num_nodes}, {m.feature_dim})")
    labels = read_labels(base / m.labels_path, m.num_nodes)
    if (labels >= m.num_classes).any():
        raise DataError(f"{base / m.labels_path}: label out of range "
                        f"[0, {m.num_classes})")
    split = read_split(base / m.split_path, labels)
    return g, x, split


def resolve_dataset(ref: str) -> Path:
    """Manifest path from a direct path or a named dataset under GSR_DATA_DIR."""
    p = Path(ref)
    if p.is_file():
        return p
    if p.is_dir() and (p / "manifest.json").is_file():
        return p / "manifest.json"
    root = os.environ.get("GSR_DATA_DIR")
    if root:
        cand = Path(root) / ref / "manifest.json"
        if cand.is_file():
            return cand
    raise DataError(f"cannot resolve dataset '{ref}' "
                    f"(not a manifest path; GSR_DATA_DIR={root or 'unset'})")


# ---------------------------------------------------------------------------
# synthetic graphs

@dataclass(frozen=True)
class SbmMetadata:
    """Planted structure of a generated SBM: block ids and injected noise edges."""

    blocks: np.ndarray
    noise_edges: np.ndarray
    clean_edge_count: int


def generate_sbm(block_sizes, p_in: float, p_out: float, feature_dim: int,
                 feature_signal: float, noise_edge_fraction: float, seed: int
                 ) -> tuple[Graph, np.ndarray, LabeledSplit, SbmMetadata]:
    """Two-level stochastic block model surrogate.

    Within/cross-block edges are Bernoulli(p_in)/Bernoulli(p_out); afterwards
    ``round(noise_edge_fraction * |E|)`` extra cross-block non-edges are
    injected and recorded as noise. Features are ``feature_signal`` times the
    block mean plus unit Gaussian noise. Stratified 10/20/70 split.
    """
    if not (0 <= p_in <= 1 and 0 <= p_out <= 1):
        raise DataError("edge probabilities must lie in [0, 1]")
    if noise_edge_fraction < 0:
        raise DataError("noise_edge_fraction must be >= 0")
    rng = np.random.default_rng(seed)
    block_sizes = list(block_sizes)
    n = sum(block_sizes)
    blocks = np.repeat(np.arange(len(block_sizes)), block_sizes)

    iu, ju = np.triu_indices(n, 1)
    same = blocks[iu] == blocks[ju]
    p = np.where(same, p_in, p_out)
    keep = rng.random(len(iu)) < p
    edges = np.stack([iu[keep], ju[keep]], axis=1)

    n_clean = len(edges)
    n_noise = int(round(noise_edge_fraction * n_clean))
    cross_nonedge = np.flatnonzero(~same & ~keep)
    if n_noise > len(cross_nonedge):
        raise DataError("not enough cross-block non-edges for requested noise")
    noise_idx = rng.choice(len(cross_nonedge), size=n_noise, replace=False) if n_noise else []
    sel = cross_nonedge[np.sort(noise_idx)] if n_noise else np.empty(0, dtype=np.int64)
    noise_edges = np.stack([iu[sel], ju[sel]], axis=1) if n_noise else np.empty((0, 2), np.int64)
    all_edges = np.concatenate([edges, noise_edges], axis=0)
    g = Graph.from_edges(n, all_edges)

    means = rng.standard_normal((len(block_sizes), feature_dim))
    x = (feature_signal * means[blocks]
         + rng.standard_normal((n, feature_dim))).astype(np.float32)

    split = stratified_split(blocks, fractions=(0.1, 0.2), seed=int(rng.integers(2**31)))
    meta = SbmMetadata(blocks=blocks, noise_edges=noise_edges, clean_edge_count=n_clean)
    return g, x, split, meta


def stratified_split(labels: np.ndarray, fractions=(0.1, 0.2), seed: int = 0) -> LabeledSplit:
    """Per-class train/val fractions; the remainder is test."""
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels)
    n = len(labels)
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        n_tr = max(1, int(round(fractions[0] * len(idx))))
        n_va = max(1, int(round(fractions[1] * len(idx))))
        train[idx[:n_tr]] = True
        val[idx[n_tr:n_tr + n_va]] = True
        test[idx[n_tr + n_va:]] = True
    return LabeledSplit(labels=labels.astype(np.int64), train_mask=train,
                        val_mask=val, test_mask=test)


def export_split_by_ratio(labels: np.ndarray, train_ratio: float, seed: int) -> LabeledSplit:
    """Stratified train split of ceil(ratio * n_c) per class; rest split 50/50
    into val/test."""
    labels = np.asarray(labels, dtype=np.int64)
    if train_ratio <= 0 or train_ratio > 1:
        raise DataError("train_ratio must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    n = len(labels)
    train = np.zeros(n, dtype=bool)
    for c in np.unique(labels):
        if c < 0:
            continue
        idx = np.flatnonzero(labels == c)
        n_tr = int(np.ceil(train_ratio * len(idx)))
        if n_tr == 0:
            raise DataError(f"class {c} gets zero train nodes; "
                            f"use ratio >= {1.0 / len(idx):.4f}")
        idx = idx[rng.permutation(len(idx))]
        train[idx[:n_tr]] = True
    rest = np.flatnonzero(~train & (labels >= 0))
    rest = rest[rng.permutation(len(rest))]
    half = (len(rest) + 1) // 2
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    val[rest[:half]] = True
    test[rest[half:]] = True
    return LabeledSplit(labels=labels, train_mask=train, val_mask=val, test_mask=test)


def write_dataset(out_dir, name: str, g: Graph, x: np.ndarray, split: LabeledSplit) -> Path:
    """Persist a dataset in the manifest layout; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_list(out / "edges.tsv", g.edges)
    save_matrix(out / "features.bin", x)
    write_labels(out / "labels.tsv", split.labels)
    write_split(out / "split.txt", split)
    manifest = DatasetManifest(
        name=name, num_nodes=g.num_nodes, num_classes=split.num_classes,
        feature_dim=x.shape[1], edges_path="edges.tsv", features_path="features.bin",
        labels_path="labels.tsv", split_path="split.txt")
    manifest.write(out / "manifest.json")
    return out / "manifest.json"


# ---------------------------------------------------------------------------
# converter for the standard citation benchmark distribution

_PLANETOID_PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph")


def convert_planetoid(raw_dir, name: str, out_dir) -> Path:
    """Convert the widespread pickled citation benchmark files (ind.<name>.*)
    into the manifest layout.

    Applies the usual fixes: reindexed test rows, gaps in the test index
    range (isolated nodes get zero rows), L1 row-normalized features.
    """
    raw = Path(raw_dir)
    objs = {}
    for part in _PLANETOID_PARTS:
        p = raw / f"ind.{name}.{part}"
        if not p.exists():
            raise DataError(f"missing raw file {p}")
        with open(p, "rb") as f, warnings.catch_warnings():
            # the upstream pickles reference pre-1.8 scipy module paths
            warnings.simplefilter("ignore", DeprecationWarning)
            objs[part] = pickle.load(f, encoding="latin1")
    test_idx = np.loadtxt(raw / f"ind.{name}.test.index", dtype=np.int64)

    allx, tx = sp.csr_matrix(objs["allx"]), sp.csr_matrix(objs["tx"])
    ally, ty = np.asarray(objs["ally"]), np.asarray(objs["ty"])
    lo, hi = int(test_idx.min()), int(test_idx.max())
    if lo != allx.shape[0]:
        raise DataError(f"unexpected layout: test ids start at {lo}, "
                        f"allx has {allx.shape[0]} rows")
    span = hi - lo + 1
    n = allx.shape[0] + span

    # tx row j belongs to graph node test_idx[j]; ids missing from the test
    # index range (isolated nodes in some datasets) keep zero rows
    tx_full = sp.lil_matrix((span, tx.shape[1]), dtype=np.float64)
    tx_full[test_idx - lo] = tx
    ty_full = np.zeros((span, ty.shape[1]), dtype=ty.dtype)
    ty_full[test_idx - lo] = ty

    x = sp.vstack([allx, tx_full.tocsr()]).tocsr().astype(np.float64)
    onehot = np.vstack([ally, ty_full])

    row_sums = np.asarray(x.sum(axis=1)).ravel()
    scale = np.divide(1.0, row_sums, out=np.zeros_like(row_sums), where=row_sums > 0)
    x = sp.diags(scale) @ x
    labels = onehot.argmax(axis=1).astype(np.int64)

    pairs = [(u, v) for u, nbrs in objs["graph"].items() for v in nbrs]
    g = Graph.from_edges(n, np.array(pairs, dtype=np.int64))

    n_train = objs["x"].shape[0]
    train = np.zeros(n, dtype=bool)
    train[:n_train] = True
    val = np.zeros(n, dtype=bool)
    val[n_train:n_train + 500] = True
    test = np.zeros(n, dtype=bool)
    test[test_idx] = True
    split = LabeledSplit(labels=labels, train_mask=train, val_mask=val, test_mask=test)

    return write_dataset(out_dir, name, g, np.asarray(x.todense(), dtype=np.float32), split)
