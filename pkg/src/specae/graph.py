"""Attributed graphs, citation-format I/O and the normalised propagation operator."""

import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse

from .errors import DimensionError, ParseError
from .tensor import sparse_matmul

log = logging.getLogger(__name__)


def _canonical_edges(edges, n):
    """Sorted unique undirected pairs ``(i, j)`` with ``i < j``; self-loops dropped."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise DimensionError(f"edge endpoint outside [0, {n})")
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    keep = lo != hi
    pairs = np.stack([lo[keep], hi[keep]], axis=1)
    if pairs.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(pairs, axis=0)


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Undirected graph with a dense ``n x m`` attribute matrix.

    ``edges`` holds each undirected edge once as ``(i, j)`` with ``i < j``.
    ``labels`` is an optional per-node class tag (e.g. publication category).
    """

    X: np.ndarray
    edges: np.ndarray
    labels: np.ndarray = None
    node_ids: tuple = None
    dropped_edges: int = field(default=0, compare=False)

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise DimensionError(f"attribute matrix must be 2-D, got shape {X.shape}")
        X.setflags(write=False)
        n = X.shape[0]
        edges = _canonical_edges(self.edges, n)
        edges.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "edges", edges)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (n,):
                raise DimensionError(f"expected {n} labels, got shape {labels.shape}")
            object.__setattr__(self, "labels", labels)
        ids = self.node_ids
        ids = tuple(str(i) for i in range(n)) if ids is None else tuple(str(i) for i in ids)
        if len(ids) != n:
            raise DimensionError(f"expected {n} node ids, got {len(ids)}")
        object.__setattr__(self, "node_ids", ids)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def m(self):
        return self.X.shape[1]

    @property
    def num_edges(self):
        return len(self.edges)

    def adjacency(self):
        """Binary symmetric adjacency in CSR form, without self-loops."""
        i, j = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * len(i))
        adj = scipy.sparse.coo_matrix(
            (data, (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(self.n, self.n)
        )
        return adj.tocsr()

    def neighbors(self, node):
        adj = self.adjacency()
        return adj.indices[adj.indptr[node]:adj.indptr[node + 1]]

    def with_attributes(self, X):
        """Copy of the graph with the attribute matrix replaced; topology untouched."""
        return replace(self, X=X)


@dataclass(frozen=True, eq=False)
class PropagationMatrix:
    """``D^-1/2 (A + I) D^-1/2`` as a CSR matrix, with ``D`` the self-looped degrees."""

    matrix: scipy.sparse.csr_matrix
    degrees: np.ndarray

    @property
    def n(self):
        return self.matrix.shape[0]

    def toarray(self):
        return self.matrix.toarray()

    def stationary_vector(self):
        """The vector ``sqrt(D_ii)``, which the operator maps to itself."""
        return np.sqrt(self.degrees)


def normalize_propagation(graph):
    adj = graph.adjacency() + scipy.sparse.identity(graph.n, format="csr")
    deg = np.asarray(adj.sum(axis=1)).ravel()
    inv_sqrt = scipy.sparse.diags(1.0 / np.sqrt(deg))
    S = (inv_sqrt @ adj @ inv_sqrt).tocsr()
    S.sort_indices()
    return PropagationMatrix(S, deg)


def propagate(S, X):
    """Sparse-dense product ``S X`` (differentiable in ``X``)."""
    if X.rows != S.n:
        raise DimensionError(f"propagate: operator has {S.n} nodes, input has {X.rows} rows")
    return sparse_matmul(S.matrix, X)


# -- citation-format I/O -----------------------------------------------------------


def load_citation_dataset(content_path, cites_path):
    """Read a ``.content`` / ``.cites`` pair.

    Content rows are ``id <tab> attr_1 ... attr_m <tab> label``; cites rows
    are ``cited_id <tab> citing_id``.  Citations become undirected edges and
    citations mentioning unknown ids are dropped (the count is logged and
    kept in ``dropped_edges``).
    """
    ids, rows, labels = [], [], []
    width = None
    try:
        with open(content_path) as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) < 3:
                    raise ParseError("expected id, attributes and label", content_path, lineno)
                if width is None:
                    width = len(parts) - 2
                elif len(parts) - 2 != width:
                    raise ParseError(
                        f"expected {width} attributes, found {len(parts) - 2}", content_path, lineno
                    )
                try:
                    rows.append([float(v) for v in parts[1:-1]])
                except ValueError:
                    raise ParseError("non-numeric attribute", content_path, lineno) from None
                ids.append(parts[0])
                labels.append(parts[-1])
    except OSError as exc:
        raise ParseError(f"cannot read content file: {exc}", content_path) from None
    if not ids:
        raise ParseError("no nodes found", content_path)
    index = {node: i for i, node in enumerate(ids)}
    if len(index) != len(ids):
        raise ParseError("duplicate node id", content_path)

    edges, dropped = [], 0
    try:
        with open(cites_path) as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 2:
                    raise ParseError("expected two ids per line", cites_path, lineno)
                a, b = index.get(parts[0]), index.get(parts[1])
                if a is None or b is None:
                    dropped += 1
                    continue
                edges.append((a, b))
    except OSError as exc:
        raise ParseError(f"cannot read cites file: {exc}", cites_path) from None
    if dropped:
        log.warning("dropped %d citation(s) referencing unknown node ids", dropped)
    return AttributedGraph(
        X=np.array(rows),
        edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
        labels=np.array(labels),
        node_ids=tuple(ids),
        dropped_edges=dropped,
    )


def _format_value(v):
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def save_citation_dataset(graph, content_path, cites_path):
    """Write ``graph`` in the format read by :func:`load_citation_dataset`."""
    labels = graph.labels if graph.labels is not None else ["none"] * graph.n
    with open(content_path, "w") as fh:
        for node, row, label in zip(graph.node_ids, graph.X, labels):
            fh.write("\t".join([node, *(_format_value(v) for v in row), str(label)]) + "\n")
    with open(cites_path, "w") as fh:
        for i, j in graph.edges:
            fh.write(f"{graph.node_ids[i]}\t{graph.node_ids[j]}\n")


def find_dataset_files(source):
    """Resolve a dataset name or path into ``(content_path, cites_path)``.

    ``source`` may be a directory holding one ``*.content`` and one
    ``*.cites`` file, a path prefix (``data/cora`` -> ``data/cora.content``),
    or a bare name looked up under ``$SPECAE_DATA_DIR``.
    """
    candidates = [source]
    root = os.environ.get("SPECAE_DATA_DIR")
    if root and not os.path.isabs(source):
        candidates += [os.path.join(root, source), os.path.join(root, source, source)]
    for cand in candidates:
        if os.path.isdir(cand):
            files = sorted(os.listdir(cand))
            content = [f for f in files if f.endswith(".content")]
            cites = [f for f in files if f.endswith(".cites")]
            if len(content) == 1 and len(cites) == 1:
                return os.path.join(cand, content[0]), os.path.join(cand, cites[0])
        if os.path.isfile(cand + ".content") and os.path.isfile(cand + ".cites"):
            return cand + ".content", cand + ".cites"
    raise ParseError(f"dataset {source!r} not found (set SPECAE_DATA_DIR or pass a path)")
