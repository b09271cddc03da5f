"""Ground-truth anomaly injection and the synthetic stochastic-block-model fixture."""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ParseError, UnsupportedOperation
from .graph import AttributedGraph

log = logging.getLogger(__name__)

TAU_CORR = 0.1
MAX_RETRIES = 100
RELAX_FACTOR = 1.5


@dataclass(frozen=True)
class InjectionRecord:
    """Which nodes were overwritten, and how.

    ``donors[i]`` is the node whose attributes were copied onto the i-th
    community anomaly.  ``tau`` is the (possibly relaxed) correlation
    threshold the global anomalies satisfy.
    """

    global_ids: tuple = ()
    community_ids: tuple = ()
    donors: tuple = ()
    ratio: float = 0.0
    seed: int = None
    tau: float = TAU_CORR

    def __post_init__(self):
        if set(self.global_ids) & set(self.community_ids):
            raise ContractError("global and community anomaly sets overlap")

    @property
    def anomalies(self):
        return tuple(sorted(self.global_ids + self.community_ids))

    def truth(self, n):
        flags = np.zeros(n, dtype=np.int64)
        flags[list(self.anomalies)] = 1
        return flags

    def to_text(self, node_ids=None):
        name = (lambda i: node_ids[i]) if node_ids is not None else str
        lines = [
            "# specae injection record v1",
            f"ratio={self.ratio!r}",
            f"seed={self.seed}",
            f"tau={self.tau!r}",
            f"global_count={len(self.global_ids)}",
            f"community_count={len(self.community_ids)}",
        ]
        lines += [f"global\t{i}\t{name(i)}" for i in self.global_ids]
        lines += [f"community\t{i}\t{name(i)}\t{j}" for i, j in zip(self.community_ids, self.donors)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        head, glob, comm, donors = {}, [], [], []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if parts[0] == "global":
                glob.append(int(parts[1]))
            elif parts[0] == "community":
                comm.append(int(parts[1]))
                donors.append(int(parts[3]))
            elif "=" in line:
                key, value = line.split("=", 1)
                head[key] = value
            else:
                raise ParseError("unrecognised injection line", line=lineno)
        seed = head.get("seed", "None")
        return cls(
            tuple(glob), tuple(comm), tuple(donors),
            float(head.get("ratio", 0.0)),
            None if seed == "None" else int(seed),
            float(head.get("tau", TAU_CORR)),
        )


def _max_cosine(row, block):
    norms = np.linalg.norm(block, axis=1) * np.linalg.norm(row)
    dots = block @ row
    cos = np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)
    return cos.max()


def _pick(pool, m, rng):
    pool = np.asarray(pool)
    if m > len(pool):
        raise ContractError(f"cannot pick {m} nodes from {len(pool)} candidates")
    return np.sort(rng.choice(pool, size=m, replace=False))


def inject_global(graph, m, rng, tau=TAU_CORR, exclude=(), max_retries=MAX_RETRIES):
    """Overwrite ``m`` random nodes with synthetic low-correlation attribute rows.

    Each synthetic row activates a random subset of attributes whose size
    matches the mean row density; the active entries are resampled from the
    dataset's non-zero attribute values (all ones for binary bag-of-words).
    A row is accepted when its cosine similarity to the node's original row
    and to every neighbour's row is at most ``tau``.  After ``max_retries``
    rejections the threshold for that node is relaxed by 1.5x with a
    warning; the record keeps the loosest threshold used.
    """
    if not 0 <= m < graph.n:
        raise ContractError(f"need 0 <= m < n, got m={m}, n={graph.n}")
    if m == 0:
        return graph, InjectionRecord(tau=tau)
    X = graph.X
    nonzero = X[X != 0]
    if nonzero.size == 0:
        raise UnsupportedOperation("attribute matrix is all zeros")
    width = max(1, int(round(np.count_nonzero(X) / graph.n)))
    pool = np.setdiff1d(np.arange(graph.n), np.asarray(exclude, dtype=np.int64))
    chosen = _pick(pool, m, rng)
    adj = graph.adjacency()
    new_X = X.copy()
    loosest = tau
    for i in chosen:
        hood = np.concatenate([[i], adj.indices[adj.indptr[i]:adj.indptr[i + 1]]])
        block = X[hood]
        node_tau = tau
        attempts = 0
        while True:
            row = np.zeros(graph.m)
            cols = rng.choice(graph.m, size=width, replace=False)
            row[cols] = rng.choice(nonzero, size=width)
            if _max_cosine(row, block) <= node_tau:
                break
            attempts += 1
            if attempts >= max_retries:
                node_tau *= RELAX_FACTOR
                attempts = 0
                log.warning("relaxing correlation threshold to %.4g for node %d", node_tau, i)
        loosest = max(loosest, node_tau)
        new_X[i] = row
    record = InjectionRecord(global_ids=tuple(int(i) for i in chosen), tau=loosest)
    return graph.with_attributes(new_X), record


def inject_community(graph, m, rng, exclude=()):
    """Copy onto ``m`` random nodes the attributes of a node from another class.

    Edges are left untouched, so each anomaly keeps its original neighbours.
    """
    if not 0 <= m < graph.n:
        raise ContractError(f"need 0 <= m < n, got m={m}, n={graph.n}")
    if m == 0:
        return graph, InjectionRecord()
    if graph.labels is None:
        raise UnsupportedOperation("community injection needs node class labels")
    labels = graph.labels
    if len(np.unique(labels)) < 2:
        raise UnsupportedOperation("community injection needs at least two classes")
    pool = np.setdiff1d(np.arange(graph.n), np.asarray(exclude, dtype=np.int64))
    chosen = _pick(pool, m, rng)
    new_X = graph.X.copy()
    donors = []
    for i in chosen:
        others = np.flatnonzero(labels != labels[i])
        j = int(rng.choice(others))
        new_X[i] = graph.X[j]
        donors.append(j)
    record = InjectionRecord(community_ids=tuple(int(i) for i in chosen), donors=tuple(donors))
    return graph.with_attributes(new_X), record


def per_type_count(n, ratio):
    """Anomalies injected per type for a total ``ratio``: ``floor(ratio * n / 2)``."""
    return int(np.floor(ratio * n / 2 + 1e-9))


def inject_anomalies(graph, ratio, rng, seed=None, tau=TAU_CORR):
    """Inject equal numbers of global and community anomalies (disjoint sets)."""
    m = per_type_count(graph.n, ratio)
    g1, rec_g = inject_global(graph, m, rng, tau=tau)
    g2, rec_c = inject_community(g1, m, rng, exclude=rec_g.global_ids)
    if m:
        # donors must come from the pre-injection attributes
        X = g2.X.copy()
        X[list(rec_c.community_ids)] = graph.X[list(rec_c.donors)]
        g2 = g2.with_attributes(X)
    record = InjectionRecord(
        rec_g.global_ids, rec_c.community_ids, rec_c.donors, ratio, seed, rec_g.tau
    )
    return g2, record


def generate_sbm(communities, nodes_per, p_in, p_out, attr_dim, rng, mean_scale=1.0):
    """Stochastic block model with Gaussian community attributes.

    Node ``i`` belongs to community ``i // nodes_per``.  Its attributes are
    the community mean (drawn once from N(0, mean_scale^2)) plus unit
    Gaussian noise.
    """
    if not 0.0 <= p_out < p_in <= 1.0:
        raise ContractError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    n = communities * nodes_per
    labels = np.repeat(np.arange(communities), nodes_per)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(len(iu)) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    means = rng.normal(0.0, mean_scale, size=(communities, attr_dim))
    X = means[labels] + rng.standard_normal((n, attr_dim))
    return AttributedGraph(X=X, edges=edges, labels=labels)
