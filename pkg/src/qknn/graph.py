"""K-nearest-neighbor graph construction and the oriented incidence operator.

The graph joins i and j whenever either point is among the other's K nearest
neighbors (symmetric "or" rule).  Edges are stored as (i, j) pairs with
i < j in lexicographic order; the incidence operator maps a vertex vector to
the per-edge differences theta_i - theta_j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc

from .errors import DimensionError, InputError, ParameterError

_CHUNK = 256  # rows per block in the pairwise distance scan


@dataclass
class Dataset:
    """Covariate matrix X (n x d) and response vector y (length n)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise InputError("X must be a nonempty 2-D array")
        if self.y.ndim != 1 or self.y.shape[0] != self.X.shape[0]:
            raise DimensionError(
                f"y has length {self.y.shape[0]}, expected {self.X.shape[0]}"
            )
        if not np.all(np.isfinite(self.X)):
            raise InputError("X contains non-finite entries")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass
class KnnGraph:
    """Undirected K-NN graph with a fixed edge orientation.

    Immutable after construction; safe to share across threads.  The sparse
    incidence matrix and its squared spectral norm are cached lazily.
    """

    n: int
    k: int
    edges: np.ndarray  # (m, 2) int array, each row (i, j) with i < j
    metric_id: str = "euclidean"
    _incidence: sp.csr_matrix | None = field(
        default=None, repr=False, compare=False
    )
    _norm_sq: float | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)

    @property
    def m(self) -> int:
        return self.edges.shape[0]

    def incidence(self) -> sp.csr_matrix:
        """Oriented incidence matrix (m x n): row p is +1 at i, -1 at j."""
        if self._incidence is None:
            m = self.m
            rows = np.repeat(np.arange(m), 2)
            cols = self.edges.ravel()
            vals = np.tile([1.0, -1.0], m)
            self._incidence = sp.csr_matrix(
                (vals, (rows, cols)), shape=(m, self.n)
            )
        return self._incidence

    def incidence_norm_sq(self, tol: float = 1e-6, max_iter: int = 500) -> float:
        """Squared spectral norm of the incidence matrix, by power iteration."""
        if self._norm_sq is None:
            if self.m == 0:
                self._norm_sq = 0.0
                return self._norm_sq
            D = self.incidence()
            rng = np.random.default_rng(0)
            v = rng.standard_normal(self.n)
            v /= np.linalg.norm(v)
            lam = 0.0
            for _ in range(max_iter):
                w = D.T @ (D @ v)
                lam_new = float(v @ w)
                nw = np.linalg.norm(w)
                if nw == 0.0:
                    lam_new = 0.0
                    break
                v = w / nw
                if abs(lam_new - lam) <= tol * max(lam_new, 1.0):
                    lam = lam_new
                    break
                lam = lam_new
            self._norm_sq = lam
        return self._norm_sq


def _knn_indices(X: np.ndarray, Q: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest rows of X to each row of Q.

    Exact O(|Q| * n * d) scan; ties broken by smaller index (lexicographic
    sort on (distance, index)).  Self-matches are not excluded here.
    """
    n = X.shape[0]
    out = np.empty((Q.shape[0], k), dtype=np.int64)
    idx = np.arange(n)
    for start in range(0, Q.shape[0], _CHUNK):
        block = Q[start : start + _CHUNK]
        diff = block[:, None, :] - X[None, :, :]
        d2 = np.einsum("qnd,qnd->qn", diff, diff)
        for r in range(block.shape[0]):
            order = np.lexsort((idx, d2[r]))
            out[start + r] = order[:k]
    return out


def build_knn_graph(
    X: np.ndarray, k: int, metric_id: str = "euclidean"
) -> KnnGraph:
    """Build the symmetric K-NN graph from covariate rows.

    Edge (i, j) is present iff i is among the k nearest neighbors of j or
    vice versa.  Deterministic: distance ties are broken by smaller index.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if metric_id != "euclidean":
        raise ParameterError(f"unsupported metric {metric_id!r}")
    if not (1 <= k <= n - 1):
        raise ParameterError(f"k={k} must satisfy 1 <= k <= n-1={n - 1}")
    if not np.all(np.isfinite(X)):
        raise InputError("covariates contain non-finite entries")

    # k+1 nearest including self, then drop self from each row.
    nbrs = _knn_indices(X, X, k + 1)
    pairs = set()
    for i in range(n):
        cnt = 0
        for j in nbrs[i]:
            if j == i:
                continue
            pairs.add((min(i, j), max(i, j)))
            cnt += 1
            if cnt == k:
                break
    edges = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    return KnnGraph(n=n, k=k, edges=edges, metric_id=metric_id)


def incidence_apply(G: KnnGraph, theta: np.ndarray) -> np.ndarray:
    """Per-edge differences theta_i - theta_j, in edge-list order."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (G.n,):
        raise DimensionError(f"theta has shape {theta.shape}, expected ({G.n},)")
    return G.incidence() @ theta


def incidence_transpose_apply(G: KnnGraph, w: np.ndarray) -> np.ndarray:
    """Adjoint of incidence_apply: vertex i gets +w_p per edge (i,.), -w_p per (.,i)."""
    w = np.asarray(w, dtype=float)
    if w.shape != (G.m,):
        raise DimensionError(f"w has shape {w.shape}, expected ({G.m},)")
    return G.incidence().T @ w


def connected_components(
    G: KnnGraph, active: np.ndarray
) -> tuple[int, np.ndarray]:
    """Components of the subgraph keeping only edges where `active` is true.

    Labels are deterministic: a component's id is its smallest member vertex.
    """
    active = np.asarray(active, dtype=bool)
    if active.shape != (G.m,):
        raise DimensionError(f"mask has shape {active.shape}, expected ({G.m},)")
    kept = G.edges[active]
    adj = sp.csr_matrix(
        (np.ones(kept.shape[0]), (kept[:, 0], kept[:, 1])), shape=(G.n, G.n)
    )
    count, raw = _cc(adj, directed=False)
    # relabel: component id = smallest vertex index in the component
    labels = np.empty(G.n, dtype=np.int64)
    for c in range(count):
        members = np.nonzero(raw == c)[0]
        labels[members] = members[0]
    return count, labels


def predict(
    train_X: np.ndarray,
    theta: np.ndarray,
    query_X: np.ndarray,
    k: int,
) -> np.ndarray:
    """K-NN prediction: average fitted value over the k nearest training points."""
    train_X = np.asarray(train_X, dtype=float)
    if train_X.ndim == 1:
        train_X = train_X[:, None]
    query_X = np.asarray(query_X, dtype=float)
    if query_X.ndim == 1:
        query_X = query_X[:, None]
    theta = np.asarray(theta, dtype=float)
    n = train_X.shape[0]
    if theta.shape != (n,):
        raise DimensionError(f"theta has shape {theta.shape}, expected ({n},)")
    if not (1 <= k <= n):
        raise ParameterError(f"k={k} must satisfy 1 <= k <= n={n}")
    if not (np.all(np.isfinite(train_X)) and np.all(np.isfinite(query_X))):
        raise InputError("non-finite coordinates")
    nbrs = _knn_indices(train_X, query_X, k)
    return theta[nbrs].mean(axis=1)


def save_edge_list(G: KnnGraph, path) -> None:
    """Write the graph as text: header line, then one '<i> <j>' pair per line."""
    with open(path, "w") as fh:
        fh.write(f"knn-graph n={G.n} k={G.k} m={G.m}\n")
        for i, j in G.edges:
            fh.write(f"{i} {j}\n")


def load_edge_list(path) -> KnnGraph:
    """Read a graph written by :func:`save_edge_list`."""
    with open(path) as fh:
        header = fh.readline().split()
        if not header or header[0] != "knn-graph":
            raise InputError(f"{path}: not a knn-graph edge list")
        meta = dict(tok.split("=") for tok in header[1:])
        n, k, m = int(meta["n"]), int(meta["k"]), int(meta["m"])
        edges = np.loadtxt(fh, dtype=np.int64, ndmin=2)
    if edges.size == 0:
        edges = np.empty((0, 2), dtype=np.int64)
    if edges.shape[0] != m:
        raise InputError(f"{path}: header says m={m}, found {edges.shape[0]} edges")
    return KnnGraph(n=n, k=k, edges=edges)
