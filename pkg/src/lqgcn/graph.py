"""Undirected graph container and the transforms that feed the encoder.

The graph is stored once as a symmetric binary CSR adjacency with no
self-loops; every edge is also kept as a (u, v) pair with u < v so the
losses can iterate edges without touching the matrix. All derived
matrices are new objects; nothing here mutates a graph after
construction, so instances are safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .kernel import as_dense


@dataclass
class Graph:
    """Immutable undirected graph.

    ``edges_u``/``edges_v`` list each undirected edge exactly once with
    ``edges_u[i] < edges_v[i]``; ``edge_codes`` holds the sorted linear
    codes ``u * n_nodes + v`` for O(log E) membership tests.
    """

    n_nodes: int
    adj: sp.csr_matrix
    degree: np.ndarray
    edges_u: np.ndarray
    edges_v: np.ndarray
    edge_codes: np.ndarray = field(repr=False, default=None)

    @property
    def n_edges(self) -> int:
        return int(self.edges_u.shape[0])

    @property
    def edges(self):
        return self.edges_u, self.edges_v

    @classmethod
    def from_edges(cls, n_nodes: int, pairs) -> "Graph":
        """Build a graph from integer index pairs.

        Duplicate and reversed-duplicate pairs collapse to a single
        undirected edge. Self-loops are rejected here; file loaders drop
        them (with a warning) before calling in.
        """
        n = int(n_nodes)
        if n <= 0:
            raise ValueError("n_nodes must be positive")
        arr = np.asarray(pairs, dtype=np.int64)
        if arr.size == 0:
            arr = arr.reshape(0, 2)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError(f"edge pairs must have shape (m, 2), got {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ValueError("node id out of range")
        if np.any(arr[:, 0] == arr[:, 1]):
            raise ValueError("self-loops are not allowed in the base adjacency")
        lo = arr.min(axis=1)
        hi = arr.max(axis=1)
        codes = np.unique(lo * np.int64(n) + hi)
        u = (codes // n).astype(np.int64)
        v = (codes % n).astype(np.int64)
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        data = np.ones(rows.shape[0], dtype=np.float64)
        adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
        adj.sort_indices()
        degree = np.asarray(adj.getnnz(axis=1), dtype=np.int64)
        for a in (degree, u, v, codes):
            a.setflags(write=False)
        return cls(n_nodes=n, adj=adj, degree=degree, edges_u=u, edges_v=v, edge_codes=codes)


def validate_graph(g: Graph) -> None:
    """Raise ValueError if any structural invariant is violated."""
    if (g.adj != g.adj.T).nnz != 0:
        raise ValueError("adjacency is not symmetric")
    if np.any(g.adj.diagonal() != 0):
        raise ValueError("adjacency stores self-loops")
    if not np.array_equal(np.asarray(g.adj.getnnz(axis=1)), g.degree):
        raise ValueError("degree vector does not match adjacency")
    if g.adj.nnz != 2 * g.n_edges:
        raise ValueError("edge list does not match adjacency")


def degree_vector(g: Graph) -> np.ndarray:
    """Per-node neighbor counts."""
    return g.degree.copy()


@dataclass
class NormalizedAdjacency:
    """I + D^{-1/2} A D^{-1/2} in CSR form.

    The diagonal is exactly 1 (the identity is added symbolically, never
    through degree arithmetic); rows of isolated nodes contain only the
    diagonal. ``transform`` records which construction produced the matrix.
    """

    matrix: sp.csr_matrix
    transform: str = "identity_plus_sym_norm"


def normalize_adjacency(g: Graph) -> NormalizedAdjacency:
    """Symmetric degree normalization with a unit diagonal.

    Isolated nodes are skipped rather than divided by zero: their row is
    just the diagonal 1.
    """
    d = g.degree.astype(np.float64)
    inv_sqrt = np.zeros_like(d)
    nz = d > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(d[nz])
    scaled = g.adj.multiply(inv_sqrt[:, None]).multiply(inv_sqrt[None, :]).tocsr()
    abar = (sp.identity(g.n_nodes, format="csr", dtype=np.float64) + scaled).tocsr()
    abar.sort_indices()
    return NormalizedAdjacency(matrix=abar)


def augment_adjacency(g: Graph) -> sp.csr_matrix:
    """Raw adjacency plus the identity (self-loops added, no rescaling)."""
    aplus = (g.adj + sp.identity(g.n_nodes, format="csr", dtype=np.float64)).tocsr()
    aplus.sort_indices()
    return aplus


def row_l2_normalize(x) -> np.ndarray:
    """Divide each row by its Euclidean norm; all-zero rows pass through."""
    arr = as_dense(x, "feature matrix")
    norms = np.linalg.norm(arr, axis=1)
    scale = np.ones_like(norms)
    nz = norms > 0
    scale[nz] = 1.0 / norms[nz]
    return arr * scale[:, None]


def features_from_inputs(g: Graph, x, mode: str) -> np.ndarray:
    """Materialize model input features for the three input variants.

    ``x``: the attribute matrix alone. ``g``: each node's adjacency row
    (d = n_nodes). ``u``: adjacency rows concatenated with the attribute
    columns. The g/u variants densify adjacency rows and are only meant
    for graphs that comfortably fit in memory as N x N.
    """
    if mode == "x":
        if x is None:
            raise ValueError("input variant 'x' requires an attribute matrix")
        feats = as_dense(x, "feature matrix")
    elif mode == "g":
        feats = g.adj.toarray()
    elif mode == "u":
        if x is None:
            raise ValueError("input variant 'u' requires an attribute matrix")
        feats = np.hstack([g.adj.toarray(), as_dense(x, "feature matrix")])
    else:
        raise ValueError(f"unknown input variant {mode!r}; expected 'x', 'g', or 'u'")
    if feats.shape[0] != g.n_nodes:
        raise ValueError(
            f"feature row count {feats.shape[0]} does not match n_nodes {g.n_nodes}"
        )
    return feats
