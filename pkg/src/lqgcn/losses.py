"""Training objectives, each returning (value, gradient w.r.t. F).

Two losses drive the affiliation matrix F (n x k, nonnegative):

* the balanced Bernoulli-Poisson reconstruction loss: under the model,
  an edge (i, j) exists with probability 1 - exp(-f_i . f_j). The loss
  averages -log(1 - exp(-f_i . f_j)) over observed edges and f_i . f_j
  over absent pairs, so the two classes carry equal weight on sparse
  graphs. Inner products are clamped below at 1e-10 inside the log so
  the all-zero F stays finite.

* the local-modularity contrast loss: with the modularity operator
  B = A - d d^T / (2|E|) applied implicitly and a per-community scaling S
  (ratio of total edges to the community's affiliation-weighted incident
  edge mass), the k x k matrix M = S F^T B F / (4|E|) scores
  within-community structure on its diagonal and cross-community structure
  off it; row s of M is the community's modularity mass normalized by its
  own edge neighborhood. The loss pushes each diagonal entry up and the
  entry against the cyclic successor community down, through a logistic
  squash so every log stays defined.

`modularity_q` (plain Newman modularity of a discrete cover) is exposed
as a diagnostic only; it is not part of any training objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .graph import Graph
from .kernel import log1mexp, neg_inv_expm1
from .metrics import Cover

LOG_CLAMP = 1e-10
SCALING_FLOOR = 1e-9
MAX_BRUTEFORCE_NODES = 2000


def _check_affiliations(f, graph: Graph) -> np.ndarray:
    arr = np.asarray(f, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"affiliation matrix must be 2-d, got shape {arr.shape}")
    if arr.shape[0] != graph.n_nodes:
        raise ValueError(
            f"affiliation rows {arr.shape[0]} do not match n_nodes {graph.n_nodes}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("affiliation matrix contains non-finite entries")
    if arr.size and arr.min() < 0:
        raise ValueError("affiliation matrix must be nonnegative")
    return arr


def _edge_products(f, u, v):
    return np.einsum("ij,ij->i", f[u], f[v])


def _symmetric_edge_matrix(n, u, v, w):
    m = sp.csr_matrix((w, (u, v)), shape=(n, n))
    return m + m.T


def bp_loss_bruteforce(f, graph: Graph):
    """Reconstruction loss by explicit enumeration of all node pairs.

    Oracle-grade O(n^2) reference: the unnormalized sum of edge log-terms
    and non-edge inner products over unordered pairs. Guarded to small
    graphs so it cannot sneak into a training path.
    """
    f = _check_affiliations(f, graph)
    n = graph.n_nodes
    if n > MAX_BRUTEFORCE_NODES:
        raise ValueError(f"brute-force loss is capped at {MAX_BRUTEFORCE_NODES} nodes")
    gram = f @ f.T
    dense = graph.adj.toarray() > 0
    iu, jv = np.triu_indices(n, k=1)
    is_edge = dense[iu, jv]
    x = gram[iu, jv]
    value = float(-log1mexp(np.maximum(x[is_edge], LOG_CLAMP)).sum() + x[~is_edge].sum())
    coef = np.ones((n, n))
    np.fill_diagonal(coef, 0.0)
    edge_coef = neg_inv_expm1(np.maximum(gram, LOG_CLAMP))
    coef[dense] = edge_coef[dense]
    grad = coef @ f
    return value, grad


def bp_loss_balanced(f, graph: Graph, n_samples: int | None = None, rng=None):
    """Class-balanced reconstruction loss.

    Exact mode (``n_samples=None``) averages the edge term over the edge
    list and computes the non-edge average in O(nk) through the identity
    sum_{i != j} f_i . f_j = ||sum_i f_i||^2 - sum_i ||f_i||^2, minus the
    edge contribution. Sampled mode draws ``n_samples`` edges and
    ``n_samples`` non-edges uniformly with replacement (non-edges by
    rejection against the adjacency); it is unbiased for the exact value.
    """
    f = _check_affiliations(f, graph)
    n = graph.n_nodes
    n_pairs = n * (n - 1) // 2
    if graph.n_edges == 0 or n_pairs - graph.n_edges == 0:
        raise ValueError("balanced loss needs at least one edge and one non-edge")
    if n_samples is None:
        return _bp_exact(f, graph)
    if rng is None:
        raise ValueError("the sampled estimator requires an rng")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    return _bp_sampled(f, graph, int(n_samples), rng)


def _bp_exact(f, graph: Graph):
    n = graph.n_nodes
    m_edges = graph.n_edges
    m_non = n * (n - 1) // 2 - m_edges
    u, v = graph.edges
    x = _edge_products(f, u, v)
    xc = np.maximum(x, LOG_CLAMP)
    value_edges = float(-log1mexp(xc).mean())
    col = f.sum(axis=0)
    off_total = float(col @ col - np.einsum("ij,ij->", f, f))
    value_non = (0.5 * off_total - float(x.sum())) / m_non
    value = value_edges + value_non
    coef = neg_inv_expm1(xc) / m_edges
    grad = _symmetric_edge_matrix(n, u, v, coef) @ f
    grad += (col[None, :] - f - graph.adj @ f) / m_non
    return value, grad


def _sample_non_edges(graph: Graph, count: int, rng):
    """Uniform draws (with replacement) over unordered non-adjacent pairs."""
    n = graph.n_nodes
    codes = graph.edge_codes
    out_u = np.empty(count, dtype=np.int64)
    out_v = np.empty(count, dtype=np.int64)
    got = 0
    while got < count:
        batch = max(2 * (count - got), 64)
        i = rng.integers(0, n, size=batch)
        j = rng.integers(0, n, size=batch)
        lo = np.minimum(i, j)
        hi = np.maximum(i, j)
        c = lo * np.int64(n) + hi
        pos = np.searchsorted(codes, c)
        pos_clip = np.minimum(pos, len(codes) - 1)
        is_edge = codes[pos_clip] == c
        keep = (lo != hi) & ~is_edge
        lo, hi = lo[keep], hi[keep]
        take = min(count - got, lo.shape[0])
        out_u[got : got + take] = lo[:take]
        out_v[got : got + take] = hi[:take]
        got += take
    return out_u, out_v


def _bp_sampled(f, graph: Graph, n_samples: int, rng):
    n = graph.n_nodes
    u, v = graph.edges
    idx = rng.integers(0, graph.n_edges, size=n_samples)
    eu, ev = u[idx], v[idx]
    xe = np.maximum(_edge_products(f, eu, ev), LOG_CLAMP)
    nu, nv = _sample_non_edges(graph, n_samples, rng)
    xn = _edge_products(f, nu, nv)
    value = float(-log1mexp(xe).mean() + xn.mean())
    coef = neg_inv_expm1(xe) / n_samples
    acc = _symmetric_edge_matrix(n, eu, ev, coef)
    acc = acc + _symmetric_edge_matrix(n, nu, nv, np.full(n_samples, 1.0 / n_samples))
    return value, acc @ f


@dataclass
class ModularityMatrixB:
    """Modularity operator A - d d^T / (2|E|); never densified.

    Applying it to a dense block costs O(|E| k + n k). It annihilates
    constant vectors exactly: A 1 = d and d (d^T 1) / (2|E|) = d.
    """

    adj: sp.csr_matrix
    degree: np.ndarray
    n_edges: int

    def apply(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=np.float64)
        two_m = 2.0 * self.n_edges
        if m.ndim == 1:
            return self.adj @ m - self.degree * (float(self.degree @ m) / two_m)
        return self.adj @ m - np.outer(self.degree, (self.degree @ m) / two_m)


def build_B(graph: Graph) -> ModularityMatrixB:
    if graph.n_edges == 0:
        raise ValueError("modularity operator needs at least one edge")
    return ModularityMatrixB(
        adj=graph.adj, degree=graph.degree.astype(np.float64), n_edges=graph.n_edges
    )


@dataclass
class LocalScalingS:
    """Diagonal per-community scaling |E| / max(neighborhood mass, floor).

    The neighborhood mass of community s is the affiliation-weighted count
    of edges incident to it: sum over edges (i, j) of max(fhat_is, fhat_js),
    where fhat is F with each nonzero row rescaled to max 1. For an
    indicator F this is exactly the number of edges touching the community.
    ``floored`` marks communities whose mass hit the floor (no affiliation
    anywhere), which makes the scaling huge but finite.
    """

    values: np.ndarray
    neighborhood_mass: np.ndarray
    floored: np.ndarray


def build_S(f, graph: Graph) -> LocalScalingS:
    f = _check_affiliations(f, graph)
    if graph.n_edges == 0:
        raise ValueError("scaling needs at least one edge")
    rowmax = f.max(axis=1) if f.size else np.zeros(graph.n_nodes)
    scale = np.ones_like(rowmax)
    nz = rowmax > 0
    scale[nz] = 1.0 / rowmax[nz]
    fhat = f * scale[:, None]
    u, v = graph.edges
    mass = np.maximum(fhat[u], fhat[v]).sum(axis=0)
    floored = mass < SCALING_FLOOR
    values = graph.n_edges / np.maximum(mass, SCALING_FLOOR)
    return LocalScalingS(values=values, neighborhood_mass=mass, floored=floored)


def lq_matrix(f, graph: Graph, scaling: LocalScalingS | None = None) -> np.ndarray:
    """k x k local-modularity matrix S F^T B F / (4|E|).

    Row s is scaled by S_ss; the diagonal scores within-community
    structure, off-diagonal entries score community pairs.
    """
    f = _check_affiliations(f, graph)
    b = build_B(graph)
    s = scaling if scaling is not None else build_S(f, graph)
    q = f.T @ b.apply(f)
    return (s.values[:, None] * q) / (4.0 * graph.n_edges)


def lq_loss(f, graph: Graph, scaling: LocalScalingS | None = None):
    """Contrast loss on the local-modularity matrix.

    Diagonal entries are treated as logits of "this community is
    internally dense" (target 1) and each entry against the cyclic
    successor community as a logit of "these two are the same" (target 0):

        value = -(1/2k) sum_s [ log sig(M_ss) + log(1 - sig(M_{s,s+1})) ]

    computed through logaddexp so it is finite for any finite M. The
    scaling S is a constant of the current iterate: gradients do not flow
    through it. Finite-difference checks must pass the frozen ``scaling``.
    """
    f = _check_affiliations(f, graph)
    k = f.shape[1]
    if k < 2:
        raise ValueError("the contrast loss needs at least 2 communities")
    b = build_B(graph)
    s = scaling if scaling is not None else build_S(f, graph)
    bf = b.apply(f)
    pref = 1.0 / (4.0 * graph.n_edges)
    m = s.values[:, None] * (f.T @ bf) * pref
    ar = np.arange(k)
    nxt = (ar + 1) % k
    diag = m[ar, ar]
    off = m[ar, nxt]
    value = float((np.logaddexp(0.0, -diag).sum() + np.logaddexp(0.0, off).sum()) / (2.0 * k))
    gm = np.zeros((k, k))
    gm[ar, ar] = -expit(-diag) / (2.0 * k)
    gm[ar, nxt] += expit(off) / (2.0 * k)
    h = s.values[:, None] * gm * pref
    grad = bf @ (h + h.T)
    return value, grad


def modularity_q(cover: Cover, graph: Graph) -> float:
    """Newman modularity of a cover (diagnostic; overlaps sum per community)."""
    if graph.n_edges == 0:
        raise ValueError("modularity is undefined on an edgeless graph")
    if cover.n_nodes != graph.n_nodes:
        raise ValueError("cover does not match the graph's node count")
    m = float(graph.n_edges)
    u, v = graph.edges
    total = 0.0
    for members in cover.communities:
        if not members:
            continue
        mask = np.zeros(graph.n_nodes, dtype=bool)
        mask[list(members)] = True
        e_in = int(np.count_nonzero(mask[u] & mask[v]))
        d_sum = float(graph.degree[mask].sum())
        total += e_in / m - (d_sum / (2.0 * m)) ** 2
    return float(total)


@dataclass
class LossBreakdown:
    """One evaluation of the composite objective."""

    total: float
    reconstruction: float
    local_modularity: float | None
    grad_f: np.ndarray
    reg_grad_w1: np.ndarray
    reg_grad_w2: np.ndarray


def total_loss(
    f,
    graph: Graph,
    params,
    *,
    alpha: float = 1.0,
    beta: float = 1.0,
    include_lq: bool = True,
    weight_decay: float = 0.0,
    lq_scaling: LocalScalingS | None = None,
    n_samples: int | None = None,
    rng=None,
) -> LossBreakdown:
    """alpha * reconstruction + beta * local-modularity + L2 weight penalty.

    ``grad_f`` is the matching linear combination; the weight penalty's
    gradient is returned separately since it acts on the parameters, not F.
    """
    if alpha < 0 or beta < 0 or weight_decay < 0:
        raise ValueError("loss coefficients must be nonnegative")
    bp_value, bp_grad = bp_loss_balanced(f, graph, n_samples=n_samples, rng=rng)
    value = alpha * bp_value
    grad = alpha * bp_grad
    lq_value = None
    if include_lq:
        lq_value, lq_grad = lq_loss(f, graph, scaling=lq_scaling)
        value += beta * lq_value
        grad = grad + beta * lq_grad
    value += weight_decay * (float(np.sum(params.w1**2)) + float(np.sum(params.w2**2)))
    return LossBreakdown(
        total=float(value),
        reconstruction=float(bp_value),
        local_modularity=lq_value,
        grad_f=grad,
        reg_grad_w1=2.0 * weight_decay * params.w1,
        reg_grad_w2=2.0 * weight_decay * params.w2,
    )
