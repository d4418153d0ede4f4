"""Synthetic graphs sampled from planted affiliations.

Under the affiliation model, an unordered pair (i, j) receives an edge
with probability 1 - exp(-f_i . f_j). The sampler exploits the product
decomposition exp(-f_i . f_j) = prod_s exp(-f_is f_js): each community
independently proposes edges among its members and the union of proposals
has exactly the target probability. Communities whose members all share
one affiliation value (the planted case) are sampled in O(edges) through
a binomial count plus a distinct-pair draw, so generation scales to tens
of thousands of nodes without touching the O(n^2) pair space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .metrics import Cover

_GENERAL_CHUNK = 512
_CHOICE_LIMIT = 1 << 22


@dataclass
class PlantedInstance:
    """Ground-truth affiliations, their indicator cover, and a sampled graph.

    ``base_groups`` records each node's primary block from the even
    partition (overlap memberships are extra); loaders use it to emit
    one-hot attributes that do not leak the overlap structure.
    """

    f_true: np.ndarray
    cover_true: Cover
    graph: Graph
    seed: int
    base_groups: np.ndarray


def _decode_pair_codes(codes, m):
    """Map linear indices of the strict upper triangle of an m x m grid
    back to (row, col) with row < col."""
    i = np.arange(m, dtype=np.int64)
    starts = i * m - (i * (i + 1)) // 2
    rows = np.searchsorted(starts, codes, side="right") - 1
    cols = codes - starts[rows] + rows + 1
    return rows, cols


def _sample_distinct(rng, total: int, count: int) -> np.ndarray:
    """Uniform sample of ``count`` distinct integers from range(total)."""
    if count > total:
        raise ValueError("cannot draw more distinct items than exist")
    if count == 0:
        return np.empty(0, dtype=np.int64)
    if total <= _CHOICE_LIMIT:
        return np.asarray(rng.choice(total, size=count, replace=False), dtype=np.int64)
    # sequential rejection; collisions are negligible when count << total
    seen = set()
    out = np.empty(count, dtype=np.int64)
    got = 0
    while got < count:
        draws = rng.integers(0, total, size=2 * (count - got))
        for d in np.asarray(draws, dtype=np.int64):
            if int(d) in seen:
                continue
            seen.add(int(d))
            out[got] = d
            got += 1
            if got == count:
                break
    return out


def sample_bp_graph(f_true, rng) -> Graph:
    """Sample a graph whose pair probabilities are 1 - exp(-f_i . f_j).

    Symmetric, no self-loops; a fixed rng seed reproduces the same graph.
    """
    f = np.asarray(f_true, dtype=np.float64)
    if f.ndim != 2:
        raise ValueError("affiliations must be 2-d")
    if not np.all(np.isfinite(f)) or (f.size and f.min() < 0):
        raise ValueError("affiliations must be finite and nonnegative")
    n, k = f.shape
    chunks_u = []
    chunks_v = []
    for s in range(k):
        idx = np.nonzero(f[:, s] > 0)[0]
        m = idx.shape[0]
        if m < 2:
            continue
        vals = f[idx, s]
        if np.all(vals == vals[0]):
            p = float(-np.expm1(-(vals[0] ** 2)))
            npairs = m * (m - 1) // 2
            cnt = int(rng.binomial(npairs, p))
            if cnt:
                codes = _sample_distinct(rng, npairs, cnt)
                a, b = _decode_pair_codes(codes, m)
                chunks_u.append(idx[a])
                chunks_v.append(idx[b])
        else:
            # general path: row chunks of the upper triangle, bounded memory
            for a0 in range(0, m - 1, _GENERAL_CHUNK):
                a1 = min(a0 + _GENERAL_CHUNK, m - 1)
                block = -np.expm1(-np.outer(vals[a0:a1], vals))
                cols = np.arange(m)[None, :]
                rows = np.arange(a0, a1)[:, None]
                hit = (rng.random(block.shape) < block) & (cols > rows)
                ra, rb = np.nonzero(hit)
                if ra.size:
                    chunks_u.append(idx[ra + a0])
                    chunks_v.append(idx[rb])
    if chunks_u:
        u = np.concatenate(chunks_u)
        v = np.concatenate(chunks_v)
        pairs = np.stack([u, v], axis=1)
    else:
        pairs = np.empty((0, 2), dtype=np.int64)
    return Graph.from_edges(n, pairs)


def _union_noise_edges(graph: Graph, eta: float, rng) -> Graph:
    n = graph.n_nodes
    total = n * (n - 1) // 2
    cnt = int(rng.binomial(total, eta))
    if cnt == 0:
        return graph
    codes = _sample_distinct(rng, total, cnt)
    a, b = _decode_pair_codes(codes, n)
    pairs = np.concatenate(
        [np.stack([graph.edges_u, graph.edges_v], axis=1), np.stack([a, b], axis=1)]
    )
    return Graph.from_edges(n, pairs)


def make_planted(
    n: int,
    k: int,
    overlap_fraction: float,
    strength: float,
    rng,
    eta: float = 0.01,
) -> PlantedInstance:
    """Planted overlapping-community instance.

    Nodes are split evenly into k blocks; floor(overlap_fraction * n)
    nodes get a second, distinct block membership. Every membership has
    affiliation ``strength``, and the graph is sampled from the resulting
    affiliation matrix. ``eta`` adds independent uniform background edges
    (union), so recovery isn't handed a perfectly block-diagonal graph.
    """
    if n < k or k < 1:
        raise ValueError("need n >= k >= 1")
    if not (0.0 <= overlap_fraction < 1.0):
        raise ValueError("overlap_fraction must be in [0, 1)")
    if strength <= 0:
        raise ValueError("strength must be positive")
    if not (0.0 <= eta < 1.0):
        raise ValueError("eta must be in [0, 1)")
    n_overlap = int(overlap_fraction * n)
    if n_overlap > 0 and k < 2:
        raise ValueError("overlap requires at least 2 communities")

    sizes = np.full(k, n // k, dtype=np.int64)
    sizes[: n % k] += 1
    base = np.repeat(np.arange(k, dtype=np.int64), sizes)
    f = np.zeros((n, k), dtype=np.float64)
    f[np.arange(n), base] = strength
    if n_overlap:
        chosen = np.sort(np.asarray(rng.choice(n, size=n_overlap, replace=False)))
        second = (base[chosen] + 1 + rng.integers(0, k - 1, size=n_overlap)) % k
        f[chosen, second] = strength

    graph = sample_bp_graph(f, rng)
    if eta > 0:
        graph = _union_noise_edges(graph, eta, rng)
    cover = Cover(
        n_nodes=n,
        communities=[frozenset(np.nonzero(f[:, s] > 0)[0].tolist()) for s in range(k)],
    )
    return PlantedInstance(
        f_true=f, cover_true=cover, graph=graph, seed=rng.seed, base_groups=base
    )
