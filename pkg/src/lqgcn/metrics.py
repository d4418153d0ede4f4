"""Overlapping-cover evaluation: ONMI and best-match recall.

ONMI here is the max-normalized overlapping mutual information built on
per-community binary membership variables. Each community of one cover is
matched against the communities of the other through conditional
entropies, subject to the usual admissibility constraint
h(p11) + h(p00) >= h(p01) + h(p10) that forbids matching a community to
the complement of another; with no admissible partner the community keeps
its own entropy (zero information gained). The final score is

    I(X;Y) / max(H(X), H(Y)),   I = ((H(X)-H(X|Y)) + (H(Y)-H(Y|X))) / 2,

which is 1 for identical covers and near 0 for independent ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Cover:
    """A collection of (possibly overlapping) node-id sets.

    Community order carries no meaning. Empty communities are legal but
    surface through ``has_empty`` so callers can flag them.
    """

    n_nodes: int
    communities: list = field(default_factory=list)

    def __post_init__(self):
        if self.n_nodes <= 0:
            raise ValueError("n_nodes must be positive")
        comms = []
        for c in self.communities:
            members = frozenset(int(i) for i in c)
            if members and (min(members) < 0 or max(members) >= self.n_nodes):
                raise ValueError("community member id out of range")
            comms.append(members)
        self.communities = comms

    @property
    def k(self) -> int:
        return len(self.communities)

    @property
    def has_empty(self) -> bool:
        return any(len(c) == 0 for c in self.communities)

    def membership(self) -> np.ndarray:
        """Boolean (k, n_nodes) indicator matrix."""
        m = np.zeros((self.k, self.n_nodes), dtype=bool)
        for row, c in enumerate(self.communities):
            if c:
                m[row, list(c)] = True
        return m


def _plogp(counts, n):
    """Elementwise -p log p with p = counts/n and the 0 log 0 = 0 convention."""
    p = np.asarray(counts, dtype=np.float64) / n
    out = np.zeros_like(p)
    nz = p > 0
    out[nz] = -p[nz] * np.log(p[nz])
    return out


def _marginal_entropies(member, n):
    sizes = member.sum(axis=1)
    return _plogp(sizes, n) + _plogp(n - sizes, n)


def _conditional_entropies(x, y, hx, hy, n):
    """H(X_k | Y) for each community k of cover X.

    Inadmissible pairings are discarded; a community with no admissible
    partner falls back to its own marginal entropy.
    """
    sx = x.sum(axis=1)
    sy = y.sum(axis=1)
    n11 = x.astype(np.int64) @ y.astype(np.int64).T
    n10 = sx[:, None] - n11
    n01 = sy[None, :] - n11
    n00 = n - n11 - n10 - n01
    h00 = _plogp(n00, n)
    h01 = _plogp(n01, n)
    h10 = _plogp(n10, n)
    h11 = _plogp(n11, n)
    cond = (h00 + h01 + h10 + h11) - hy[None, :]
    admissible = (h11 + h00) >= (h01 + h10) - 1e-12
    cond = np.where(admissible, np.maximum(cond, 0.0), np.inf)
    best = cond.min(axis=1) if cond.shape[1] else np.full(cond.shape[0], np.inf)
    return np.where(np.isfinite(best), best, hx)


def onmi(truth: Cover, pred: Cover) -> float:
    """Max-normalized overlapping NMI in [0, 1]; symmetric in its arguments.

    Returns 0 when neither cover carries information (every community
    empty or covering all nodes).
    """
    if truth.n_nodes != pred.n_nodes:
        raise ValueError("covers disagree on node count")
    n = truth.n_nodes
    x = truth.membership()
    y = pred.membership()
    if x.shape[0] == 0 or y.shape[0] == 0:
        return 0.0
    hx = _marginal_entropies(x, n)
    hy = _marginal_entropies(y, n)
    total_x = float(hx.sum())
    total_y = float(hy.sum())
    denom = max(total_x, total_y)
    if denom == 0.0:
        return 0.0
    cond_x = float(_conditional_entropies(x, y, hx, hy, n).sum())
    cond_y = float(_conditional_entropies(y, x, hy, hx, n).sum())
    info = 0.5 * ((total_x - cond_x) + (total_y - cond_y))
    return float(min(1.0, max(0.0, info / denom)))


def recall_best_match(truth: Cover, pred: Cover) -> float:
    """Mean over truth communities of the best-matched recovered fraction.

    Each truth community is matched to the predicted community with the
    largest intersection (ties break to the lowest index) and scored by
    |intersection| / |truth community|. Empty truth communities are
    excluded from the mean; an empty prediction side scores 0.
    """
    if truth.n_nodes != pred.n_nodes:
        raise ValueError("covers disagree on node count")
    truths = [c for c in truth.communities if c]
    if not truths:
        raise ValueError("truth cover has no nonempty communities")
    preds = pred.communities
    if not preds:
        return 0.0
    total = 0.0
    for c in truths:
        overlaps = np.array([len(c & p) for p in preds], dtype=np.int64)
        total += overlaps[int(np.argmax(overlaps))] / len(c)
    return float(total / len(truths))
