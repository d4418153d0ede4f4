"""Full training procedure: Adam, the staged early-stopping schedule, and
thresholding of the learned affiliations into a cover.

The schedule runs in two phases driven by one counter of consecutive
iterations without a new strict minimum (improvements smaller than
IMPROVEMENT_TOL do not count). While only the reconstruction loss is
active, the counter exceeding ``patience_lq`` (default 30) switches the
local-modularity term on for all later iterations — a one-way switch —
and re-baselines the best loss, since values under different objectives
are not comparable. The counter exceeding ``patience_stop`` (default 80)
ends the run. The returned affiliations always come from a final
inference-mode forward pass (no dropout).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import (
    Graph,
    augment_adjacency,
    normalize_adjacency,
    row_l2_normalize,
)
from .kernel import RngStream
from .losses import total_loss
from .metrics import Cover
from .model import ModelParams, backward, forward, init_params

IMPROVEMENT_TOL = 1e-9
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    """Hyperparameters of one training run; defaults are the paper-free
    working set used throughout the test suite."""

    k: int
    hidden: int = 128
    alpha: float = 1.0
    beta: float = 1.0
    lr: float = 1e-3
    weight_decay: float = 1e-2
    dropout: float = 0.5
    threshold: float = 0.5
    max_iters: int = 1000
    patience_lq: int = 30
    patience_stop: int = 80
    seed: int = 0
    variant: str = "main"  # "main" | "ablation"
    lq_enabled: bool = True
    estimator: str = "exact"  # "exact" | "sampled"
    sample_size: int = 2000
    outer_self_loops: bool = True  # False: use the raw adjacency outside tanh
    threshold_rescale: bool = True  # False: threshold raw affiliations

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.lq_enabled and self.k < 2:
            raise ValueError("the local-modularity loss needs k >= 2")
        if self.hidden < 1:
            raise ValueError("hidden width must be >= 1")
        if self.alpha < 0 or self.beta < 0 or self.weight_decay < 0:
            raise ValueError("loss coefficients must be nonnegative")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout must be in [0, 1)")
        if not (0.0 <= self.threshold <= 1.0):
            raise ValueError("threshold must be in [0, 1]")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not (0 <= self.patience_lq < self.patience_stop):
            raise ValueError("need 0 <= patience_lq < patience_stop")
        if self.variant not in ("main", "ablation"):
            raise ValueError("variant must be 'main' or 'ablation'")
        if self.estimator not in ("exact", "sampled"):
            raise ValueError("estimator must be 'exact' or 'sampled'")
        if self.estimator == "sampled" and self.sample_size < 1:
            raise ValueError("sample_size must be positive")


@dataclass
class AdamState:
    """First/second moment accumulators and the shared timestep."""

    m_w1: np.ndarray
    v_w1: np.ndarray
    m_w2: np.ndarray
    v_w2: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        return cls(
            m_w1=np.zeros_like(params.w1),
            v_w1=np.zeros_like(params.w1),
            m_w2=np.zeros_like(params.w2),
            v_w2=np.zeros_like(params.w2),
        )


def adam_step(params: ModelParams, grads, state: AdamState, lr: float):
    """One bias-corrected Adam update; returns fresh (params, state)."""
    g_w1, g_w2 = grads
    g_w1 = np.asarray(g_w1, dtype=np.float64)
    g_w2 = np.asarray(g_w2, dtype=np.float64)
    if g_w1.shape != params.w1.shape or g_w2.shape != params.w2.shape:
        raise ValueError("gradient shapes do not match parameters")
    if not (np.all(np.isfinite(g_w1)) and np.all(np.isfinite(g_w2))):
        raise ValueError("non-finite gradients")
    t = state.t + 1
    bc1 = 1.0 - ADAM_BETA1**t
    bc2 = 1.0 - ADAM_BETA2**t

    def upd(w, g, m, v):
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * (g * g)
        w = w - lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        return w, m, v

    w1, m1, v1 = upd(params.w1, g_w1, state.m_w1, state.v_w1)
    w2, m2, v2 = upd(params.w2, g_w2, state.m_w2, state.v_w2)
    return ModelParams(w1=w1, w2=w2), AdamState(m_w1=m1, v_w1=v1, m_w2=m2, v_w2=v2, t=t)


@dataclass
class IterationRecord:
    iteration: int
    loss_bp: float
    loss_lq: float | None
    loss_total: float
    counter: int
    lq_active: bool


@dataclass
class TrainLog:
    records: list = field(default_factory=list)
    diverged: bool = False

    def append(self, rec: IterationRecord) -> None:
        if self.records and rec.iteration <= self.records[-1].iteration:
            raise ValueError("iterations must be strictly increasing")
        self.records.append(rec)

    @property
    def switch_iteration(self) -> int | None:
        """First iteration whose loss included the local-modularity term."""
        for rec in self.records:
            if rec.lq_active:
                return rec.iteration
        return None

    def to_dicts(self):
        return [
            {
                "iteration": r.iteration,
                "loss_bp": r.loss_bp,
                "loss_lq": r.loss_lq,
                "loss_total": r.loss_total,
                "counter": r.counter,
                "lq_active": r.lq_active,
            }
            for r in self.records
        ]


@dataclass
class TrainResult:
    f: np.ndarray
    params: ModelParams
    log: TrainLog


def train(graph: Graph, features, cfg: TrainConfig) -> TrainResult:
    """Run the full procedure on one graph.

    Features are row-L2-normalized here; adjacency transforms are built
    once up front. Everything random (init, dropout masks, the sampled
    estimator if enabled) flows from cfg.seed, so a (seed, config, data)
    triple fully determines the log and the returned affiliations.

    A non-finite loss or gradient ends the run immediately: the last
    parameters that produced a finite loss are kept, and the log carries
    ``diverged=True``. The divergent iteration is never logged.
    """
    cfg.validate()
    x = row_l2_normalize(features)
    if x.shape[0] != graph.n_nodes:
        raise ValueError("feature rows must match the node count")
    rng = RngStream(cfg.seed)
    abar = normalize_adjacency(graph)
    aplus = augment_adjacency(graph) if cfg.outer_self_loops else graph.adj
    params = init_params(x.shape[1], cfg.hidden, cfg.k, rng)
    state = AdamState.zeros_like(params)
    log = TrainLog()
    n_samples = cfg.sample_size if cfg.estimator == "sampled" else None

    best = math.inf
    counter = 0
    lq_active = False
    switched = False
    prev_params = params

    for it in range(1, cfg.max_iters + 1):
        f, cache = forward(
            params,
            abar,
            aplus,
            x,
            variant=cfg.variant,
            dropout=cfg.dropout,
            rng=rng,
            training=True,
        )
        loss = total_loss(
            f,
            graph,
            params,
            alpha=cfg.alpha,
            beta=cfg.beta,
            include_lq=lq_active,
            weight_decay=cfg.weight_decay,
            n_samples=n_samples,
            rng=rng if n_samples is not None else None,
        )
        if not math.isfinite(loss.total):
            log.diverged = True
            params = prev_params
            break
        g_w1, g_w2 = backward(cache, loss.grad_f, params, abar, aplus)
        g_w1 = g_w1 + loss.reg_grad_w1
        g_w2 = g_w2 + loss.reg_grad_w2
        if not (np.all(np.isfinite(g_w1)) and np.all(np.isfinite(g_w2))):
            log.diverged = True
            params = prev_params
            break

        if loss.total < best - IMPROVEMENT_TOL:
            best = loss.total
            counter = 0
        else:
            counter += 1
        log.append(
            IterationRecord(
                iteration=it,
                loss_bp=loss.reconstruction,
                loss_lq=loss.local_modularity,
                loss_total=loss.total,
                counter=counter,
                lq_active=lq_active,
            )
        )
        if counter > cfg.patience_stop:
            break
        if not switched and cfg.lq_enabled and counter > cfg.patience_lq:
            lq_active = True
            switched = True
            best = math.inf
            counter = 0
        prev_params = params
        params, state = adam_step(params, (g_w1, g_w2), state, cfg.lr)

    f_final, _ = forward(
        params, abar, aplus, x, variant=cfg.variant, dropout=0.0, training=False
    )
    return TrainResult(f=f_final, params=params, log=log)


def _rescale_columns(f: np.ndarray) -> np.ndarray:
    mx = f.max(axis=0)
    scale = np.ones_like(mx)
    nz = mx > 0
    scale[nz] = 1.0 / mx[nz]
    return f * scale[None, :]


def threshold_assign(f, p: float, rescale: bool = True) -> Cover:
    """Cover from affiliations: node i joins community j iff its (column-
    rescaled) score strictly exceeds p.

    Relu outputs are unbounded, so by default each column is divided by
    its maximum (zero columns untouched) to make a [0, 1] threshold
    meaningful; pass rescale=False to compare raw values.
    """
    if not (0.0 <= p <= 1.0) and rescale:
        raise ValueError("threshold must be in [0, 1]")
    arr = np.asarray(f, dtype=np.float64)
    fh = _rescale_columns(arr) if rescale else arr
    comms = [
        frozenset(np.nonzero(fh[:, j] > p)[0].tolist()) for j in range(arr.shape[1])
    ]
    return Cover(n_nodes=arr.shape[0], communities=comms)


def threshold_sweep(f, p_list, rescale: bool = True):
    """Covers for each threshold; memberships shrink as p grows."""
    p_list = list(p_list)
    if not p_list:
        raise ValueError("p_list must be nonempty")
    return [(p, threshold_assign(f, p, rescale=rescale)) for p in p_list]
