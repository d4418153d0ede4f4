"""Two-layer graph-convolutional encoder and its hand-derived gradients.

Forward passes (X = features, W1/W2 = learnable weights):

    main:     F = relu( P @ tanh(Abar @ X @ W1 + X @ W1) @ W2 )
    ablation: F = relu( Abar @ tanh(Abar @ X @ W1) @ W2 )

where Abar is the unit-diagonal symmetric-normalized adjacency and P the
self-loop-augmented adjacency (callers may substitute the raw adjacency).
Both operators are symmetric; the backward pass relies on that to reuse
them untransposed. Training mode applies inverted dropout to the input of
each convolution layer, one fresh mask per call, so inference needs no
rescaling. The final relu guarantees a nonnegative affiliation matrix.

There is no autodiff tape: `backward` is the exact reverse-mode pass of
the two formulas above, reusing the masks cached by `forward`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import NormalizedAdjacency
from .kernel import spmm


@dataclass
class ModelParams:
    """Learnable weights: w1 (features -> hidden), w2 (hidden -> communities)."""

    w1: np.ndarray
    w2: np.ndarray

    def copy(self) -> "ModelParams":
        return ModelParams(self.w1.copy(), self.w2.copy())


@dataclass
class ForwardCache:
    """Activations saved by `forward` for the matching `backward` call."""

    variant: str
    layer1_input: np.ndarray  # aggregated layer-1 input, dropout applied (n, d)
    hidden: np.ndarray  # tanh output before dropout (n, h)
    drop2: np.ndarray | None  # inverted-dropout mask on the hidden layer
    active: np.ndarray  # bool mask of strictly positive pre-relu outputs


def xavier_init(shape, rng) -> np.ndarray:
    """Glorot-uniform draw: entries uniform in +-sqrt(6 / (fan_in + fan_out))."""
    fan_in, fan_out = int(shape[0]), int(shape[1])
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError("dimensions must be positive")
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(n_features: int, hidden: int, k: int, rng) -> ModelParams:
    """Draw W1 then W2 from the stream; the order is part of the contract."""
    w1 = xavier_init((n_features, hidden), rng)
    w2 = xavier_init((hidden, k), rng)
    return ModelParams(w1=w1, w2=w2)


def _as_matrix(abar):
    return abar.matrix if isinstance(abar, NormalizedAdjacency) else abar


def forward(
    params: ModelParams,
    abar,
    aplus,
    x,
    variant: str = "main",
    dropout: float = 0.0,
    rng=None,
    training: bool = False,
):
    """Run the encoder; returns (affiliations, cache for backward).

    ``aplus`` is the outer aggregation matrix of the main variant and is
    ignored by the ablation variant (which aggregates with ``abar`` twice).
    """
    amat = _as_matrix(abar)
    x = np.asarray(x, dtype=np.float64)
    if not (0.0 <= dropout < 1.0):
        raise ValueError("dropout rate must be in [0, 1)")
    if not (np.all(np.isfinite(params.w1)) and np.all(np.isfinite(params.w2))):
        raise ValueError("non-finite model parameters")
    if x.shape[1] != params.w1.shape[0]:
        raise ValueError(
            f"feature dim {x.shape[1]} does not match w1 rows {params.w1.shape[0]}"
        )
    if params.w1.shape[1] != params.w2.shape[0]:
        raise ValueError("w1 columns must match w2 rows")
    use_dropout = training and dropout > 0.0
    if use_dropout and rng is None:
        raise ValueError("training with dropout requires an rng")
    keep = 1.0 - dropout

    xd = x * ((rng.random(x.shape) >= dropout) / keep) if use_dropout else x
    if variant == "main":
        if aplus is None:
            raise ValueError("main variant needs the outer adjacency matrix")
        layer1 = spmm(amat, xd) + xd
        outer = aplus
    elif variant == "ablation":
        layer1 = spmm(amat, xd)
        outer = amat
    else:
        raise ValueError(f"unknown variant {variant!r}; expected 'main' or 'ablation'")

    hidden = np.tanh(layer1 @ params.w1)
    if use_dropout:
        drop2 = (rng.random(hidden.shape) >= dropout) / keep
        hidden_in = hidden * drop2
    else:
        drop2 = None
        hidden_in = hidden
    pre = spmm(outer, hidden_in) @ params.w2
    f = np.maximum(pre, 0.0)
    cache = ForwardCache(
        variant=variant,
        layer1_input=layer1,
        hidden=hidden,
        drop2=drop2,
        active=pre > 0.0,
    )
    return f, cache


def backward(cache: ForwardCache, grad_f, params: ModelParams, abar, aplus):
    """Gradients of a scalar loss w.r.t. (w1, w2), given its gradient w.r.t. F.

    ``cache`` must come from the forward call that produced F; the dropout
    masks stored there are reused, so the pass matches that exact draw.
    """
    amat = _as_matrix(abar)
    grad_f = np.asarray(grad_f, dtype=np.float64)
    if grad_f.shape != cache.active.shape:
        raise ValueError(
            f"grad shape {grad_f.shape} does not match cached output {cache.active.shape}"
        )
    outer = aplus if cache.variant == "main" else amat
    d_pre = np.where(cache.active, grad_f, 0.0)
    prop = spmm(outer, d_pre)  # outer is symmetric
    hidden_in = cache.hidden if cache.drop2 is None else cache.hidden * cache.drop2
    g_w2 = hidden_in.T @ prop
    d_hidden = prop @ params.w2.T
    if cache.drop2 is not None:
        d_hidden = d_hidden * cache.drop2
    d_z1 = d_hidden * (1.0 - cache.hidden**2)
    g_w1 = cache.layer1_input.T @ d_z1
    return g_w1, g_w2
