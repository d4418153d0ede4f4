"""Shared numeric primitives.

Shape-checked matrix products, the elementwise nonlinearities (with their
derivatives) used by the encoder, numerically stable log helpers, and a
seeded random stream. Everything runs in float64; the losses evaluate
log(1 - exp(-x)) arbitrarily close to 0, where float32 visibly corrupts
gradient checks.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

_LN2 = float(np.log(2.0))


def as_dense(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite float64 2-d array, raising on anything else."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def spmm(a, b) -> np.ndarray:
    """Sparse @ dense product with explicit dimension checks."""
    if not sp.issparse(a):
        raise TypeError("spmm expects a sparse left operand")
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return np.asarray(a @ b)


def gemm(a, b, transpose_a: bool = False, transpose_b: bool = False) -> np.ndarray:
    """Dense product, optionally transposing either operand first."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if transpose_a:
        a = a.T
    if transpose_b:
        b = b.T
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("gemm operands must be 2-d")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return a @ b


def relu(x):
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_grad(x):
    # derivative at exactly 0 is taken as 0
    return (np.asarray(x, dtype=np.float64) > 0.0).astype(np.float64)


def tanh(x):
    return np.tanh(np.asarray(x, dtype=np.float64))


def tanh_grad(x):
    t = np.tanh(np.asarray(x, dtype=np.float64))
    return 1.0 - t * t


def sigmoid(x):
    return expit(np.asarray(x, dtype=np.float64))


def sigmoid_grad(x):
    s = expit(np.asarray(x, dtype=np.float64))
    return s * (1.0 - s)


ELEMENTWISE = {
    "tanh": tanh,
    "relu": relu,
    "sigmoid": sigmoid,
    "tanh_grad": tanh_grad,
    "relu_grad": relu_grad,
    "sigmoid_grad": sigmoid_grad,
}


def apply_elementwise(m, fn: str) -> np.ndarray:
    """Apply one of the named nonlinearities (or derivatives) entrywise."""
    if fn not in ELEMENTWISE:
        raise KeyError(f"unknown elementwise function {fn!r}; choose from {sorted(ELEMENTWISE)}")
    arr = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("apply_elementwise requires finite input")
    return ELEMENTWISE[fn](arr)


def log1mexp(x):
    """log(1 - exp(-x)) for x > 0 without catastrophic cancellation.

    Below ln 2 the inner expression is evaluated as -expm1(-x), above it as
    1 - exp(-x); both branches keep full float64 precision on their range.
    """
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.empty_like(arr)
    small = arr < _LN2
    out[small] = np.log(-np.expm1(-arr[small]))
    big = ~small
    out[big] = np.log1p(-np.exp(-arr[big]))
    if np.ndim(x) == 0:
        return float(out[0])
    return out


def log_sigmoid(x):
    """log(sigmoid(x)), finite for every finite x (no exp overflow)."""
    return -np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


def neg_inv_expm1(x):
    """-1 / (exp(x) - 1) for x > 0, overflow-free at both ends.

    This is the derivative of -log(1 - exp(-x)); evaluated as
    exp(-x) / expm1(-x) it underflows gracefully for large x instead of
    overflowing exp(x).
    """
    arr = np.asarray(x, dtype=np.float64)
    return np.exp(-arr) / np.expm1(-arr)


class RngStream:
    """Deterministic random stream: the seed fully determines every draw.

    A thin facade over a PCG64 generator so that training, initialization,
    dropout, and samplers all pull from one sequential, reproducible source.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def random(self, size=None):
        return self._gen.random(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def binomial(self, n, p, size=None):
        return self._gen.binomial(n, p, size)

    def choice(self, a, size=None, replace=True):
        return self._gen.choice(a, size=size, replace=replace)

    def permutation(self, x):
        return self._gen.permutation(x)

    def __repr__(self):
        return f"RngStream(seed={self.seed})"
