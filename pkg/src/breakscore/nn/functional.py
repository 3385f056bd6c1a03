"""Differentiable primitives: each op has a forward returning a cache and a
matching backward. All ops preserve the dtype of their inputs (float32 in
training; the gradient checker runs them in float64)."""
from __future__ import annotations

import math

import numpy as np

from ..exceptions import DataError


def trunc_normal(shape, rng: np.random.Generator, std: float = 0.02, dtype=np.float32):
    """Normal(0, std) clipped to +/- 2 std."""
    x = rng.normal(0.0, std, size=shape)
    return np.clip(x, -2.0 * std, 2.0 * std).astype(dtype)


# -- linear ------------------------------------------------------------------

def linear(x, w, b):
    return x @ w + b, (x, w)


def linear_backward(dy, cache):
    x, w = cache
    dx = dy @ w.T
    dw = x.reshape(-1, x.shape[-1]).T @ dy.reshape(-1, dy.shape[-1])
    db = dy.reshape(-1, dy.shape[-1]).sum(axis=0)
    return dx, dw, db


# -- layer norm --------------------------------------------------------------

_LN_EPS = 1e-5


def layer_norm(x, gain, bias):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + np.asarray(_LN_EPS, dtype=x.dtype))
    xhat = xc * inv
    return xhat * gain + bias, (xhat, inv, gain)


def layer_norm_backward(dy, cache):
    xhat, inv, gain = cache
    dgain = (dy * xhat).reshape(-1, xhat.shape[-1]).sum(axis=0)
    dbias = dy.reshape(-1, dy.shape[-1]).sum(axis=0)
    dxhat = dy * gain
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dgain, dbias


# -- GELU (tanh approximation) ----------------------------------------------

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def gelu(x):
    u = _GELU_C * (x + _GELU_A * x**3)
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), (x, t)


def gelu_backward(dy, cache):
    x, t = cache
    du = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


# -- softmax -----------------------------------------------------------------

def softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(dy, probs, axis=-1):
    dot = (dy * probs).sum(axis=axis, keepdims=True)
    return probs * (dy - dot)


# -- dropout -----------------------------------------------------------------

def dropout(x, p: float, rng: np.random.Generator):
    """Inverted dropout; returns (output, mask). p=0 is the identity."""
    if p <= 0.0:
        return x, None
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / np.asarray(1.0 - p, dtype=x.dtype)
    return x * keep, keep


def dropout_backward(dy, mask):
    return dy if mask is None else dy * mask


# -- cross entropy -----------------------------------------------------------

def softmax_cross_entropy(logits, target: int):
    """Loss and d(loss)/d(logits) for one sample; loss = -log softmax[target]."""
    logits = np.asarray(logits)
    c = logits.shape[-1]
    if not 0 <= target < c:
        raise DataError(f"target class {target} out of range for {c} logits")
    p = softmax(logits)
    loss = -np.log(max(p[target], np.finfo(p.dtype).tiny))
    grad = p.copy()
    grad[target] -= 1.0
    return float(loss), grad


def batched_cross_entropy(logits, targets, weights=None):
    """Mean weighted cross entropy over rows of logits [N, C].

    `weights` (length N, >= 0) selects and reweights rows; None means uniform.
    Returns (loss, dlogits).
    """
    logits = np.asarray(logits)
    n, c = logits.shape
    targets = np.asarray(targets)
    if targets.min(initial=0) < 0 or targets.max(initial=0) >= c:
        raise DataError("target class out of range")
    if weights is None:
        weights = np.ones(n, dtype=logits.dtype)
    else:
        weights = np.asarray(weights, dtype=logits.dtype)
    wsum = weights.sum()
    if wsum <= 0:
        raise DataError("cross entropy needs at least one weighted row")
    p = softmax(logits, axis=-1)
    picked = np.maximum(p[np.arange(n), targets], np.finfo(p.dtype).tiny)
    loss = float((weights * -np.log(picked)).sum() / wsum)
    dlogits = p.copy()
    dlogits[np.arange(n), targets] -= 1.0
    dlogits *= (weights / wsum)[:, None]
    return loss, dlogits
