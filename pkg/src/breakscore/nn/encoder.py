"""Compact pre-norm transformer encoder with explicit forward/backward passes.

Layout per layer: x += attn(LN(x)); x += ffn(LN(x)); a final layer norm closes
the stack. Token and position embeddings are learned. Attention masks padded
key positions, so padded inputs cannot influence real positions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..exceptions import DataError
from .functional import (
    dropout,
    dropout_backward,
    gelu,
    gelu_backward,
    layer_norm,
    layer_norm_backward,
    linear,
    linear_backward,
    softmax,
    softmax_backward,
    trunc_normal,
)

_NEG_INF = -1.0e9


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    d_model: int = 128
    n_heads: int = 4
    n_layers: int = 2
    ffn_dim: int = 256
    max_len: int = 128
    dropout_prob: float = 0.1

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise DataError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )
        if self.max_len < 2:
            raise DataError(f"max_len must be >= 2, got {self.max_len}")

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "n_layers": self.n_layers,
            "ffn_dim": self.ffn_dim,
            "max_len": self.max_len,
            "dropout_prob": self.dropout_prob,
        }


def init_encoder_params(cfg: EncoderConfig, rng: np.random.Generator) -> dict:
    """Truncated-normal(0.02) weights, zero biases, unit layer-norm gains."""
    d, f = cfg.d_model, cfg.ffn_dim
    p: dict[str, np.ndarray] = {}
    p["tok_emb"] = trunc_normal((cfg.vocab_size, d), rng)
    p["pos_emb"] = trunc_normal((cfg.max_len, d), rng)
    for i in range(cfg.n_layers):
        pre = f"layer{i}."
        for name in ("wq", "wk", "wv", "wo"):
            p[pre + name] = trunc_normal((d, d), rng)
            p[pre + name.replace("w", "b")] = np.zeros(d, dtype=np.float32)
        p[pre + "ln1_g"] = np.ones(d, dtype=np.float32)
        p[pre + "ln1_b"] = np.zeros(d, dtype=np.float32)
        p[pre + "ffn_w1"] = trunc_normal((d, f), rng)
        p[pre + "ffn_b1"] = np.zeros(f, dtype=np.float32)
        p[pre + "ffn_w2"] = trunc_normal((f, d), rng)
        p[pre + "ffn_b2"] = np.zeros(d, dtype=np.float32)
        p[pre + "ln2_g"] = np.ones(d, dtype=np.float32)
        p[pre + "ln2_b"] = np.zeros(d, dtype=np.float32)
    p["lnf_g"] = np.ones(d, dtype=np.float32)
    p["lnf_b"] = np.zeros(d, dtype=np.float32)
    return p


def _split_heads(x, n_heads):
    b, l, d = x.shape
    return x.reshape(b, l, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, l, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, l, h * dh)


def encoder_forward(
    ids,
    pad_mask,
    params: dict,
    cfg: EncoderConfig,
    train: bool = False,
    dropout_rng: np.random.Generator | None = None,
):
    """Hidden states [B, L, d_model] plus the cache needed for backward.

    `ids` is [B, L] int; `pad_mask` is [B, L] bool, True at real tokens.
    """
    ids = np.asarray(ids)
    pad_mask = np.asarray(pad_mask, dtype=bool)
    b, l = ids.shape
    if l > cfg.max_len:
        raise DataError(f"sequence length {l} exceeds max_len {cfg.max_len}")
    if ids.min() < 0 or ids.max() >= cfg.vocab_size:
        raise DataError("token id out of vocabulary range")
    if train and cfg.dropout_prob > 0 and dropout_rng is None:
        raise DataError("train mode with dropout needs an explicit rng")

    dtype = params["tok_emb"].dtype
    drop_p = cfg.dropout_prob if train else 0.0
    scale = 1.0 / math.sqrt(cfg.d_model // cfg.n_heads)
    # Additive mask over key positions.
    key_bias = np.where(pad_mask, 0.0, _NEG_INF).astype(dtype)[:, None, None, :]

    x = params["tok_emb"][ids] + params["pos_emb"][:l][None, :, :]
    x, emb_drop = dropout(x, drop_p, dropout_rng) if drop_p else (x, None)

    layer_caches = []
    for i in range(cfg.n_layers):
        pre = f"layer{i}."
        h, ln1_cache = layer_norm(x, params[pre + "ln1_g"], params[pre + "ln1_b"])
        q, q_cache = linear(h, params[pre + "wq"], params[pre + "bq"])
        k, k_cache = linear(h, params[pre + "wk"], params[pre + "bk"])
        v, v_cache = linear(h, params[pre + "wv"], params[pre + "bv"])
        qh, kh, vh = (_split_heads(t, cfg.n_heads) for t in (q, k, v))
        scores = qh @ kh.transpose(0, 1, 3, 2) * np.asarray(scale, dtype=dtype)
        scores = scores + key_bias
        probs = softmax(scores, axis=-1)
        ctx = _merge_heads(probs @ vh)
        attn_out, o_cache = linear(ctx, params[pre + "wo"], params[pre + "bo"])
        attn_out, attn_drop = dropout(attn_out, drop_p, dropout_rng) if drop_p else (attn_out, None)
        x = x + attn_out

        h2, ln2_cache = layer_norm(x, params[pre + "ln2_g"], params[pre + "ln2_b"])
        f1, f1_cache = linear(h2, params[pre + "ffn_w1"], params[pre + "ffn_b1"])
        a, gelu_cache = gelu(f1)
        f2, f2_cache = linear(a, params[pre + "ffn_w2"], params[pre + "ffn_b2"])
        f2, ffn_drop = dropout(f2, drop_p, dropout_rng) if drop_p else (f2, None)
        x = x + f2

        layer_caches.append(
            {
                "ln1": ln1_cache, "q": q_cache, "k": k_cache, "v": v_cache,
                "qh": qh, "kh": kh, "vh": vh, "probs": probs, "o": o_cache,
                "attn_drop": attn_drop, "ln2": ln2_cache, "f1": f1_cache,
                "gelu": gelu_cache, "f2": f2_cache, "ffn_drop": ffn_drop,
            }
        )

    hidden, lnf_cache = layer_norm(x, params["lnf_g"], params["lnf_b"])
    cache = {
        "ids": ids, "l": l, "scale": scale, "emb_drop": emb_drop,
        "layers": layer_caches, "lnf": lnf_cache, "cfg": cfg, "dtype": dtype,
        "attn_probs": [c["probs"] for c in layer_caches],
    }
    return hidden, cache


def encoder_backward(dhidden, cache) -> dict:
    """Parameter gradients for a loss whose gradient w.r.t. hidden is dhidden."""
    cfg: EncoderConfig = cache["cfg"]
    ids = cache["ids"]
    grads: dict[str, np.ndarray] = {}

    dx, grads["lnf_g"], grads["lnf_b"] = layer_norm_backward(dhidden, cache["lnf"])

    for i in reversed(range(cfg.n_layers)):
        pre = f"layer{i}."
        c = cache["layers"][i]

        # FFN sublayer: x_out = x_in + drop(W2 gelu(W1 LN(x_in)))
        df2 = dropout_backward(dx, c["ffn_drop"])
        da, grads[pre + "ffn_w2"], grads[pre + "ffn_b2"] = linear_backward(df2, c["f2"])
        df1 = gelu_backward(da, c["gelu"])
        dh2, grads[pre + "ffn_w1"], grads[pre + "ffn_b1"] = linear_backward(df1, c["f1"])
        dres, grads[pre + "ln2_g"], grads[pre + "ln2_b"] = layer_norm_backward(dh2, c["ln2"])
        dx = dx + dres

        # Attention sublayer.
        dattn = dropout_backward(dx, c["attn_drop"])
        dctx, grads[pre + "wo"], grads[pre + "bo"] = linear_backward(dattn, c["o"])
        dctx_h = _split_heads(dctx, cfg.n_heads)
        dprobs = dctx_h @ c["vh"].transpose(0, 1, 3, 2)
        dvh = c["probs"].transpose(0, 1, 3, 2) @ dctx_h
        dscores = softmax_backward(dprobs, c["probs"], axis=-1)
        scale = np.asarray(cache["scale"], dtype=cache["dtype"])
        dqh = dscores @ c["kh"] * scale
        dkh = dscores.transpose(0, 1, 3, 2) @ c["qh"] * scale
        dq, dk, dv = (_merge_heads(t) for t in (dqh, dkh, dvh))
        dh_q, grads[pre + "wq"], grads[pre + "bq"] = linear_backward(dq, c["q"])
        dh_k, grads[pre + "wk"], grads[pre + "bk"] = linear_backward(dk, c["k"])
        dh_v, grads[pre + "wv"], grads[pre + "bv"] = linear_backward(dv, c["v"])
        dres, grads[pre + "ln1_g"], grads[pre + "ln1_b"] = layer_norm_backward(
            dh_q + dh_k + dh_v, c["ln1"]
        )
        dx = dx + dres

    dx = dropout_backward(dx, cache["emb_drop"])
    dtok = np.zeros((cfg.vocab_size, cfg.d_model), dtype=cache["dtype"])
    np.add.at(dtok, ids, dx)
    grads["tok_emb"] = dtok
    dpos = np.zeros((cfg.max_len, cfg.d_model), dtype=cache["dtype"])
    dpos[: cache["l"]] = dx.sum(axis=0)
    grads["pos_emb"] = dpos
    return grads
