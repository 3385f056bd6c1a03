"""Bidirectional LSTM encoder with explicit backprop-through-time.

Padded steps carry the previous state through unchanged (gated update), so the
backward pass never propagates gradient into padded embeddings. Output is the
concatenation [forward_h; backward_h] per position, [B, L, 2*hidden].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import DataError
from .functional import trunc_normal


@dataclass(frozen=True)
class BiLstmConfig:
    vocab_size: int
    embed_dim: int = 64
    hidden_size: int = 128

    def __post_init__(self):
        if self.hidden_size < 1:
            raise DataError(f"hidden_size must be >= 1, got {self.hidden_size}")

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "embed_dim": self.embed_dim,
            "hidden_size": self.hidden_size,
        }


def init_bilstm_params(cfg: BiLstmConfig, rng: np.random.Generator) -> dict:
    """Gate weights stacked [i|f|g|o] along the last axis."""
    e, h = cfg.embed_dim, cfg.hidden_size
    p: dict[str, np.ndarray] = {"emb": trunc_normal((cfg.vocab_size, e), rng)}
    for d in ("fw", "bw"):
        p[f"{d}_wx"] = trunc_normal((e, 4 * h), rng)
        p[f"{d}_wh"] = trunc_normal((h, 4 * h), rng)
        p[f"{d}_b"] = np.zeros(4 * h, dtype=np.float32)
    return p


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _run_direction(x, mask, wx, wh, b, reverse: bool):
    """One direction's forward scan. Returns (h_seq [B,L,H], step caches)."""
    bsz, length, _ = x.shape
    hid = wh.shape[0]
    h = np.zeros((bsz, hid), dtype=x.dtype)
    c = np.zeros((bsz, hid), dtype=x.dtype)
    h_seq = np.zeros((bsz, length, hid), dtype=x.dtype)
    caches = [None] * length
    steps = range(length - 1, -1, -1) if reverse else range(length)
    for t in steps:
        m = mask[:, t].astype(x.dtype)[:, None]
        gates = x[:, t] @ wx + h @ wh + b
        i, f, g, o = np.split(gates, 4, axis=1)
        i, f, o = _sigmoid(i), _sigmoid(f), _sigmoid(o)
        g = np.tanh(g)
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        caches[t] = (x[:, t], h.copy(), c.copy(), i, f, g, o, c_new, tc, m)
        c = m * c_new + (1.0 - m) * c
        h = m * h_new + (1.0 - m) * h
        h_seq[:, t] = h
    return h_seq, caches


def _backprop_direction(dh_seq, caches, wx, wh, reverse: bool):
    """BPTT for one direction; returns (dx_seq, dwx, dwh, db)."""
    bsz, length, hid = dh_seq.shape
    dtype = dh_seq.dtype
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(wx.shape[1], dtype=dtype)
    dx_seq = np.zeros((bsz, length, wx.shape[0]), dtype=dtype)
    dh_next = np.zeros((bsz, hid), dtype=dtype)
    dc_next = np.zeros((bsz, hid), dtype=dtype)
    steps = range(length) if reverse else range(length - 1, -1, -1)
    for t in steps:
        x_t, h_prev, c_prev, i, f, g, o, c_new, tc, m = caches[t]
        dh_total = dh_seq[:, t] + dh_next
        # h_t = m*h_new + (1-m)*h_prev ; c_t = m*c_new + (1-m)*c_prev
        dh_new = m * dh_total
        dh_prev_skip = (1.0 - m) * dh_total
        dc_new = m * dc_next
        dc_prev_skip = (1.0 - m) * dc_next
        do = dh_new * tc
        dc_in = dh_new * o * (1.0 - tc * tc) + dc_new
        df = dc_in * c_prev
        di = dc_in * g
        dg = dc_in * i
        dc_prev = dc_in * f + dc_prev_skip
        dgates = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        dwx += x_t.T @ dgates
        dwh += h_prev.T @ dgates
        db += dgates.sum(axis=0)
        dx_seq[:, t] = dgates @ wx.T
        dh_next = dgates @ wh.T + dh_prev_skip
        dc_next = dc_prev
    return dx_seq, dwx, dwh, db


def bilstm_forward(ids, pad_mask, params: dict, cfg: BiLstmConfig):
    """Hidden states [B, L, 2*hidden] plus the cache for backward."""
    ids = np.asarray(ids)
    pad_mask = np.asarray(pad_mask, dtype=bool)
    if ids.min() < 0 or ids.max() >= cfg.vocab_size:
        raise DataError("token id out of vocabulary range")
    x = params["emb"][ids]
    h_fw, cache_fw = _run_direction(
        x, pad_mask, params["fw_wx"], params["fw_wh"], params["fw_b"], reverse=False
    )
    h_bw, cache_bw = _run_direction(
        x, pad_mask, params["bw_wx"], params["bw_wh"], params["bw_b"], reverse=True
    )
    hidden = np.concatenate([h_fw, h_bw], axis=-1)
    cache = {"ids": ids, "fw": cache_fw, "bw": cache_bw, "cfg": cfg, "dtype": x.dtype}
    return hidden, cache


def bilstm_backward(dhidden, params: dict, cache) -> dict:
    cfg: BiLstmConfig = cache["cfg"]
    hid = cfg.hidden_size
    d_fw, d_bw = dhidden[..., :hid], dhidden[..., hid:]
    dx_fw, dwx_fw, dwh_fw, db_fw = _backprop_direction(
        d_fw, cache["fw"], params["fw_wx"], params["fw_wh"], reverse=False
    )
    dx_bw, dwx_bw, dwh_bw, db_bw = _backprop_direction(
        d_bw, cache["bw"], params["bw_wx"], params["bw_wh"], reverse=True
    )
    dx = dx_fw + dx_bw
    demb = np.zeros((cfg.vocab_size, cfg.embed_dim), dtype=cache["dtype"])
    np.add.at(demb, cache["ids"], dx)
    return {
        "emb": demb,
        "fw_wx": dwx_fw, "fw_wh": dwh_fw, "fw_b": db_fw,
        "bw_wx": dwx_bw, "bw_wh": dwh_bw, "bw_b": db_bw,
    }
