"""Versioned on-disk model format.

Layout: magic line `PBRK1`, one JSON metadata line (model kind, configs,
vocabulary, seed, parameter name/shape table), then all parameters as
little-endian float32 in the metadata's name order. Save/load round-trips
byte-identically.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError
from .nn import BiLstmConfig, EncoderConfig
from .vocab import Vocabulary

MAGIC = b"PBRK1\n"

KINDS = ("rbtd", "overall", "fine")
MODELS = ("encoder", "bilstm")


@dataclass
class Checkpoint:
    kind: str                      # which task head the params carry
    model: str                     # "encoder" or "bilstm"
    model_cfg: EncoderConfig | BiLstmConfig
    vocab: Vocabulary
    seed: int
    params: dict[str, np.ndarray]
    n_classes: int
    init_from: str | None = None   # provenance of the encoder weights
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown checkpoint kind {self.kind!r}")
        if self.model not in MODELS:
            raise DataError(f"unknown model {self.model!r}")


def save_checkpoint(ckpt: Checkpoint, path: str) -> None:
    names = sorted(ckpt.params)
    meta = {
        "format": 1,
        "kind": ckpt.kind,
        "model": ckpt.model,
        "model_cfg": ckpt.model_cfg.to_dict(),
        "vocab": ckpt.vocab.to_lines(),
        "seed": ckpt.seed,
        "n_classes": ckpt.n_classes,
        "init_from": ckpt.init_from,
        "extra": ckpt.extra,
        "params": [[n, list(ckpt.params[n].shape)] for n in names],
    }
    blob = b"".join(
        np.ascontiguousarray(ckpt.params[n], dtype="<f4").tobytes() for n in names
    )
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8"))
        f.write(b"\n")
        f.write(blob)
    os.replace(tmp, path)


def load_checkpoint(path: str, expect_kind: str | None = None) -> Checkpoint:
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise DataError(f"{path}: not a PBRK1 checkpoint (bad magic {magic!r})")
        meta_line = f.readline()
        try:
            meta = json.loads(meta_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise DataError(f"{path}: corrupt metadata: {e}") from e
        if meta.get("format") != 1:
            raise DataError(f"{path}: unsupported checkpoint format {meta.get('format')!r}")
        if expect_kind is not None and meta["kind"] != expect_kind:
            raise DataError(
                f"{path}: checkpoint kind {meta['kind']!r}, expected {expect_kind!r}"
            )
        params: dict[str, np.ndarray] = {}
        for name, shape in meta["params"]:
            n_items = int(np.prod(shape)) if shape else 1
            raw = f.read(4 * n_items)
            if len(raw) != 4 * n_items:
                raise DataError(f"{path}: truncated parameter blob at {name!r}")
            params[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        if f.read(1):
            raise DataError(f"{path}: trailing bytes after parameter blob")

    if meta["model"] == "encoder":
        cfg = EncoderConfig(**meta["model_cfg"])
    else:
        cfg = BiLstmConfig(**meta["model_cfg"])
    return Checkpoint(
        kind=meta["kind"],
        model=meta["model"],
        model_cfg=cfg,
        vocab=Vocabulary.from_lines(meta["vocab"]),
        seed=meta["seed"],
        params=params,
        n_classes=meta["n_classes"],
        init_from=meta["init_from"],
        extra=meta["extra"],
    )
