"""Stand-ins for the global and expression backbones.

Each branch maps a precomputed raw stimulus vector to a fixed-length feature,
either through ``tanh(W raw + b)`` or unchanged (identity passthrough, for
fixtures that already carry embedding-space features).
"""

from __future__ import annotations

import numpy as np

from . import diffmath as dm
from .diffmath import Param, ShapeError

TRAINABLE = "trainable"
IDENTITY = "identity"


class EncoderParams:
    def __init__(self, raw_size: int, out_size: int, mode: str = TRAINABLE, name: str = "encoder"):
        if mode not in (TRAINABLE, IDENTITY):
            raise ValueError(f"unknown encoder mode {mode!r}")
        if mode == IDENTITY and raw_size != out_size:
            raise ValueError(f"identity encoder needs raw size == output size ({raw_size} != {out_size})")
        self.raw_size = raw_size
        self.out_size = out_size
        self.mode = mode
        self.projection = self.bias = None
        if mode == TRAINABLE:
            self.projection = Param(np.zeros((out_size, raw_size)), f"{name}.projection")
            self.bias = Param(np.zeros(out_size), f"{name}.bias")

    def params(self) -> list[Param]:
        return [] if self.mode == IDENTITY else [self.projection, self.bias]

    def init(self, rng: np.random.Generator):
        for p in self.params():
            p.value[...] = dm.init_uniform(rng, p.shape, self.raw_size)


def encode_global(p: EncoderParams, raw):
    """Returns ``(v, cache)``; the cache is whatever ``encode_backward`` needs."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape != (p.raw_size,):
        raise ShapeError(f"raw stimulus {raw.shape}, expected ({p.raw_size},)")
    if p.mode == IDENTITY:
        return raw, IDENTITY
    v = np.tanh(dm.affine(raw, p.projection, p.bias))
    return v, (raw, v)


def encode_expression(p: EncoderParams, face):
    """Encode a face vector, or return an exact zero vector when ``face`` is None."""
    if face is None:
        return np.zeros(p.out_size), None
    return encode_global(p, face)


def encode_backward(p: EncoderParams, cache, grad_v):
    """Accumulate encoder gradients. Returns the gradient w.r.t. the raw input
    (None for an absent face)."""
    if cache is None:
        return None
    if cache is IDENTITY:
        return grad_v
    raw, v = cache
    return dm.affine_backward(raw, p.projection, p.bias, dm.tanh_backward(v, grad_v))
