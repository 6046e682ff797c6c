"""Semantic branch: attention LSTM, additive attention and correlation LSTM.

Object features ``F`` (an ``(N, F)`` array) are summarised into one vector of
length ``H``. Per step ``t``:

    h_att_t        = LSTM_att([h_cor_{t-1}, f_mean], h_att_{t-1})
    a_i            = w_a . tanh(W_f f_i + W_h h_att_t)
    alpha          = softmax(a)
    f_att          = sum_i alpha_i f_i
    h_cor_t        = LSTM_cor([h_att_{t-1}, f_att], h_cor_{t-1})

and the output is ``h_cor_T``. States start at zero for every image.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import diffmath as dm
from .diffmath import Param, ShapeError

GATES = ("input", "forget", "cell", "output")


class LstmState(NamedTuple):
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, size: int) -> "LstmState":
        return cls(np.zeros(size), np.zeros(size))


class LstmParams:
    """Weights of one LSTM cell.

    The four gates are stored stacked along the first axis in the order
    (input, forget, cell-candidate, output); ``gate(name)`` returns views of
    one gate's input weights, recurrent weights and bias.
    """

    def __init__(self, input_size: int, hidden_size: int, name: str = "lstm"):
        self.input_size = input_size
        self.hidden_size = hidden_size
        H = hidden_size
        self.W_x = Param(np.zeros((4 * H, input_size)), f"{name}.W_x")
        self.W_h = Param(np.zeros((4 * H, H)), f"{name}.W_h")
        self.b = Param(np.zeros(4 * H), f"{name}.b")

    def params(self) -> list[Param]:
        return [self.W_x, self.W_h, self.b]

    def gate(self, name: str):
        k = GATES.index(name)
        sl = slice(k * self.hidden_size, (k + 1) * self.hidden_size)
        return self.W_x.value[sl], self.W_h.value[sl], self.b.value[sl]

    def init(self, rng: np.random.Generator):
        fan_in = self.input_size + self.hidden_size
        for p in self.params():
            p.value[...] = dm.init_uniform(rng, p.shape, fan_in)
        H = self.hidden_size
        self.b.value[H:2 * H] = 1.0


class LstmCache(NamedTuple):
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    tanh_c: np.ndarray


def lstm_step(p: LstmParams, x: np.ndarray, s: LstmState):
    if x.shape != (p.input_size,):
        raise ShapeError(f"lstm input {x.shape}, expected ({p.input_size},)")
    if s.h.shape != (p.hidden_size,) or s.c.shape != (p.hidden_size,):
        raise ShapeError("lstm state size mismatch")
    H = p.hidden_size
    z = p.W_x.value @ x + p.W_h.value @ s.h + p.b.value
    act = dm.sigmoid_map(z)
    i, f, o = act[:H], act[H:2 * H], act[3 * H:]
    g = dm.tanh_map(z[2 * H:3 * H])
    c = f * s.c + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return LstmState(h, c), LstmCache(x, s.h, s.c, i, f, g, o, tanh_c)


def _lstm_preact_grad(cache: LstmCache, dh, dc):
    i, f, g, o = cache.i, cache.f, cache.g, cache.o
    do = dh * cache.tanh_c
    dc = dc + dh * o * (1.0 - cache.tanh_c * cache.tanh_c)
    dz = np.concatenate([
        dm.sigmoid_backward(i, dc * g),
        dm.sigmoid_backward(f, dc * cache.c_prev),
        dm.tanh_backward(g, dc * i),
        dm.sigmoid_backward(o, do),
    ])
    return dz, dc * f


def lstm_step_backward(p: LstmParams, cache: LstmCache, dh, dc):
    """Returns ``(dx, dh_prev, dc_prev)``; accumulates weight gradients."""
    dz, dc_prev = _lstm_preact_grad(cache, dh, dc)
    p.W_x.grad += dz[:, None] * cache.x[None, :]
    p.W_h.grad += dz[:, None] * cache.h_prev[None, :]
    p.b.grad += dz
    return p.W_x.value.T @ dz, p.W_h.value.T @ dz, dc_prev


def _accumulate_lstm(p: LstmParams, caches, dzs):
    """Weight gradients of a whole sequence in one product per matrix."""
    DZ = np.stack(dzs)
    p.W_x.grad += DZ.T @ np.stack([c.x for c in caches])
    p.W_h.grad += DZ.T @ np.stack([c.h_prev for c in caches])
    p.b.grad += DZ.sum(axis=0)


class AttentionParams:
    def __init__(self, feat_size: int, hidden_size: int, att_size: int):
        self.W_f = Param(np.zeros((att_size, feat_size)), "attention.W_f")
        self.W_h = Param(np.zeros((att_size, hidden_size)), "attention.W_h")
        self.w_a = Param(np.zeros(att_size), "attention.w_a")

    def params(self) -> list[Param]:
        return [self.W_f, self.W_h, self.w_a]

    def init(self, rng: np.random.Generator):
        for p, fan_in in zip(self.params(), (self.W_f.shape[1], self.W_h.shape[1], self.w_a.shape[0])):
            p.value[...] = dm.init_uniform(rng, p.shape, fan_in)


def _attention(a: AttentionParams, proj_F, h_att):
    u = np.tanh(proj_F + a.W_h.value @ h_att)
    alpha = dm.softmax(u @ a.w_a.value)
    return alpha, u


def attention_weights(a: AttentionParams, F, h_att) -> np.ndarray:
    """Normalized additive-attention weights of each object given ``h_att``."""
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2 or F.shape[0] == 0:
        raise ShapeError("attention over an empty object set")
    return _attention(a, F @ a.W_f.value.T, h_att)[0]


def attention_backward(a: AttentionParams, F, h_att, alpha, u, galpha):
    """Backward of ``attention_weights``. Returns ``(dproj_F, dh_att)``.

    ``dproj_F`` is the gradient w.r.t. ``F @ W_f.T``; the caller folds it
    into ``W_f`` and ``F`` so that the projection is only done once per image.
    """
    da = dm.softmax_backward(alpha, galpha)
    a.w_a.grad += u.T @ da
    dpre = (da[:, None] * a.w_a.value[None, :]) * (1.0 - u * u)
    dsum = dpre.sum(axis=0)
    a.W_h.grad += dsum[:, None] * h_att[None, :]
    return dpre, a.W_h.value.T @ dsum


class SemanticNetParams:
    def __init__(self, feat_size: int, hidden_size: int, att_size: int):
        self.feat_size = feat_size
        self.hidden_size = hidden_size
        self.att_size = att_size
        self.att_lstm = LstmParams(hidden_size + feat_size, hidden_size, "att_lstm")
        self.cor_lstm = LstmParams(hidden_size + feat_size, hidden_size, "cor_lstm")
        self.attention = AttentionParams(feat_size, hidden_size, att_size)

    @property
    def out_size(self) -> int:
        return self.hidden_size

    def params(self) -> list[Param]:
        return self.att_lstm.params() + self.cor_lstm.params() + self.attention.params()

    def init(self, rng: np.random.Generator):
        self.att_lstm.init(rng)
        self.cor_lstm.init(rng)
        self.attention.init(rng)


@dataclass
class StepRecord:
    att: LstmCache
    cor: LstmCache
    h_att: np.ndarray
    alpha: np.ndarray
    u: np.ndarray


@dataclass
class SemanticTrace:
    F: np.ndarray
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.steps


def _check_objects(p: SemanticNetParams, F) -> np.ndarray:
    F = np.asarray(F, dtype=np.float64)
    if F.size == 0:
        return np.zeros((0, p.feat_size))
    if F.ndim != 2 or F.shape[1] != p.feat_size:
        raise ShapeError(f"object features {F.shape}, expected (N, {p.feat_size})")
    return F


def semantic_forward(p: SemanticNetParams, F, T: int | None = None):
    """Run the two-LSTM stack over object features.

    ``T=None`` uses one step per object. With no objects the result is a
    zero vector and the trace is empty.
    """
    F = _check_objects(p, F)
    N = F.shape[0]
    if T is None:
        T = N
    elif T < 1:
        raise ValueError(f"number of steps must be >= 1, got {T}")
    H = p.hidden_size
    trace = SemanticTrace(F)
    if N == 0:
        return np.zeros(H), trace

    f_mean = dm.mean_rows(F)
    proj_F = F @ p.attention.W_f.value.T
    att = LstmState.zeros(H)
    cor = LstmState.zeros(H)
    for _ in range(T):
        new_att, att_cache = lstm_step(p.att_lstm, np.concatenate([cor.h, f_mean]), att)
        alpha, u = _attention(p.attention, proj_F, new_att.h)
        f_att = dm.weighted_sum(F, alpha)
        cor, cor_cache = lstm_step(p.cor_lstm, np.concatenate([att.h, f_att]), cor)
        att = new_att
        trace.steps.append(StepRecord(att_cache, cor_cache, new_att.h, alpha, u))
    return cor.h, trace


def semantic_backward(p: SemanticNetParams, trace: SemanticTrace, grad_v_s) -> np.ndarray:
    """Backpropagate ``grad_v_s`` through a stored forward pass.

    Parameter gradients are accumulated; the gradient w.r.t. the object
    features (same shape as ``trace.F``) is returned.
    """
    F = trace.F
    H = p.hidden_size
    if trace.empty:
        return np.zeros_like(F)
    if grad_v_s.shape != (H,) or F.shape[1] != p.feat_size:
        raise ShapeError("trace does not match these parameters")
    if trace.steps[0].att.x.shape != (p.att_lstm.input_size,):
        raise ShapeError("trace does not match these parameters")

    N = F.shape[0]
    dF = np.zeros_like(F)
    dproj_F = np.zeros((N, p.att_size))
    df_mean = np.zeros(p.feat_size)
    dh_att = np.zeros(H)
    dc_att = np.zeros(H)
    dh_cor = grad_v_s.astype(np.float64).copy()
    dc_cor = np.zeros(H)
    att_Wx, att_Wh = p.att_lstm.W_x.value, p.att_lstm.W_h.value
    cor_Wx, cor_Wh = p.cor_lstm.W_x.value, p.cor_lstm.W_h.value
    dz_att, dz_cor = [], []
    for step in reversed(trace.steps):
        dz, dc_cor = _lstm_preact_grad(step.cor, dh_cor, dc_cor)
        dz_cor.append(dz)
        dx_cor, dh_cor_prev = cor_Wx.T @ dz, cor_Wh.T @ dz
        dh_att_prev_from_cor, df_att = dx_cor[:H], dx_cor[H:]
        gF, galpha = dm.weighted_sum_backward(F, step.alpha, df_att)
        dF += gF
        dproj, dh_from_attn = attention_backward(p.attention, F, step.h_att, step.alpha, step.u, galpha)
        dproj_F += dproj
        dz, dc_att = _lstm_preact_grad(step.att, dh_att + dh_from_attn, dc_att)
        dz_att.append(dz)
        dx_att, dh_att_prev = att_Wx.T @ dz, att_Wh.T @ dz
        df_mean += dx_att[H:]
        dh_cor = dh_cor_prev + dx_att[:H]
        dh_att = dh_att_prev + dh_att_prev_from_cor

    steps = trace.steps[::-1]
    _accumulate_lstm(p.cor_lstm, [s.cor for s in steps], dz_cor)
    _accumulate_lstm(p.att_lstm, [s.att for s in steps], dz_att)

    p.attention.W_f.grad += dproj_F.T @ F
    dF += dproj_F @ p.attention.W_f.value
    dF += dm.mean_rows_backward(N, df_mean)
    return dF


class FcSemanticParams:
    """Non-recurrent alternative: two affine+tanh layers on the mean object feature."""

    def __init__(self, feat_size: int, hidden_size: int, inner_size: int):
        self.feat_size = feat_size
        self.hidden_size = hidden_size
        self.W1 = Param(np.zeros((inner_size, feat_size)), "fc.W1")
        self.b1 = Param(np.zeros(inner_size), "fc.b1")
        self.W2 = Param(np.zeros((hidden_size, inner_size)), "fc.W2")
        self.b2 = Param(np.zeros(hidden_size), "fc.b2")

    @property
    def out_size(self) -> int:
        return self.hidden_size

    def params(self) -> list[Param]:
        return [self.W1, self.b1, self.W2, self.b2]

    def init(self, rng: np.random.Generator):
        for p, fan_in in zip(self.params(), (self.feat_size,) * 2 + (self.W1.shape[0],) * 2):
            p.value[...] = dm.init_uniform(rng, p.shape, fan_in)


@dataclass
class FcTrace:
    F: np.ndarray
    f_mean: np.ndarray | None = None
    z1: np.ndarray | None = None
    out: np.ndarray | None = None


def fc_semantic_forward(p: FcSemanticParams, F, T: int | None = None):
    F = _check_objects(p, F)
    if F.shape[0] == 0:
        return np.zeros(p.hidden_size), FcTrace(F)
    f_mean = dm.mean_rows(F)
    z1 = np.tanh(dm.affine(f_mean, p.W1, p.b1))
    out = np.tanh(dm.affine(z1, p.W2, p.b2))
    return out, FcTrace(F, f_mean, z1, out)


def fc_semantic_backward(p: FcSemanticParams, trace: FcTrace, grad_v_s) -> np.ndarray:
    if trace.out is None:
        return np.zeros_like(trace.F)
    g = dm.tanh_backward(trace.out, grad_v_s)
    g = dm.affine_backward(trace.z1, p.W2, p.b2, g)
    g = dm.tanh_backward(trace.z1, g)
    g = dm.affine_backward(trace.f_mean, p.W1, p.b1, g)
    return dm.mean_rows_backward(trace.F.shape[0], g)
