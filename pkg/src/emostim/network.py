"""The full stimuli-aware fusion network for one image at a time."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import diffmath as dm
from . import encoders as enc
from . import head
from . import sequence_fusion as sf
from .taxonomy import Taxonomy

SNET_LSTM = "lstm"
SNET_FC = "fc"


@dataclass(frozen=True)
class Dims:
    """Branch widths: ``d1`` global, ``d2`` semantic (== ``H``), ``d3`` expression,
    ``H`` LSTM hidden size, ``M`` attention size, ``F`` object feature size."""

    d1: int = 64
    d2: int = 32
    d3: int = 32
    H: int = 32
    M: int = 32
    F: int = 16

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ValueError(f"dimension {k} must be a positive integer, got {v!r}")
        if self.d2 != self.H:
            raise ValueError(f"semantic width d2={self.d2} must equal LSTM hidden size H={self.H}")

    @property
    def fused(self) -> int:
        return self.d1 + self.d2 + self.d3


class FusionNet:
    """Global, semantic and expression branches feeding one emotion classifier.

    Parameters are initialised and serialised in the order returned by
    :meth:`params`: global encoder, expression encoder, semantic branch
    (attention LSTM, correlation LSTM, attention; or the FC layers),
    classifier.
    """

    def __init__(
        self,
        taxonomy: Taxonomy,
        dims: Dims,
        raw_global: int,
        raw_face: int,
        global_mode: str = enc.TRAINABLE,
        face_mode: str = enc.TRAINABLE,
        snet: str = SNET_LSTM,
        t_steps: int | None = None,
        n_max: int = 10,
    ):
        self.taxonomy = taxonomy
        self.dims = dims
        self.t_steps = t_steps
        self.n_max = n_max
        self.snet_kind = snet
        self.global_enc = enc.EncoderParams(raw_global, dims.d1, global_mode, "global")
        self.face_enc = enc.EncoderParams(raw_face, dims.d3, face_mode, "expression")
        if snet == SNET_LSTM:
            self.snet = sf.SemanticNetParams(dims.F, dims.H, dims.M)
            self._snet_fwd, self._snet_bwd = sf.semantic_forward, sf.semantic_backward
        elif snet == SNET_FC:
            self.snet = sf.FcSemanticParams(dims.F, dims.H, dims.M)
            self._snet_fwd, self._snet_bwd = sf.fc_semantic_forward, sf.fc_semantic_backward
        else:
            raise ValueError(f"unknown semantic branch {snet!r}")
        self.classifier = head.ClassifierParams(taxonomy.size, dims.fused)

    def params(self) -> list[dm.Param]:
        return (
            self.global_enc.params()
            + self.face_enc.params()
            + self.snet.params()
            + self.classifier.params()
        )

    def init(self, seed: int):
        rng = dm.make_rng(seed, 0)
        self.global_enc.init(rng)
        self.face_enc.init(rng)
        self.snet.init(rng)
        self.classifier.init(rng)

    def zero_grad(self):
        for p in self.params():
            p.zero_grad()

    def describe(self) -> dict:
        return {
            "taxonomy": self.taxonomy.to_dict(),
            "dims": asdict(self.dims),
            "raw_global": self.global_enc.raw_size,
            "raw_face": self.face_enc.raw_size,
            "global_mode": self.global_enc.mode,
            "face_mode": self.face_enc.mode,
            "snet": self.snet_kind,
            "t_steps": self.t_steps,
            "n_max": self.n_max,
        }

    def forward(self, sample):
        """Returns ``(p_emo, cache)`` for one record."""
        v_g, g_cache = enc.encode_global(self.global_enc, sample.global_feat)
        objects = sample.objects[: self.n_max]
        v_s, s_trace = self._snet_fwd(self.snet, objects, self.t_steps)
        v_e, e_cache = enc.encode_expression(self.face_enc, sample.face)
        v_emo = head.fuse(v_g, v_s, v_e, (self.dims.d1, self.dims.d2, self.dims.d3))
        p_emo = head.classify(self.classifier, v_emo)
        return p_emo, (g_cache, s_trace, e_cache, v_emo, p_emo)

    def backward(self, cache, grad_p):
        """Accumulate parameter gradients. Returns input gradients
        ``(d_global, d_objects, d_face)`` (``d_face`` is None when absent)."""
        g_cache, s_trace, e_cache, v_emo, p_emo = cache
        g_v = head.classify_backward(self.classifier, v_emo, p_emo, grad_p)
        d1, d2 = self.dims.d1, self.dims.d2
        g_vg, g_vs, g_ve = g_v[:d1], g_v[d1:d1 + d2], g_v[d1 + d2:]
        d_face = enc.encode_backward(self.face_enc, e_cache, g_ve)
        d_obj = self._snet_bwd(self.snet, s_trace, g_vs)
        d_global = enc.encode_backward(self.global_enc, g_cache, g_vg)
        return d_global, d_obj, d_face

    def predict(self, sample) -> np.ndarray:
        return self.forward(sample)[0]
