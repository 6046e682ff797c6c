"""Feature fusion, emotion classifier and the hierarchical cross-entropy loss.

The loss for one sample with emotion label ``y`` is

    L_total = L_emo + lam * L_pol
    L_emo   = -log p_emo[y]
    L_pol   = -log p_pol[polarity(y)]

where ``p_pol`` sums ``p_emo`` over the positive and negative emotions of the
taxonomy. A wrong guess of the right polarity (easy false) keeps ``L_pol``
small; a wrong guess across polarities (hard false) is penalised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffmath as dm
from .diffmath import Param, ShapeError
from .taxonomy import Taxonomy


class ClassifierParams:
    """Bias-free linear map from the fused feature to emotion logits."""

    def __init__(self, n_classes: int, in_size: int):
        self.W = Param(np.zeros((n_classes, in_size)), "classifier.W")

    def params(self) -> list[Param]:
        return [self.W]

    def init(self, rng: np.random.Generator):
        self.W.value[...] = dm.init_uniform(rng, self.W.shape, self.W.shape[1])


def fuse(v_g, v_s, v_e, dims=None) -> np.ndarray:
    if dims is not None:
        got = (len(v_g), len(v_s), len(v_e))
        if got != tuple(dims):
            raise ShapeError(f"branch features have lengths {got}, expected {tuple(dims)}")
    return dm.concat([v_g, v_s, v_e])


def classify(p: ClassifierParams, v_emo) -> np.ndarray:
    return dm.softmax(dm.affine(v_emo, p.W))


def classify_backward(p: ClassifierParams, v_emo, p_emo, grad_p) -> np.ndarray:
    """Returns the gradient w.r.t. ``v_emo``."""
    g_logits = dm.softmax_backward(p_emo, grad_p)
    return dm.affine_backward(v_emo, p.W, None, g_logits)


def _polarity_index(t: Taxonomy) -> np.ndarray:
    return np.array([int(p) for p in t.polarities])


def polarity_aggregate(t: Taxonomy, p_emo) -> np.ndarray:
    """``[P(positive), P(negative)]`` summed over the taxonomy's partition."""
    p_emo = np.asarray(p_emo, dtype=np.float64)
    if p_emo.shape != (t.size,):
        raise ShapeError(f"{p_emo.shape[0]} probabilities for a {t.size}-emotion taxonomy")
    pos, neg = t.partition_indices()
    return np.array([p_emo[pos].sum(), p_emo[neg].sum()])


def polarity_aggregate_backward(t: Taxonomy, grad_pol) -> np.ndarray:
    return np.asarray(grad_pol)[_polarity_index(t)]


def emotion_loss(p_emo, y_emo: int) -> float:
    return dm.nll_from_probs(p_emo, y_emo)


def polarity_loss(t: Taxonomy, p_emo, y_pol) -> float:
    return dm.nll_from_probs(polarity_aggregate(t, p_emo), int(y_pol))


@dataclass(frozen=True)
class LossBreakdown:
    L_emo: float
    L_pol: float
    lam: float
    L_total: float


def hierarchical_loss(t: Taxonomy, p_emo, y_emo: int, lam: float = 1.0) -> LossBreakdown:
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    y_pol = t.polarity_of(y_emo)
    L_emo = emotion_loss(p_emo, y_emo)
    L_pol = polarity_loss(t, p_emo, y_pol)
    # lam == 0 must reproduce plain cross-entropy bit for bit
    L_total = L_emo if lam == 0 else L_emo + lam * L_pol
    return LossBreakdown(L_emo, L_pol, float(lam), L_total)


def hierarchical_loss_backward(t: Taxonomy, p_emo, y_emo: int, lam: float = 1.0, scale: float = 1.0) -> np.ndarray:
    """Gradient of ``scale * L_total`` w.r.t. ``p_emo``."""
    grad = dm.nll_backward(p_emo, y_emo, scale)
    if lam != 0:
        p_pol = polarity_aggregate(t, p_emo)
        g_pol = dm.nll_backward(p_pol, int(t.polarity_of(y_emo)), scale * lam)
        grad = grad + polarity_aggregate_backward(t, g_pol)
    return grad


def loss_scenarios(t: Taxonomy | None = None) -> dict[str, tuple[np.ndarray, int]]:
    """Four constructed predictions for Mikel's wheel, each as ``(p_emo, label)``.

    The label is amusement (index 1, positive) throughout. ``easy_false`` and
    ``hard_false`` give the label the same probability (0.1003, so L_emo is
    about 2.30) but put 0.9 and 0.2 of the mass on the positive emotions,
    so L_pol is about 0.11 and 1.61 respectively.
    """
    from .taxonomy import mikel_default

    t = t or mikel_default()
    if t != mikel_default():
        raise ValueError("the loss scenarios are defined for Mikel's wheel")
    y = 1
    rows = {
        "true": [0.015, 0.95, 0.015, 0.010, 0.0025, 0.0025, 0.0025, 0.0025],
        "false": [0.30, 0.1003, 0.05, 0.0497, 0.125, 0.125, 0.125, 0.125],
        "easy_false": [0.70, 0.1003, 0.05, 0.0497, 0.025, 0.025, 0.025, 0.025],
        "hard_false": [0.0333, 0.1003, 0.0332, 0.0332, 0.65, 0.05, 0.05, 0.05],
    }
    return {k: (np.array(v), y) for k, v in rows.items()}
