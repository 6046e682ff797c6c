"""Central finite-difference checks of every backward pass.

Each ``check_*`` builds a seeded random instance, reduces the component's
output to a scalar with fixed random weights, and returns the largest
relative error between analytic and numeric gradients over all parameters
and inputs, with magnitudes below ``ABS_FLOOR / REL_TOL`` measured against
that floor instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffmath as dm
from . import encoders as enc
from . import head
from . import sequence_fusion as sf
from .network import Dims, FusionNet
from .taxonomy import Taxonomy, mikel_default

STEP = 1e-6
REL_TOL = 1e-4
ABS_FLOOR = 1e-7


def fd_inplace(f, arr: np.ndarray, h: float = STEP) -> np.ndarray:
    """Finite differences of ``f()`` w.r.t. ``arr``, which ``f`` must read."""
    grad = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def _compare(loss, run_backward, params, inputs) -> float:
    """``run_backward()`` must return analytic input grads in ``inputs`` order."""
    for p in params:
        p.zero_grad()
    analytic_inputs = run_backward()
    worst = 0.0
    for p in params:
        worst = max(worst, dm.grad_error(p.grad, fd_inplace(loss, p.value), ABS_FLOOR, REL_TOL))
    for arr, g in zip(inputs, analytic_inputs):
        worst = max(worst, dm.grad_error(g, fd_inplace(loss, arr), ABS_FLOOR, REL_TOL))
    return worst


def _rand_param(rng, shape, name="p", scale=1.0):
    return dm.Param(scale * rng.standard_normal(shape), name)


# ---------------------------------------------------------------- primitives


def check_affine(rng) -> float:
    x = rng.standard_normal(3)
    W = _rand_param(rng, (2, 3), "W")
    b = _rand_param(rng, 2, "b")
    c = rng.standard_normal(2)
    loss = lambda: float(c @ dm.affine(x, W, b))
    return _compare(loss, lambda: [dm.affine_backward(x, W, b, c)], [W, b], [x])


def _pointwise(fwd, bwd, rng) -> float:
    x = rng.standard_normal(5)
    c = rng.standard_normal(5)
    loss = lambda: float(c @ fwd(x))
    return _compare(loss, lambda: [bwd(fwd(x), c)], [], [x])


def check_tanh(rng) -> float:
    return _pointwise(dm.tanh_map, lambda y, g: dm.tanh_backward(y, g), rng)


def check_sigmoid(rng) -> float:
    return _pointwise(dm.sigmoid_map, lambda y, g: dm.sigmoid_backward(y, g), rng)


def check_softmax(rng) -> float:
    return _pointwise(dm.softmax, lambda y, g: dm.softmax_backward(y, g), rng)


def check_concat(rng) -> float:
    parts = [rng.standard_normal(n) for n in (2, 3, 1)]
    c = rng.standard_normal(6)
    loss = lambda: float(c @ dm.concat(parts))
    return _compare(loss, lambda: dm.concat_backward([2, 3, 1], c), [], parts)


def check_mean_rows(rng) -> float:
    F = rng.standard_normal((4, 3))
    c = rng.standard_normal(3)
    loss = lambda: float(c @ dm.mean_rows(F))
    return _compare(loss, lambda: [dm.mean_rows_backward(4, c)], [], [F])


def check_weighted_sum(rng) -> float:
    F = rng.standard_normal((4, 3))
    alpha = dm.softmax(rng.standard_normal(4))
    c = rng.standard_normal(3)
    loss = lambda: float(c @ dm.weighted_sum(F, alpha))
    return _compare(loss, lambda: list(dm.weighted_sum_backward(F, alpha, c)), [], [F, alpha])


def check_nll(rng) -> float:
    p = rng.uniform(0.2, 1.0, 5)
    target = int(rng.integers(5))
    loss = lambda: dm.nll_from_probs(p, target)
    return _compare(loss, lambda: [dm.nll_backward(p, target)], [], [p])


# ---------------------------------------------------------------- semantic branch


def _randomize(params, rng, scale=0.5):
    for p in params:
        p.value[...] = scale * rng.standard_normal(p.shape)


def check_lstm_step(rng) -> float:
    p = sf.LstmParams(3, 4)
    _randomize(p.params(), rng)
    x = rng.standard_normal(3)
    h, c0 = rng.standard_normal(4), rng.standard_normal(4)
    ch, cc = rng.standard_normal(4), rng.standard_normal(4)

    def loss():
        s, _ = sf.lstm_step(p, x, sf.LstmState(h, c0))
        return float(ch @ s.h + cc @ s.c)

    def backward():
        _, cache = sf.lstm_step(p, x, sf.LstmState(h, c0))
        return list(sf.lstm_step_backward(p, cache, ch, cc))

    return _compare(loss, backward, p.params(), [x, h, c0])


def check_attention(rng) -> float:
    a = sf.AttentionParams(3, 4, 3)
    _randomize(a.params(), rng)
    F = rng.standard_normal((3, 3))
    h = rng.standard_normal(4)
    c = rng.standard_normal(3)
    loss = lambda: float(c @ sf.attention_weights(a, F, h))

    def backward():
        proj = F @ a.W_f.value.T
        alpha, u = sf._attention(a, proj, h)
        dproj, dh = sf.attention_backward(a, F, h, alpha, u, c)
        a.W_f.grad += dproj.T @ F
        return [dproj @ a.W_f.value, dh]

    return _compare(loss, backward, a.params(), [F, h])


def tiny_semantic(rng, N=2, F=3, H=4, M=3):
    p = sf.SemanticNetParams(F, H, M)
    _randomize(p.params(), rng)
    return p, rng.standard_normal((N, F))


def check_semantic_net(rng, T: int = 2) -> float:
    p, F = tiny_semantic(rng)
    c = rng.standard_normal(p.hidden_size)
    loss = lambda: float(c @ sf.semantic_forward(p, F, T)[0])

    def backward():
        _, trace = sf.semantic_forward(p, F, T)
        return [sf.semantic_backward(p, trace, c)]

    return _compare(loss, backward, p.params(), [F])


def check_fc_semantic(rng) -> float:
    p = sf.FcSemanticParams(3, 4, 3)
    _randomize(p.params(), rng)
    F = rng.standard_normal((2, 3))
    c = rng.standard_normal(4)
    loss = lambda: float(c @ sf.fc_semantic_forward(p, F)[0])

    def backward():
        _, trace = sf.fc_semantic_forward(p, F)
        return [sf.fc_semantic_backward(p, trace, c)]

    return _compare(loss, backward, p.params(), [F])


# ---------------------------------------------------------------- encoders and head


def _check_encoder(rng, encode) -> float:
    p = enc.EncoderParams(4, 3)
    _randomize(p.params(), rng)
    raw = rng.standard_normal(4)
    c = rng.standard_normal(3)
    loss = lambda: float(c @ encode(p, raw)[0])

    def backward():
        _, cache = encode(p, raw)
        return [enc.encode_backward(p, cache, c)]

    return _compare(loss, backward, p.params(), [raw])


def check_global_encoder(rng) -> float:
    return _check_encoder(rng, enc.encode_global)


def check_expression_encoder(rng) -> float:
    return _check_encoder(rng, enc.encode_expression)


def _random_taxonomy(rng) -> Taxonomy:
    C = int(rng.choice([2, 6, 8]))
    if C == 8:
        return mikel_default()
    pols = ["positive", "negative"] + [str(rng.choice(["positive", "negative"])) for _ in range(C - 2)]
    rng.shuffle(pols)
    return Taxonomy.from_pairs([(f"e{i}", pol) for i, pol in enumerate(pols)])


def check_hierarchical_loss(rng) -> float:
    """Classifier, softmax and hierarchical loss; gradients w.r.t. W and the fused feature."""
    tax = _random_taxonomy(rng)
    lam = float(rng.uniform(0.0, 2.0))
    y = int(rng.integers(tax.size))
    clf = head.ClassifierParams(tax.size, 5)
    _randomize(clf.params(), rng)
    v = rng.standard_normal(5)
    loss = lambda: head.hierarchical_loss(tax, head.classify(clf, v), y, lam).L_total

    def backward():
        p = head.classify(clf, v)
        g = head.hierarchical_loss_backward(tax, p, y, lam)
        return [head.classify_backward(clf, v, p, g)]

    return _compare(loss, backward, clf.params(), [v])


class _Sample:
    def __init__(self, global_feat, objects, face):
        self.global_feat, self.objects, self.face = global_feat, objects, face


def tiny_network(rng, snet: str = "lstm", t_steps: int | None = 2) -> FusionNet:
    dims = Dims(d1=3, d2=4, d3=2, H=4, M=3, F=3)
    model = FusionNet(mikel_default(), dims, 4, 3, snet=snet, t_steps=t_steps)
    _randomize(model.params(), rng)
    return model


def check_composite(rng) -> float:
    """End-to-end: encoders, semantic branch, fusion, classifier, hierarchical loss."""
    model = tiny_network(rng)
    lam = float(rng.uniform(0.0, 2.0))
    y = int(rng.integers(model.taxonomy.size))
    face = rng.standard_normal(3) if rng.random() < 0.5 else None
    s = _Sample(rng.standard_normal(4), rng.standard_normal((2, 3)), face)
    inputs = [s.global_feat, s.objects] + ([face] if face is not None else [])

    def loss():
        return head.hierarchical_loss(model.taxonomy, model.predict(s), y, lam).L_total

    def backward():
        p, cache = model.forward(s)
        d_g, d_obj, d_face = model.backward(cache, head.hierarchical_loss_backward(model.taxonomy, p, y, lam))
        return [d_g, d_obj] + ([d_face] if face is not None else [])

    return _compare(loss, backward, model.params(), inputs)


COMPONENTS = {
    "affine": check_affine,
    "tanh": check_tanh,
    "sigmoid": check_sigmoid,
    "softmax": check_softmax,
    "concat": check_concat,
    "mean_rows": check_mean_rows,
    "weighted_sum": check_weighted_sum,
    "nll_from_probs": check_nll,
    "lstm_step": check_lstm_step,
    "attention": check_attention,
    "semantic_net": check_semantic_net,
    "fc_semantic_net": check_fc_semantic,
    "global_encoder": check_global_encoder,
    "expression_encoder": check_expression_encoder,
    "classifier_hierarchical_loss": check_hierarchical_loss,
    "composite_network_loss": check_composite,
}


@dataclass
class CheckResult:
    component: str
    max_rel_error: float
    seeds: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error < REL_TOL


def run_gradcheck(seed: int = 0, n_seeds: int = 10, components=None) -> list[CheckResult]:
    results = []
    for name in components or COMPONENTS:
        fn = COMPONENTS[name]
        worst = 0.0
        for k in range(n_seeds):
            worst = max(worst, fn(dm.make_rng(seed, 100, k)))
        results.append(CheckResult(name, worst, n_seeds))
    return results
