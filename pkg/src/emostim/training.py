"""Adam with a step schedule, the epoch driver and classification metrics."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import head
from .diffmath import Param, make_rng
from .network import Dims, FusionNet
from .taxonomy import Taxonomy, resolve_taxonomy


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Schedule:
    base_lr: float = 5e-5
    decay_factor: float = 0.1
    decay_every: int = 5
    total_epochs: int = 50


def lr_at_epoch(s: Schedule, epoch: int) -> float:
    if not 0 <= epoch < s.total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {s.total_epochs})")
    return s.base_lr * s.decay_factor ** (epoch // s.decay_every)


class AdamState:
    def __init__(self, params: list[Param], beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]
        self.t = 0


def adam_step(state: AdamState, params: list[Param], lr: float, weight_decay: float = 0.0, decoupled: bool = False):
    """One Adam update over ``params`` (in order), then zero their grads.

    Weight decay is added to the gradient before the moment updates unless
    ``decoupled`` is set, in which case it shrinks the weights directly.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        if weight_decay and not decoupled:
            g = g + weight_decay * p.value
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if weight_decay and decoupled:
            p.value -= lr * weight_decay * p.value
        p.value -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.zero_grad()


@dataclass
class TrainConfig:
    lam: float = 1.0
    n_max: int = 10
    t_steps: int | None = None
    dims: Dims = field(default_factory=Dims)
    batch_size: int = 32
    seed: int = 0
    epochs: int = 50
    lr: float = 5e-5
    weight_decay: float = 5e-5
    decay_every: int = 5
    decay_factor: float = 0.1
    split: tuple[float, float, float] = (0.8, 0.05, 0.15)
    taxonomy: object = "mikel"
    decoupled_weight_decay: bool = False
    snet: str = "lstm"
    global_mode: str = "trainable"
    face_mode: str = "trainable"

    # JSON key -> attribute; only ``lambda`` differs because it is a keyword
    KEYS = {"lambda": "lam"}

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not (isinstance(self.lam, (int, float)) and self.lam >= 0 and math.isfinite(self.lam)):
            raise ConfigError(f"lambda must be a finite non-negative number, got {self.lam!r}")
        for k in ("n_max", "batch_size", "epochs", "decay_every"):
            v = getattr(self, k)
            lo = 0 if k == "n_max" else 1
            if not isinstance(v, int) or isinstance(v, bool) or v < lo:
                raise ConfigError(f"{k} must be an integer >= {lo}, got {v!r}")
        if self.t_steps is not None and (not isinstance(self.t_steps, int) or self.t_steps < 1):
            raise ConfigError(f"t_steps must be null or a positive integer, got {self.t_steps!r}")
        for k in ("lr", "weight_decay", "decay_factor"):
            v = getattr(self, k)
            if not isinstance(v, (int, float)) or v < 0 or not math.isfinite(v):
                raise ConfigError(f"{k} must be a finite non-negative number, got {v!r}")
        split = tuple(self.split)
        if len(split) != 3 or any(s < 0 for s in split) or not math.isclose(sum(split), 1.0, abs_tol=1e-9):
            raise ConfigError(f"split fractions must be three non-negatives summing to 1, got {self.split!r}")
        if self.snet not in ("lstm", "fc"):
            raise ConfigError(f"snet must be 'lstm' or 'fc', got {self.snet!r}")
        for k in ("global_mode", "face_mode"):
            if getattr(self, k) not in ("trainable", "identity"):
                raise ConfigError(f"{k} must be 'trainable' or 'identity'")
        try:
            resolve_taxonomy(self.taxonomy)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def schedule(self) -> Schedule:
        return Schedule(self.lr, self.decay_factor, self.decay_every, self.epochs)

    def resolved_taxonomy(self) -> Taxonomy:
        return resolve_taxonomy(self.taxonomy)

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in obj.items():
            attr = cls.KEYS.get(key, key)
            if attr not in names or key == "lam":
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[attr] = value
        if "dims" in kwargs:
            d = kwargs["dims"]
            if not isinstance(d, dict):
                raise ConfigError("dims must be an object")
            try:
                kwargs["dims"] = Dims(**d)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad dims: {exc}") from None
        if "split" in kwargs:
            s = kwargs["split"]
            if isinstance(s, dict):
                try:
                    s = (s["train"], s["val"], s["test"])
                except KeyError as exc:
                    raise ConfigError(f"split is missing {exc}") from None
            kwargs["split"] = tuple(s)
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "dims":
                v = asdict(v)
            elif f.name == "split":
                v = dict(zip(("train", "val", "test"), v))
            elif f.name == "taxonomy" and not isinstance(v, (str, dict)):
                v = v.to_dict()
            key = {a: k for k, a in self.KEYS.items()}.get(f.name, f.name)
            out[key] = v
        return out

    def replace(self, **changes) -> "TrainConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return TrainConfig(**d)


def desk_config(**overrides) -> TrainConfig:
    """Settings for training the small encoders from scratch on synthetic data.

    The optimizer defaults of :class:`TrainConfig` are tuned for fine-tuning
    pretrained backbones and barely move randomly initialised weights.
    """
    base = dict(lr=5e-3, epochs=12, decay_every=5, decay_factor=0.3, seed=42)
    base.update(overrides)
    return TrainConfig(**base)


def build_model(cfg: TrainConfig, raw_global: int, raw_face: int) -> FusionNet:
    model = FusionNet(
        cfg.resolved_taxonomy(),
        cfg.dims,
        raw_global,
        raw_face,
        global_mode=cfg.global_mode,
        face_mode=cfg.face_mode,
        snet=cfg.snet,
        t_steps=cfg.t_steps,
        n_max=cfg.n_max,
    )
    model.init(cfg.seed)
    return model


@dataclass
class EpochSummary:
    epoch: int
    lr: float
    L_emo: float
    L_pol: float
    L_total: float

    def to_dict(self) -> dict:
        return asdict(self)


def train_epoch(model: FusionNet, data, cfg: TrainConfig, epoch: int, adam: AdamState) -> EpochSummary:
    """One shuffled pass of minibatch Adam on the mean hierarchical loss."""
    if not data:
        raise ValueError("cannot train on an empty dataset")
    tax = model.taxonomy
    params = model.params()
    lr = lr_at_epoch(cfg.schedule, epoch)
    order = make_rng(cfg.seed, 1, epoch).permutation(len(data))
    sums = [0.0, 0.0, 0.0]
    for start in range(0, len(order), cfg.batch_size):
        batch = order[start:start + cfg.batch_size]
        scale = 1.0 / len(batch)
        for i in batch:
            sample = data[i]
            p_emo, cache = model.forward(sample)
            loss = head.hierarchical_loss(tax, p_emo, sample.y, cfg.lam)
            sums[0] += loss.L_emo
            sums[1] += loss.L_pol
            sums[2] += loss.L_total
            model.backward(cache, head.hierarchical_loss_backward(tax, p_emo, sample.y, cfg.lam, scale))
        adam_step(adam, params, lr, cfg.weight_decay, cfg.decoupled_weight_decay)
    n = len(data)
    return EpochSummary(epoch, lr, sums[0] / n, sums[1] / n, sums[2] / n)


@dataclass
class Metrics:
    emotion_acc: float
    polarity_acc: float
    confusion: list[list[int]]
    class_counts: list[int]
    labels: list[str]
    L_emo: float
    L_pol: float
    L_total: float

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(model: FusionNet, data, taxonomy: Taxonomy | None = None, lam: float = 1.0) -> Metrics:
    """Argmax accuracy (ties go to the lowest index), polarity accuracy of the
    argmax, confusion matrix (rows = true class) and mean losses."""
    if not data:
        raise ValueError("cannot evaluate an empty dataset")
    tax = taxonomy or model.taxonomy
    C = tax.size
    confusion = np.zeros((C, C), dtype=np.int64)
    pol_hits = 0
    sums = [0.0, 0.0, 0.0]
    for sample in data:
        p_emo = model.predict(sample)
        pred = int(np.argmax(p_emo))
        confusion[sample.y, pred] += 1
        pol_hits += tax.polarity_of(pred) == tax.polarity_of(sample.y)
        loss = head.hierarchical_loss(tax, p_emo, sample.y, lam)
        sums[0] += loss.L_emo
        sums[1] += loss.L_pol
        sums[2] += loss.L_total
    n = len(data)
    return Metrics(
        emotion_acc=int(np.trace(confusion)) / n,
        polarity_acc=pol_hits / n,
        confusion=confusion.tolist(),
        class_counts=confusion.sum(axis=1).tolist(),
        labels=tax.names,
        L_emo=sums[0] / n,
        L_pol=sums[1] / n,
        L_total=sums[2] / n,
    )


@dataclass
class RunReport:
    config: dict
    epochs: list[dict]
    final: dict
    n_train: int
    n_val: int
    n_test: int
    wall_clock: float = 0.0

    def to_dict(self) -> dict:
        # wall-clock stays out of the serialized report so reruns are bit-identical
        d = asdict(self)
        d.pop("wall_clock")
        return d


def run_training(cfg: TrainConfig, train, val=(), test=(), log=None):
    """Train a fresh model and evaluate it on ``test`` (or ``train`` if empty).

    Returns ``(model, RunReport)``. ``log`` receives one line per epoch.
    """
    from .data import check_consistent

    t0 = time.perf_counter()
    g_size, f_size, e_size = check_consistent(list(train) + list(val) + list(test))
    if f_size is not None and f_size != cfg.dims.F:
        raise ConfigError(f"object features have length {f_size} but dims.F = {cfg.dims.F}")
    model = build_model(cfg, g_size, e_size if e_size is not None else cfg.dims.d3)
    adam = AdamState(model.params())
    rows = []
    for epoch in range(cfg.epochs):
        summary = train_epoch(model, train, cfg, epoch, adam).to_dict()
        if val:
            summary["val_emotion_acc"] = evaluate(model, val, lam=cfg.lam).emotion_acc
        rows.append(summary)
        if log:
            log(
                f"epoch {epoch + 1:3d}/{cfg.epochs} lr={summary['lr']:.2e} "
                f"L_emo={summary['L_emo']:.4f} L_pol={summary['L_pol']:.4f} "
                f"L_total={summary['L_total']:.4f}"
                + (f" val_acc={summary['val_emotion_acc']:.4f}" if val else "")
            )
    final = evaluate(model, test if test else train, lam=cfg.lam)
    report = RunReport(
        config=cfg.to_dict(),
        epochs=rows,
        final=final.to_dict(),
        n_train=len(train),
        n_val=len(val),
        n_test=len(test),
        wall_clock=time.perf_counter() - t0,
    )
    return model, report
