"""Sample records, JSON-lines fixtures, splits and the synthetic generator."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .diffmath import make_rng
from .taxonomy import Taxonomy, TaxonomyError, mikel_default

FIELDS = ("id", "label", "global", "objects", "face")


class DataError(ValueError):
    pass


@dataclass
class SampleRecord:
    """One image's precomputed stimuli: global vector, object features
    (``(N, F)``, detector-confidence order) and an optional face vector."""

    id: str
    label: str
    y: int
    global_feat: np.ndarray
    objects: np.ndarray
    face: np.ndarray | None = None

    @property
    def n_objects(self) -> int:
        return self.objects.shape[0]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "global": self.global_feat.tolist(),
            "objects": self.objects.tolist(),
            "face": None if self.face is None else self.face.tolist(),
        }


def _reject_constant(name):
    raise ValueError(f"non-finite number {name}")


def _vector(value, what: str) -> np.ndarray:
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise DataError(f"{what} must be an array of numbers")
    arr = np.array(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{what} contains a non-finite value")
    return arr


def record_from_json(obj, taxonomy: Taxonomy, n_max: int | None = None) -> SampleRecord:
    if not isinstance(obj, dict):
        raise DataError("record must be a JSON object")
    missing = [k for k in FIELDS if k not in obj]
    if missing:
        raise DataError(f"missing field(s) {', '.join(missing)}")
    extra = sorted(set(obj) - set(FIELDS))
    if extra:
        raise DataError(f"unexpected field(s) {', '.join(extra)}")
    if not isinstance(obj["id"], str):
        raise DataError("id must be a string")
    try:
        y = taxonomy.index_of(obj["label"])
    except TaxonomyError:
        raise DataError(f"unknown label {obj['label']!r}") from None
    global_feat = _vector(obj["global"], "global")
    if global_feat.size == 0:
        raise DataError("global vector is empty")

    objs = obj["objects"]
    if not isinstance(objs, list):
        raise DataError("objects must be an array")
    if n_max is not None and len(objs) > n_max:
        warnings.warn(f"record {obj['id']!r}: keeping the first {n_max} of {len(objs)} objects")
        objs = objs[:n_max]
    rows = [_vector(o, f"objects[{k}]") for k, o in enumerate(objs)]
    if len({r.size for r in rows}) > 1:
        raise DataError("object vectors differ in length")
    objects = np.stack(rows) if rows else np.empty((0, 0))

    face = None
    if obj["face"] is not None:
        face = _vector(obj["face"], "face")
    return SampleRecord(obj["id"], obj["label"], y, global_feat, objects, face)


def parse_jsonl(path, taxonomy: Taxonomy, n_max: int | None = None) -> list[SampleRecord]:
    """Read and validate a fixture file; errors name the offending line."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line, parse_constant=_reject_constant)
                records.append(record_from_json(obj, taxonomy, n_max))
            except (ValueError, OverflowError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return records


def dump_jsonl(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json()) + "\n")


def check_consistent(records) -> tuple[int, int | None, int | None]:
    """Return (global size, object size, face size) shared by all records."""
    if not records:
        raise DataError("empty dataset")
    g = {r.global_feat.size for r in records}
    f = {r.objects.shape[1] for r in records if r.n_objects}
    e = {r.face.size for r in records if r.face is not None}
    for name, sizes in (("global", g), ("object", f), ("face", e)):
        if len(sizes) > 1:
            raise DataError(f"{name} vectors differ in length across records: {sorted(sizes)}")
    return g.pop(), (f.pop() if f else None), (e.pop() if e else None)


def split_dataset(records, fractions=(0.8, 0.05, 0.15), seed: int = 0):
    """Shuffle with a seeded stream and cut into train/val/test by fraction."""
    if len(fractions) != 3 or any(f < 0 for f in fractions) or not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise ValueError(f"split fractions must be three non-negatives summing to 1, got {fractions}")
    n = len(records)
    order = make_rng(seed, 2).permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = min(int(round(fractions[1] * n)), n - n_train)
    pick = lambda idx: [records[i] for i in idx]
    return (
        pick(order[:n_train]),
        pick(order[n_train:n_train + n_val]),
        pick(order[n_train + n_val:]),
    )


@dataclass
class SynthSpec:
    """Gaussian class clusters whose means are grouped by polarity.

    For each stimulus kind, the two polarity centres sit at ``+/- polarity_sep``
    along a random axis, and every class mean adds an offset of norm
    ``class_sep`` orthogonal to that axis. With ``polarity_sep > class_sep``
    every same-polarity pair of means is closer than every cross-polarity pair.
    """

    taxonomy: Taxonomy = field(default_factory=mikel_default)
    samples_per_class: int = 250
    test_per_class: int = 50
    global_dim: int = 32
    object_dim: int = 16
    face_dim: int = 16
    noise: float = 0.5
    polarity_sep: float = 1.5
    class_sep: float = 1.0
    face_prob: float = 0.5
    min_objects: int = 0
    max_objects: int = 10
    seed: int = 42

    def __post_init__(self):
        for k in ("samples_per_class", "global_dim", "object_dim", "face_dim"):
            if getattr(self, k) < 1:
                raise ValueError(f"{k} must be positive")
        if self.test_per_class < 0:
            raise ValueError("test_per_class must be non-negative")
        if not self.noise > 0:
            raise ValueError("noise scale must be positive")
        if not 0.0 <= self.face_prob <= 1.0:
            raise ValueError("face_prob must lie in [0, 1]")
        if not 0 <= self.min_objects <= self.max_objects:
            raise ValueError("need 0 <= min_objects <= max_objects")

    @classmethod
    def from_dict(cls, obj: dict) -> "SynthSpec":
        from .taxonomy import resolve_taxonomy

        obj = dict(obj)
        obj["taxonomy"] = resolve_taxonomy(obj.get("taxonomy"))
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown synthetic spec key(s): {sorted(unknown)}")
        return cls(**obj)


def _unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def class_means(spec: SynthSpec, dim: int, rng) -> np.ndarray:
    axis = _unit(rng, dim)
    means = np.empty((spec.taxonomy.size, dim))
    for c in range(spec.taxonomy.size):
        sign = 1.0 if spec.taxonomy.polarity_of(c) == 0 else -1.0
        off = rng.standard_normal(dim)
        off -= off.dot(axis) * axis
        off *= spec.class_sep / np.linalg.norm(off)
        means[c] = sign * spec.polarity_sep * axis + off
    return means


def synth_geometry(spec: SynthSpec) -> dict[str, np.ndarray]:
    rng = make_rng(spec.seed, 10)
    return {
        "global": class_means(spec, spec.global_dim, rng),
        "object": class_means(spec, spec.object_dim, rng),
        "face": class_means(spec, spec.face_dim, rng),
    }


def synth_generate(spec: SynthSpec, split: str = "train") -> list[SampleRecord]:
    """Draw ``samples_per_class`` (train) or ``test_per_class`` (test) records per class.

    Records come out class by class. Train and test use independent streams
    of the same seed and share the class geometry.
    """
    if split not in ("train", "test"):
        raise ValueError(f"unknown split {split!r}")
    per_class = spec.samples_per_class if split == "train" else spec.test_per_class
    means = synth_geometry(spec)
    rng = make_rng(spec.seed, 11 if split == "train" else 12)
    s = spec.noise
    records = []
    for c, name in enumerate(spec.taxonomy.names):
        for k in range(per_class):
            g = means["global"][c] + s * rng.standard_normal(spec.global_dim)
            n = int(rng.integers(spec.min_objects, spec.max_objects + 1))
            objects = means["object"][c] + s * rng.standard_normal((n, spec.object_dim))
            if n == 0:
                objects = np.empty((0, 0))
            face = None
            if rng.random() < spec.face_prob:
                face = means["face"][c] + s * rng.standard_normal(spec.face_dim)
            records.append(SampleRecord(f"{split}-{name}-{k}", name, c, g, objects, face))
    return records
