"""Emotion categories, their canonical order, and the polarity partition."""

from __future__ import annotations

import enum
import hashlib
import json
import operator
from dataclasses import dataclass


class TaxonomyError(ValueError):
    pass


class Polarity(enum.IntEnum):
    """Polarity of an emotion. The integer value is its slot in the polar vector."""

    POSITIVE = 0
    NEGATIVE = 1

    @classmethod
    def parse(cls, text: str) -> "Polarity":
        try:
            return cls[text.strip().upper()]
        except (KeyError, AttributeError):
            raise TaxonomyError(f"unknown polarity {text!r}") from None

    def __str__(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class Emotion:
    index: int
    name: str


@dataclass(frozen=True)
class Taxonomy:
    emotions: tuple[Emotion, ...]
    polarities: tuple[Polarity, ...]

    def __post_init__(self):
        if not self.emotions:
            raise TaxonomyError("taxonomy needs at least one emotion")
        if len(self.emotions) != len(self.polarities):
            raise TaxonomyError("every emotion needs exactly one polarity")
        names = [e.name for e in self.emotions]
        if len(set(names)) != len(names):
            raise TaxonomyError("duplicate emotion names")
        if [e.index for e in self.emotions] != list(range(len(self.emotions))):
            raise TaxonomyError("emotion indices must be contiguous from 0")
        if set(self.polarities) != {Polarity.POSITIVE, Polarity.NEGATIVE}:
            raise TaxonomyError("need at least one emotion per polarity")

    @classmethod
    def from_pairs(cls, pairs) -> "Taxonomy":
        """Build from ``[(name, polarity), ...]`` in canonical order."""
        pairs = list(pairs)
        emotions = tuple(Emotion(i, name) for i, (name, _) in enumerate(pairs))
        polarities = tuple(
            p if isinstance(p, Polarity) else Polarity.parse(p) for _, p in pairs
        )
        return cls(emotions, polarities)

    @property
    def size(self) -> int:
        return len(self.emotions)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.emotions]

    def index_of(self, name: str) -> int:
        for e in self.emotions:
            if e.name == name:
                return e.index
        raise TaxonomyError(f"unknown emotion {name!r}")

    def polarity_of(self, i: int) -> Polarity:
        try:
            k = operator.index(i)
        except TypeError:
            raise TaxonomyError(f"unknown emotion index {i!r}") from None
        if not 0 <= k < self.size:
            raise TaxonomyError(f"unknown emotion index {i!r}")
        return self.polarities[k]

    def partition_indices(self) -> tuple[list[int], list[int]]:
        pos = [i for i, p in enumerate(self.polarities) if p is Polarity.POSITIVE]
        neg = [i for i, p in enumerate(self.polarities) if p is Polarity.NEGATIVE]
        return pos, neg

    def to_dict(self) -> dict:
        return {
            "emotions": [
                {"name": e.name, "polarity": str(p)}
                for e, p in zip(self.emotions, self.polarities)
            ]
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()[:16]


MIKEL_ORDER = [
    ("excitement", "positive"),
    ("amusement", "positive"),
    ("contentment", "positive"),
    ("awe", "positive"),
    ("sad", "negative"),
    ("fear", "negative"),
    ("disgust", "negative"),
    ("anger", "negative"),
]

EMOTIONROI_ORDER = [
    ("anger", "negative"),
    ("disgust", "negative"),
    ("fear", "negative"),
    ("joy", "positive"),
    ("sad", "negative"),
    ("surprise", "positive"),
]


def mikel_default() -> Taxonomy:
    """Mikel's eight emotions, positives first."""
    return Taxonomy.from_pairs(MIKEL_ORDER)


def emotionroi_default() -> Taxonomy:
    return Taxonomy.from_pairs(EMOTIONROI_ORDER)


def polarity_of(t: Taxonomy, i: int) -> Polarity:
    return t.polarity_of(i)


def partition_indices(t: Taxonomy) -> tuple[list[int], list[int]]:
    return t.partition_indices()


def taxonomy_from_dict(obj) -> Taxonomy:
    if not isinstance(obj, dict) or "emotions" not in obj:
        raise TaxonomyError('taxonomy config must be an object with an "emotions" list')
    entries = obj["emotions"]
    if not isinstance(entries, list) or not entries:
        raise TaxonomyError("taxonomy config lists no emotions")
    pairs = []
    for k, entry in enumerate(entries):
        if not isinstance(entry, dict) or "name" not in entry:
            raise TaxonomyError(f"emotion entry {k} has no name")
        if "polarity" not in entry:
            raise TaxonomyError(f"emotion {entry['name']!r} has no polarity")
        if not isinstance(entry["name"], str) or not entry["name"]:
            raise TaxonomyError(f"emotion entry {k} has an invalid name")
        pairs.append((entry["name"], Polarity.parse(entry["polarity"])))
    return Taxonomy.from_pairs(pairs)


def load_taxonomy(text: str) -> Taxonomy:
    """Parse a taxonomy from its JSON config text."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TaxonomyError(f"taxonomy config is not valid JSON: {exc}") from None
    return taxonomy_from_dict(obj)


def resolve_taxonomy(spec) -> Taxonomy:
    """Accept a preset name ("mikel", "emotionroi"), an inline dict, or a Taxonomy."""
    if isinstance(spec, Taxonomy):
        return spec
    if spec is None or spec == "mikel":
        return mikel_default()
    if spec == "emotionroi":
        return emotionroi_default()
    if isinstance(spec, dict):
        return taxonomy_from_dict(spec)
    raise TaxonomyError(f"unknown taxonomy {spec!r}")
