"""Shared domain vocabulary: emotion quadrants, excerpts, annotations, dataset rows.

Everything here is an immutable value object with a stable snake_case JSON form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

import numpy as np


class ValidationError(ValueError):
    """Raised when a domain value violates its invariants."""


class Quadrant(enum.Enum):
    """Discrete emotion category from the signs of valence and arousal.

    Q1 high valence / high arousal (joy, wonder, power), Q2 low valence /
    high arousal (tension, anger, fear), Q3 low valence / low arousal
    (sadness, bitterness), Q4 high valence / low arousal (tenderness,
    peacefulness, transcendence).
    """

    Q1 = "Q1"
    Q2 = "Q2"
    Q3 = "Q3"
    Q4 = "Q4"

    @property
    def index(self) -> int:
        """Zero-based class index in the fixed Q1<Q2<Q3<Q4 order."""
        return _QUADRANT_ORDER[self]

    def __lt__(self, other: "Quadrant") -> bool:
        return self.index < other.index

    @classmethod
    def from_index(cls, i: int) -> "Quadrant":
        return QUADRANTS[i]


QUADRANTS = (Quadrant.Q1, Quadrant.Q2, Quadrant.Q3, Quadrant.Q4)
N_CLASSES = len(QUADRANTS)
_QUADRANT_ORDER = {q: i for i, q in enumerate(QUADRANTS)}


class SourceType(enum.Enum):
    """Which of the two politically distinct catalogues an excerpt comes from."""

    TYPE_A = "TypeA"
    TYPE_B = "TypeB"

    def swapped(self) -> "SourceType":
        return SourceType.TYPE_B if self is SourceType.TYPE_A else SourceType.TYPE_A


SOURCE_TYPES = (SourceType.TYPE_A, SourceType.TYPE_B)

# Display names are presentation-only and configurable per pool manifest.
DEFAULT_SOURCE_NAMES = {
    SourceType.TYPE_A: "FARC-songs",
    SourceType.TYPE_B: "AUC-songs",
}


def quadrant_from_av(valence: float, arousal: float, midpoint: float = 5.0) -> Quadrant:
    """Map a valence/arousal rating pair to its quadrant.

    Signs are taken relative to ``midpoint``; ties (v == m or a == m) resolve
    to the non-positive side so the mapping is total and deterministic.
    """
    for name, x in (("valence", valence), ("arousal", arousal), ("midpoint", midpoint)):
        if not math.isfinite(x):
            raise ValidationError(f"{name} must be finite, got {x!r}")
    if valence > midpoint:
        return Quadrant.Q1 if arousal > midpoint else Quadrant.Q4
    return Quadrant.Q2 if arousal > midpoint else Quadrant.Q3


@dataclass(frozen=True)
class Excerpt:
    """One pool item: a 30 s music excerpt reduced to its feature vector."""

    id: str
    source_type: SourceType
    features: np.ndarray
    title: str = ""
    duration_s: float = 30.0
    audio_uri: Optional[str] = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim != 1:
            raise ValidationError(f"excerpt {self.id}: features must be 1-d")
        if not np.all(np.isfinite(feats)):
            raise ValidationError(f"excerpt {self.id}: non-finite feature values")
        object.__setattr__(self, "features", feats)

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "source_type": self.source_type.value,
            "features": [float(x) for x in self.features],
            "title": self.title,
            "duration_s": self.duration_s,
            "audio_uri": self.audio_uri,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Excerpt":
        return cls(
            id=d["id"],
            source_type=SourceType(d["source_type"]),
            features=np.asarray(d["features"], dtype=float),
            title=d.get("title", ""),
            duration_s=d.get("duration_s", 30.0),
            audio_uri=d.get("audio_uri"),
        )


@dataclass(frozen=True)
class Annotation:
    """One user judgment: which quadrant an excerpt induced, and when."""

    excerpt_id: str
    label: Quadrant
    iteration: int
    timestamp: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def __post_init__(self):
        if self.iteration < 1:
            raise ValidationError(f"annotation iteration must be >= 1, got {self.iteration}")
        if self.timestamp.tzinfo is None:
            object.__setattr__(self, "timestamp", self.timestamp.replace(tzinfo=timezone.utc))

    def to_json_dict(self) -> dict:
        return {
            "excerpt_id": self.excerpt_id,
            "label": self.label.value,
            "iteration": self.iteration,
            "timestamp": self.timestamp.isoformat(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Annotation":
        return cls(
            excerpt_id=d["excerpt_id"],
            label=Quadrant(d["label"]),
            iteration=d["iteration"],
            timestamp=datetime.fromisoformat(d["timestamp"]),
        )


@dataclass(frozen=True)
class AVRecord:
    """Pretraining dataset row: a song with mean valence/arousal ratings."""

    song_id: str
    valence: float
    arousal: float
    features: np.ndarray

    def __post_init__(self):
        if not (math.isfinite(self.valence) and math.isfinite(self.arousal)):
            raise ValidationError(f"record {self.song_id}: valence/arousal must be finite")
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim != 1 or not np.all(np.isfinite(feats)):
            raise ValidationError(f"record {self.song_id}: features must be finite 1-d")
        object.__setattr__(self, "features", feats)

    def quadrant(self, midpoint: float = 5.0) -> Quadrant:
        return quadrant_from_av(self.valence, self.arousal, midpoint)

    def to_json_dict(self) -> dict:
        return {
            "song_id": self.song_id,
            "valence": self.valence,
            "arousal": self.arousal,
            "features": [float(x) for x in self.features],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "AVRecord":
        return cls(
            song_id=d["song_id"],
            valence=d["valence"],
            arousal=d["arousal"],
            features=np.asarray(d["features"], dtype=float),
        )
