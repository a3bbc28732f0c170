"""Simulated annotators standing in for the human subjects.

A profile maps each source type to a label distribution over the four
quadrants; labels are drawn from a hash stream keyed by (profile seed,
excerpt id) so they are replayable and independent of call order. Labels
depend only on the source type, never on acoustic features: the personalized
model has to learn the acoustic proxy for the type on its own. The shipped
profiles are synthetic configuration, not measured human data.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Excerpt, QUADRANTS, Quadrant, SourceType, ValidationError


class Alignment(enum.Enum):
    LEFT = "Left"
    CENTER = "Center"
    RIGHT = "Right"


@dataclass(frozen=True)
class OracleProfile:
    name: str
    alignment: Alignment
    label_dist: dict[SourceType, tuple[float, float, float, float]]
    seed: int = 0

    def __post_init__(self):
        for source, dist in self.label_dist.items():
            arr = np.asarray(dist, dtype=float)
            if arr.shape != (4,) or np.any(arr < 0) or abs(arr.sum() - 1.0) > 1e-9:
                raise ValidationError(
                    f"profile {self.name}: label_dist[{source.value}] is not a distribution"
                )

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "alignment": self.alignment.value,
            "label_dist": {s.value: list(d) for s, d in self.label_dist.items()},
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "OracleProfile":
        return cls(
            name=d["name"],
            alignment=Alignment(d["alignment"]),
            label_dist={
                SourceType(s): tuple(dist) for s, dist in d["label_dist"].items()
            },
            seed=d.get("seed", 0),
        )


def _unit_uniform(seed: int, excerpt_id: str) -> float:
    """Deterministic uniform in [0, 1) keyed by seed and excerpt id."""
    digest = hashlib.sha256(f"{seed}:{excerpt_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def label(profile: OracleProfile, excerpt: Excerpt) -> Quadrant:
    """Draw this profile's quadrant judgment for an excerpt (replay-stable)."""
    dist = profile.label_dist.get(excerpt.source_type)
    if dist is None:
        raise ValidationError(
            f"profile {profile.name} covers no source_type {excerpt.source_type.value}"
        )
    u = _unit_uniform(profile.seed, excerpt.id)
    acc = 0.0
    for q, p in zip(QUADRANTS, dist):
        acc += p
        if u < acc:
            return q
    return QUADRANTS[-1]


# Shipped synthetic defaults. Left treats TypeB as anger/fear-inducing and
# TypeA as benign; Right is the exact source-type mirror; Center reacts with
# the same mild Q2 tendency to both.
_LEFT_DIST = {
    SourceType.TYPE_A: (0.45, 0.05, 0.05, 0.45),
    SourceType.TYPE_B: (0.05, 0.80, 0.05, 0.10),
}
_CENTER_DIST = {
    SourceType.TYPE_A: (0.20, 0.35, 0.20, 0.25),
    SourceType.TYPE_B: (0.20, 0.35, 0.20, 0.25),
}


def mirror_profile(profile: OracleProfile, name: str, alignment: Alignment) -> OracleProfile:
    """Same profile with the two source types' distributions swapped."""
    return OracleProfile(
        name=name,
        alignment=alignment,
        label_dist={s.swapped(): d for s, d in profile.label_dist.items()},
        seed=profile.seed,
    )


def default_profiles(seed: int = 0) -> list[OracleProfile]:
    left = OracleProfile("left", Alignment.LEFT, dict(_LEFT_DIST), seed=seed)
    right = mirror_profile(left, "right", Alignment.RIGHT)
    center = OracleProfile("center", Alignment.CENTER, dict(_CENTER_DIST), seed=seed)
    return [left, right, center]


def get_profile(name_or_path: str, seed: int = 0) -> OracleProfile:
    """Resolve one of the named defaults or load a profile JSON file."""
    for profile in default_profiles(seed):
        if profile.name == name_or_path.lower():
            return profile
    path = Path(name_or_path)
    if path.exists():
        loaded = OracleProfile.from_json_dict(json.loads(path.read_text(encoding="utf-8")))
        if seed and loaded.seed != seed:
            loaded = OracleProfile(loaded.name, loaded.alignment, loaded.label_dist, seed)
        return loaded
    raise ValidationError(
        f"unknown oracle profile {name_or_path!r} (not a default name or profile file)"
    )
