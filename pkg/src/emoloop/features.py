"""Feature pipeline: per-window descriptor matrices -> standardized summary vectors.

An excerpt arrives as an [n_windows x n_descriptors] matrix of low-level
descriptors (computed upstream; this package never touches raw audio). It is
summarized to a vector of 4 blocks, [mean, std, delta-mean, delta-std], one
entry per descriptor: 65 descriptors yield the usual 260 dimensions.
Standardization statistics are fitted once on the pretraining corpus and
frozen for the pool and all user annotations.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import Excerpt, SourceType, ValidationError

DEFAULT_N_DESCRIPTORS = 65


class ParseError(ValueError):
    """Raised for malformed input files, with row/column location where known."""


@dataclass(frozen=True)
class DescriptorMatrix:
    """Low-level descriptor values for one excerpt, one row per analysis window."""

    excerpt_id: str
    values: np.ndarray
    descriptor_names: tuple[str, ...] = ()
    window_s: float = 1.0
    hop_fraction: float = 0.5

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValidationError(f"{self.excerpt_id}: descriptor matrix must be 2-d")
        if vals.shape[0] < 2:
            raise ValidationError(
                f"{self.excerpt_id}: need at least 2 windows for deltas, got {vals.shape[0]}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValidationError(f"{self.excerpt_id}: non-finite descriptor values")
        object.__setattr__(self, "values", vals)

    @property
    def n_windows(self) -> int:
        return self.values.shape[0]

    @property
    def n_descriptors(self) -> int:
        return self.values.shape[1]


def first_order_delta(values: np.ndarray) -> np.ndarray:
    """First differences along the window axis, zero-padded at the first row."""
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 2 or vals.shape[0] < 2:
        raise ValidationError("delta needs a 2-d matrix with at least 2 windows")
    delta = np.empty_like(vals)
    delta[0] = 0.0
    delta[1:] = vals[1:] - vals[:-1]
    return delta


def aggregate(m: DescriptorMatrix) -> np.ndarray:
    """Summarize a descriptor matrix to its [mean, std, dmean, dstd] blocks.

    Uses population standard deviation. Output length is 4x the descriptor
    count regardless of window count.
    """
    vals = m.values
    delta = first_order_delta(vals)
    return np.concatenate([
        vals.mean(axis=0),
        vals.std(axis=0),
        delta.mean(axis=0),
        delta.std(axis=0),
    ])


@dataclass(frozen=True)
class Scaler:
    """Per-dimension standardization statistics, frozen after fitting.

    Zero-variance dimensions keep std 1 so applying the scaler never divides
    by zero; their indices are recorded in ``degenerate_dims``.
    """

    means: np.ndarray
    stds: np.ndarray
    fitted_on: int
    degenerate_dims: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "means", np.asarray(self.means, dtype=float))
        object.__setattr__(self, "stds", np.asarray(self.stds, dtype=float))
        if self.means.shape != self.stds.shape or self.means.ndim != 1:
            raise ValidationError("scaler means/stds must be 1-d and equal length")
        if np.any(self.stds <= 0):
            raise ValidationError("scaler stds must be strictly positive")

    @property
    def dim(self) -> int:
        return self.means.shape[0]

    def to_json_dict(self) -> dict:
        return {
            "means": [float(x) for x in self.means],
            "stds": [float(x) for x in self.stds],
            "fitted_on": self.fitted_on,
            "degenerate_dims": list(self.degenerate_dims),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Scaler":
        return cls(
            means=np.asarray(d["means"], dtype=float),
            stds=np.asarray(d["stds"], dtype=float),
            fitted_on=d["fitted_on"],
            degenerate_dims=tuple(d["degenerate_dims"]),
        )


def fit_scaler(vectors: Sequence[np.ndarray]) -> Scaler:
    """Fit per-dimension mean/std (population) over a set of feature vectors."""
    if len(vectors) < 2:
        raise ValidationError(f"need at least 2 vectors to fit a scaler, got {len(vectors)}")
    try:
        mat = np.asarray(vectors, dtype=float)
    except ValueError:
        raise ValidationError("feature vectors must share one dimension") from None
    if mat.ndim != 2:
        raise ValidationError("feature vectors must share one dimension")
    means = mat.mean(axis=0)
    stds = mat.std(axis=0)
    degenerate = np.flatnonzero(stds == 0.0)
    stds = np.where(stds == 0.0, 1.0, stds)
    return Scaler(
        means=means,
        stds=stds,
        fitted_on=mat.shape[0],
        degenerate_dims=tuple(int(i) for i in degenerate),
    )


def apply_scaler(s: Scaler, v: np.ndarray) -> np.ndarray:
    """Standardize one vector or a [n x d] batch with a fitted scaler."""
    arr = np.asarray(v, dtype=float)
    if arr.shape[-1] != s.dim:
        raise ValidationError(f"dimension mismatch: scaler dim {s.dim}, vector dim {arr.shape[-1]}")
    return (arr - s.means) / s.stds


def invert_scaler(s: Scaler, v: np.ndarray) -> np.ndarray:
    """Undo standardization (exact on non-degenerate dimensions)."""
    arr = np.asarray(v, dtype=float)
    if arr.shape[-1] != s.dim:
        raise ValidationError(f"dimension mismatch: scaler dim {s.dim}, vector dim {arr.shape[-1]}")
    return arr * s.stds + s.means


def load_descriptor_csv(path: str | Path, excerpt_id: Optional[str] = None) -> DescriptorMatrix:
    """Read one descriptor CSV: a header of descriptor names, one row per window.

    Parse failures report the offending 1-based row and column.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        names = tuple(h.strip() for h in header)
        rows = []
        for r, row in enumerate(reader, start=2):
            if len(row) != len(names):
                raise ParseError(
                    f"{path}: row {r} has {len(row)} cells, expected {len(names)}"
                )
            parsed = []
            for c, cell in enumerate(row, start=1):
                try:
                    x = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: non-numeric cell at row {r}, column {c} ({names[c - 1]}): {cell!r}"
                    ) from None
                if not np.isfinite(x):
                    raise ParseError(f"{path}: non-finite value at row {r}, column {c}")
                parsed.append(x)
            rows.append(parsed)
    if len(rows) < 2:
        raise ParseError(f"{path}: need at least 2 window rows, got {len(rows)}")
    return DescriptorMatrix(
        excerpt_id=excerpt_id or path.stem,
        values=np.asarray(rows, dtype=float),
        descriptor_names=names,
    )


def load_pool(pool_dir: str | Path, feature_cache: Optional[str | Path] = None) -> list[Excerpt]:
    """Load a pool directory: manifest.json plus per-excerpt descriptor CSVs.

    With ``feature_cache`` set, vectors are read from the cache instead of
    re-aggregating the CSVs.
    """
    pool_dir = Path(pool_dir)
    manifest_path = pool_dir / "manifest.json"
    if not manifest_path.exists():
        raise ParseError(f"{pool_dir}: missing manifest.json")
    try:
        entries = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"{manifest_path}: invalid JSON ({e})") from None
    if not isinstance(entries, list):
        raise ParseError(f"{manifest_path}: manifest must be a JSON array")

    cache_dir = Path(feature_cache) if feature_cache else None
    excerpts: list[Excerpt] = []
    seen: set[str] = set()
    dim: Optional[int] = None
    for i, entry in enumerate(entries):
        for key in ("id", "source_type", "descriptor_csv"):
            if key not in entry:
                raise ParseError(f"{manifest_path}: entry {i} missing field {key!r}")
        eid = entry["id"]
        if eid in seen:
            raise ParseError(f"{manifest_path}: duplicate excerpt id {eid!r}")
        seen.add(eid)
        try:
            source = SourceType(entry["source_type"])
        except ValueError:
            raise ParseError(
                f"{manifest_path}: entry {i} has unknown source_type {entry['source_type']!r}"
            ) from None
        if cache_dir is not None:
            vec = load_cached_features(cache_dir, eid)
        else:
            matrix = load_descriptor_csv(pool_dir / entry["descriptor_csv"], excerpt_id=eid)
            vec = aggregate(matrix)
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise ParseError(
                f"{pool_dir}: excerpt {eid} has feature dim {vec.shape[0]}, pool dim {dim}"
            )
        excerpts.append(
            Excerpt(
                id=eid,
                source_type=source,
                features=vec,
                title=entry.get("title", eid),
                duration_s=entry.get("duration_s", 30.0),
                audio_uri=entry.get("audio_uri"),
            )
        )
    if not excerpts:
        raise ParseError(f"{pool_dir}: pool is empty")
    return excerpts


def build_feature_cache(pool_dir: str | Path, out_dir: str | Path) -> int:
    """Aggregate every pool excerpt and write one {id, vector} JSON per excerpt."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    excerpts = load_pool(pool_dir)
    for ex in excerpts:
        payload = {"id": ex.id, "vector": [float(x) for x in ex.features]}
        (out_dir / f"{ex.id}.json").write_text(
            json.dumps(payload, sort_keys=True), encoding="utf-8"
        )
    return len(excerpts)


def load_cached_features(cache_dir: str | Path, excerpt_id: str) -> np.ndarray:
    path = Path(cache_dir) / f"{excerpt_id}.json"
    if not path.exists():
        raise ParseError(f"feature cache miss for excerpt {excerpt_id!r} in {cache_dir}")
    payload = json.loads(path.read_text(encoding="utf-8"))
    if payload.get("id") != excerpt_id:
        raise ParseError(f"{path}: cache id mismatch")
    return np.asarray(payload["vector"], dtype=float)


def pool_type_counts(excerpts: Sequence[Excerpt]) -> dict[SourceType, int]:
    counts = {t: 0 for t in SourceType}
    for ex in excerpts:
        counts[ex.source_type] += 1
    return counts


def swap_pool_types(excerpts: Sequence[Excerpt]) -> list[Excerpt]:
    """The same pool with every excerpt's source type swapped (mirror harness)."""
    return [
        Excerpt(
            id=ex.id,
            source_type=ex.source_type.swapped(),
            features=ex.features,
            title=ex.title,
            duration_s=ex.duration_s,
            audio_uri=ex.audio_uri,
        )
        for ex in excerpts
    ]
