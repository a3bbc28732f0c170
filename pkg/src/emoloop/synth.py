"""Synthetic pools and pretraining corpora for simulation and acceptance runs.

The generator places four quadrant prototypes along the first descriptor
dimensions (used by pretraining rows, whose valence/arousal ratings agree
with their prototype) and two source-type prototypes along later, orthogonal
dimensions (used by pool excerpts). Pretrained members therefore classify the
quadrant directions, stay uncertain about pool items, and can only learn the
user's type-linked judgments through the acoustic type signature, which is
what the personalization loop is supposed to surface. All output is a pure
function of the seed.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import AVRecord, Excerpt, SourceType, ValidationError
from .features import DescriptorMatrix, ParseError, aggregate

QUAD_AMP = 2.5
TYPE_AMP = 2.0
CENTER_SPREAD = 1.0
WINDOW_NOISE = 1.0

MIN_DESCRIPTORS = 6  # dims 0-3 carry quadrants, dims 4-5 the type signature


def _n_windows(duration_s: float, window_s: float, hop_fraction: float) -> int:
    hop = window_s * hop_fraction
    return int((duration_s - window_s) / hop) + 1


def _quadrant_center(q: int, n_descriptors: int, rng: np.random.Generator) -> np.ndarray:
    center = rng.normal(0.0, CENTER_SPREAD, size=n_descriptors)
    center[q] += QUAD_AMP
    return center


def _type_center(source: SourceType, n_descriptors: int, rng: np.random.Generator) -> np.ndarray:
    center = rng.normal(0.0, CENTER_SPREAD, size=n_descriptors)
    sign = 1.0 if source is SourceType.TYPE_A else -1.0
    center[4] += sign * TYPE_AMP
    center[5] += sign * TYPE_AMP / 2.0
    return center


def _window_matrix(
    center: np.ndarray, n_windows: int, rng: np.random.Generator
) -> np.ndarray:
    return center + rng.normal(0.0, WINDOW_NOISE, size=(n_windows, center.shape[0]))


def make_pretraining_records(
    n: int = 240,
    n_descriptors: int = 8,
    seed: int = 0,
    midpoint: float = 5.0,
) -> list[AVRecord]:
    """Generate a balanced rated corpus in the same feature space as the pools."""
    if n_descriptors < MIN_DESCRIPTORS:
        raise ValidationError(f"need at least {MIN_DESCRIPTORS} descriptors")
    rng = np.random.default_rng(seed)
    windows = _n_windows(30.0, 1.0, 0.5)
    records = []
    for i in range(n):
        q = i % 4
        center = _quadrant_center(q, n_descriptors, rng)
        matrix = DescriptorMatrix(
            excerpt_id=f"song{i:04d}", values=_window_matrix(center, windows, rng)
        )
        v_off, a_off = 0.5 + abs(rng.normal(1.2, 0.6)), 0.5 + abs(rng.normal(1.2, 0.6))
        v_sign = 1.0 if q in (0, 3) else -1.0
        a_sign = 1.0 if q in (0, 1) else -1.0
        records.append(
            AVRecord(
                song_id=f"song{i:04d}",
                valence=float(np.clip(midpoint + v_sign * v_off, 1.0, 9.0)),
                arousal=float(np.clip(midpoint + a_sign * a_off, 1.0, 9.0)),
                features=aggregate(matrix),
            )
        )
    return records


def make_pool_dir(
    out_dir: str | Path,
    n_per_type: int = 50,
    n_descriptors: int = 8,
    seed: int = 0,
    duration_s: float = 30.0,
    window_s: float = 1.0,
    hop_fraction: float = 0.5,
) -> Path:
    """Write a pool directory: manifest.json plus one descriptor CSV per excerpt.

    Type assignment is shuffled across ids so an excerpt id reveals nothing
    about its source type.
    """
    if n_descriptors < MIN_DESCRIPTORS:
        raise ValidationError(f"need at least {MIN_DESCRIPTORS} descriptors")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n = 2 * n_per_type
    types = np.array([0] * n_per_type + [1] * n_per_type)
    rng.shuffle(types)
    windows = _n_windows(duration_s, window_s, hop_fraction)
    names = [f"d{j:02d}" for j in range(n_descriptors)]

    manifest = []
    for i in range(n):
        source = SourceType.TYPE_A if types[i] == 0 else SourceType.TYPE_B
        center = _type_center(source, n_descriptors, rng)
        matrix = _window_matrix(center, windows, rng)
        eid = f"x{i:03d}"
        csv_name = f"{eid}.csv"
        with (out_dir / csv_name).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            for row in matrix:
                writer.writerow([repr(float(v)) for v in row])
        manifest.append(
            {
                "id": eid,
                "source_type": source.value,
                "title": f"excerpt {i:03d}",
                "duration_s": duration_s,
                "descriptor_csv": csv_name,
            }
        )
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )
    return out_dir


def save_av_csv(records: Sequence[AVRecord], path: str | Path) -> None:
    """Write a pretraining dataset CSV: song_id, valence, arousal, f0..f{d-1}."""
    path = Path(path)
    dim = records[0].features.shape[0]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["song_id", "valence", "arousal", *[f"f{j}" for j in range(dim)]])
        for rec in records:
            writer.writerow(
                [rec.song_id, repr(rec.valence), repr(rec.arousal)]
                + [repr(float(v)) for v in rec.features]
            )


def load_av_csv(path: str | Path) -> list[AVRecord]:
    """Read a pretraining dataset CSV, reporting malformed cells by location."""
    path = Path(path)
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if header[:3] != ["song_id", "valence", "arousal"]:
            raise ParseError(f"{path}: header must start with song_id, valence, arousal")
        for r, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
            try:
                values = [float(cell) for cell in row[1:]]
            except ValueError:
                bad = next(
                    c for c, cell in enumerate(row[1:], start=2)
                    if not _is_float(cell)
                )
                raise ParseError(
                    f"{path}: non-numeric cell at row {r}, column {bad}"
                ) from None
            records.append(
                AVRecord(
                    song_id=row[0],
                    valence=values[0],
                    arousal=values[1],
                    features=np.asarray(values[2:], dtype=float),
                )
            )
    if not records:
        raise ParseError(f"{path}: no data rows")
    return records


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False
