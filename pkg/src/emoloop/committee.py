"""Committee of boosted ensembles: cross-validation pretraining and consensus entropy.

Each of the k members is pretrained on the dataset minus one held-out fold.
Uncertainty of the committee on an excerpt is the Shannon entropy (nats) of
the member-averaged class distribution, maximal at ln 4 when the members
fully disagree.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import AVRecord, N_CLASSES, ValidationError
from .features import Scaler, apply_scaler, fit_scaler
from .gbt import (
    BoostedEnsemble,
    TrainParams,
    model_from_dict,
    model_to_dict,
    predict_proba,
    train,
)

MAX_ENTROPY = math.log(N_CLASSES)

DEFAULT_MEMBERS = 15


@dataclass
class Committee:
    """Trained members plus everything needed to retrain them deterministically."""

    members: list[BoostedEnsemble]
    scaler: Scaler
    train_X: np.ndarray  # standardized pretraining features
    train_y: np.ndarray
    fold_assignment: np.ndarray
    provenance: dict = field(default_factory=dict)
    n_classes: int = N_CLASSES

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValidationError("a committee needs at least 2 members")
        dims = {m.n_features for m in self.members}
        if len(dims) != 1:
            raise ValidationError("committee members disagree on feature dimension")

    @property
    def n_members(self) -> int:
        return len(self.members)

    @property
    def feature_dim(self) -> int:
        return self.members[0].n_features

    def member_train_indices(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.fold_assignment != i)


def make_cv_splits(
    dataset: Sequence, k: int = DEFAULT_MEMBERS, seed: int = 0
) -> list[np.ndarray]:
    """Shuffled k-fold partition; member i trains on everything except fold i."""
    assignment = fold_assignment(len(dataset), k, seed)
    return [np.flatnonzero(assignment != i) for i in range(k)]


def fold_assignment(n: int, k: int, seed: int) -> np.ndarray:
    """Fold index per record for a seeded shuffled k-fold partition."""
    if k < 2:
        raise ValidationError(f"need at least 2 folds, got {k}")
    if n < k:
        raise ValidationError(f"dataset has {n} records, fewer than k={k}")
    perm = np.random.default_rng(seed).permutation(n)
    assignment = np.empty(n, dtype=int)
    for i, fold in enumerate(np.array_split(perm, k)):
        assignment[fold] = i
    return assignment


def dataset_hash(dataset: Sequence[AVRecord]) -> str:
    """Content hash over the canonical JSON of the records."""
    h = hashlib.sha256()
    for rec in dataset:
        h.update(json.dumps(rec.to_json_dict(), sort_keys=True).encode())
    return h.hexdigest()


def pretrain(
    dataset: Sequence[AVRecord],
    params: TrainParams = TrainParams(),
    k: int = DEFAULT_MEMBERS,
    seed: int = 0,
    midpoint: float = 5.0,
    dataset_id: str = "",
) -> Committee:
    """Pretrain k members on cross-validation splits of an arousal/valence dataset.

    Fits the standardization scaler on this dataset; it stays frozen for the
    pool and all user annotations afterwards.
    """
    n = len(dataset)
    assignment = fold_assignment(n, k, seed)
    scaler = fit_scaler([rec.features for rec in dataset])
    X = apply_scaler(scaler, np.asarray([rec.features for rec in dataset]))
    y = np.asarray([rec.quadrant(midpoint).index for rec in dataset], dtype=int)

    members = []
    for i in range(k):
        idx = np.flatnonzero(assignment != i)
        members.append(train(X[idx], y[idx], params))

    provenance = {
        "dataset_id": dataset_id,
        "dataset_hash": dataset_hash(dataset),
        "seed": seed,
        "k": k,
        "midpoint": midpoint,
        "train_params": params.hyper_dict(),
        "annotations_applied": [],
        "w_user": None,
    }
    return Committee(
        members=members,
        scaler=scaler,
        train_X=X,
        train_y=y,
        fold_assignment=assignment,
        provenance=provenance,
    )


def committee_proba(c: Committee, x: np.ndarray) -> np.ndarray:
    """Arithmetic mean of the members' class probabilities.

    ``x`` must already be standardized; accepts one vector or an [n x d] batch.
    """
    stacked = np.stack([predict_proba(m, x) for m in c.members])
    return stacked.mean(axis=0)


def consensus_entropy(p: np.ndarray) -> float:
    """Shannon entropy (nats) of an averaged class distribution; 0 <= H <= ln 4."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValidationError("entropy expects a single probability vector")
    if np.any(p < -1e-12) or not np.all(np.isfinite(p)):
        raise ValidationError("probabilities must be non-negative and finite")
    if abs(float(p.sum()) - 1.0) > 1e-6:
        raise ValidationError(f"probabilities must sum to 1, got {float(p.sum())!r}")
    pos = p[p > 0.0]
    return float(-(pos * np.log(pos)).sum())


def entropy_batch(probs: np.ndarray) -> np.ndarray:
    """Row-wise entropy of an [n x K] matrix of distributions."""
    probs = np.asarray(probs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0.0, probs * np.log(probs), 0.0)
    return -terms.sum(axis=1)


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def save_committee(c: Committee, out_dir: str | Path) -> None:
    """Write a committee directory: manifest, scaler, pretraining data, members.

    Output bytes are a pure function of the committee contents, so identical
    training inputs give byte-identical directories.
    """
    out_dir = Path(out_dir)
    (out_dir / "members").mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": 1,
        "kind": "committee",
        "n_members": c.n_members,
        "n_classes": c.n_classes,
        "feature_dim": c.feature_dim,
        "fold_assignment": [int(i) for i in c.fold_assignment],
        **c.provenance,
    }
    (out_dir / "manifest.json").write_text(_canonical(manifest), encoding="utf-8")
    (out_dir / "scaler.json").write_text(_canonical(c.scaler.to_json_dict()), encoding="utf-8")
    data = {
        "X": [[float(v) for v in row] for row in c.train_X],
        "y": [int(v) for v in c.train_y],
    }
    (out_dir / "train_data.json").write_text(_canonical(data), encoding="utf-8")
    for i, m in enumerate(c.members):
        path = out_dir / "members" / f"member_{i:02d}.json"
        path.write_text(_canonical(model_to_dict(m)), encoding="utf-8")


def load_committee(path: str | Path) -> Committee:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    scaler = Scaler.from_json_dict(json.loads((path / "scaler.json").read_text(encoding="utf-8")))
    data = json.loads((path / "train_data.json").read_text(encoding="utf-8"))
    members = []
    for i in range(manifest["n_members"]):
        member_path = path / "members" / f"member_{i:02d}.json"
        members.append(model_from_dict(json.loads(member_path.read_text(encoding="utf-8"))))
    provenance = {
        key: manifest[key]
        for key in (
            "dataset_id",
            "dataset_hash",
            "seed",
            "k",
            "midpoint",
            "train_params",
            "annotations_applied",
            "w_user",
        )
    }
    return Committee(
        members=members,
        scaler=scaler,
        train_X=np.asarray(data["X"], dtype=float),
        train_y=np.asarray(data["y"], dtype=int),
        fold_assignment=np.asarray(manifest["fold_assignment"], dtype=int),
        provenance=provenance,
    )


def committee_with(
    c: Committee,
    members: list[BoostedEnsemble],
    annotations_applied: list[dict],
    w_user: Optional[float],
) -> Committee:
    """New committee with replaced members and updated provenance."""
    provenance = dict(c.provenance)
    provenance["annotations_applied"] = annotations_applied
    provenance["w_user"] = w_user
    return replace(c, members=members, provenance=provenance)
