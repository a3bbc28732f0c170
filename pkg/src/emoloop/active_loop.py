"""Personalization session state machine.

A session walks one user through: a random initial draw stratified by source
type, then entropy-ranked query batches, each answered batch triggering a
full committee retrain on (pretraining split + weighted user annotations).
All operations are pure: they validate the state transition, return a new
Session, and leave the input untouched, which is what makes event-log replay
exact. The initial draw ranks excerpts by a seeded hash of their id, so the
draw commutes with source-type relabeling (the mirror harness relies on it).
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Optional, Sequence

import numpy as np

from .committee import Committee, committee_proba, committee_with, entropy_batch
from .core import Annotation, Excerpt, Quadrant, SOURCE_TYPES, ValidationError
from .features import apply_scaler
from .gbt import TrainParams, train


class StateError(RuntimeError):
    """An operation was called in a session state that does not allow it."""


class ProtocolError(ValueError):
    """A submitted batch violates the annotation protocol.

    ``violations`` is machine-readable: a list of {code, excerpt_ids, detail}.
    """

    def __init__(self, violations: list[dict]):
        self.violations = violations
        super().__init__("; ".join(v["detail"] for v in violations))


class SessionState(enum.Enum):
    AWAITING_BATCH = "AwaitingBatch"
    AWAITING_ANNOTATIONS = "AwaitingAnnotations"
    FINALIZED = "Finalized"


class VoteIntent(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    BLANK = "blank"


@dataclass(frozen=True)
class UserProfile:
    display_name: str
    political_view: str = ""
    vote_intent: VoteIntent = VoteIntent.BLANK

    def to_json_dict(self) -> dict:
        return {
            "display_name": self.display_name,
            "political_view": self.political_view,
            "vote_intent": self.vote_intent.value,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "UserProfile":
        return cls(
            display_name=d["display_name"],
            political_view=d.get("political_view", ""),
            vote_intent=VoteIntent(d.get("vote_intent", "blank")),
        )


@dataclass(frozen=True)
class LoopConfig:
    batch_size: int = 10
    max_iterations: int = 3
    initial_per_type: int = 5
    seed: int = 0
    w_user: float = 10.0
    retain_pretraining: bool = True

    def __post_init__(self):
        if self.batch_size < 1 or self.max_iterations < 1 or self.initial_per_type < 1:
            raise ValidationError("batch_size, max_iterations, initial_per_type must be >= 1")
        if self.batch_size != self.initial_per_type * len(SOURCE_TYPES):
            raise ValidationError(
                f"batch_size must equal initial_per_type x {len(SOURCE_TYPES)} source types "
                f"so the first iteration fills one batch, got {self.batch_size} "
                f"vs {self.initial_per_type} x {len(SOURCE_TYPES)}"
            )
        if self.w_user < 0:
            raise ValidationError("w_user must be >= 0")

    def to_json_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "max_iterations": self.max_iterations,
            "initial_per_type": self.initial_per_type,
            "seed": self.seed,
            "w_user": self.w_user,
            "retain_pretraining": self.retain_pretraining,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "LoopConfig":
        return cls(**d)


@dataclass(frozen=True)
class Session:
    session_id: str
    user_profile: UserProfile
    pool: tuple[Excerpt, ...]
    committee: Committee
    config: LoopConfig
    annotations: tuple[Annotation, ...] = ()
    iteration: int = 0
    state: SessionState = SessionState.AWAITING_BATCH
    pending: tuple[str, ...] = ()
    # standardized pool features, aligned with pool order; derived, never mutated
    std_features: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def annotated_ids(self) -> set[str]:
        return {a.excerpt_id for a in self.annotations}

    def excerpt(self, excerpt_id: str) -> Excerpt:
        return self._by_id()[excerpt_id]

    def _by_id(self) -> dict[str, Excerpt]:
        return {ex.id: ex for ex in self.pool}

    def row_of(self, excerpt_id: str) -> int:
        return self._row_index()[excerpt_id]

    def _row_index(self) -> dict[str, int]:
        return {ex.id: i for i, ex in enumerate(self.pool)}


@dataclass(frozen=True)
class PersonalizedModel:
    """Finalized output of a session: the committee plus the held-out test pool."""

    session_id: str
    committee: Committee
    annotations: tuple[Annotation, ...]
    test_pool: tuple[Excerpt, ...]
    test_features: np.ndarray
    config: LoopConfig
    empty_test_pool: bool = False


def create_session(
    session_id: str,
    user_profile: UserProfile,
    pool: Sequence[Excerpt],
    committee: Committee,
    config: LoopConfig = LoopConfig(),
) -> Session:
    pool = tuple(pool)
    if not pool:
        raise ValidationError("pool is empty")
    ids = [ex.id for ex in pool]
    if len(set(ids)) != len(ids):
        raise ValidationError("pool excerpt ids are not unique")
    dim = pool[0].features.shape[0]
    if dim != committee.feature_dim:
        raise ValidationError(
            f"pool feature dim {dim} does not match committee dim {committee.feature_dim}"
        )
    std = apply_scaler(committee.scaler, np.asarray([ex.features for ex in pool]))
    return Session(
        session_id=session_id,
        user_profile=user_profile,
        pool=pool,
        committee=committee,
        config=config,
        std_features=std,
    )


def _draw_score(seed: int, excerpt_id: str) -> str:
    return hashlib.sha256(f"{seed}:{excerpt_id}".encode()).hexdigest()


def initial_batch(session: Session) -> tuple[Session, list[str]]:
    """Draw the first batch: initial_per_type random excerpts from each source type.

    Ranking by a seeded hash of the excerpt id makes the draw deterministic,
    uniform over seeds, and equivariant under source-type relabeling.
    """
    if session.state is not SessionState.AWAITING_BATCH:
        raise StateError(f"initial_batch in state {session.state.value}")
    if session.iteration != 0:
        raise StateError("initial_batch is only valid before the first iteration")
    cfg = session.config
    batch: list[str] = []
    for source in SOURCE_TYPES:
        ids = [ex.id for ex in session.pool if ex.source_type is source]
        if len(ids) < cfg.initial_per_type:
            raise ValidationError(
                f"pool has {len(ids)} excerpts of {source.value}, "
                f"need at least {cfg.initial_per_type}"
            )
        ids.sort(key=lambda e: (_draw_score(cfg.seed, e), e))
        batch.extend(ids[: cfg.initial_per_type])
    batch.sort()
    new = replace(session, state=SessionState.AWAITING_ANNOTATIONS, pending=tuple(batch))
    return new, batch


def rank_unannotated_by_entropy(session: Session) -> list[tuple[str, float]]:
    """All unannotated excerpts with their consensus entropy, most uncertain first.

    Ties break toward the lower excerpt id.
    """
    annotated = session.annotated_ids
    rows = [i for i, ex in enumerate(session.pool) if ex.id not in annotated]
    probs = committee_proba(session.committee, session.std_features[rows])
    ents = entropy_batch(probs)
    scored = [(session.pool[i].id, float(h)) for i, h in zip(rows, ents)]
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored


def next_batch(session: Session) -> tuple[Session, list[str]]:
    """Queue the batch_size unannotated excerpts the committee is least sure about."""
    if session.state is not SessionState.AWAITING_BATCH:
        raise StateError(f"next_batch in state {session.state.value}")
    if not (1 <= session.iteration < session.config.max_iterations):
        raise StateError(
            f"next_batch at iteration {session.iteration} of {session.config.max_iterations}"
        )
    ranked = rank_unannotated_by_entropy(session)
    batch = [eid for eid, _ in ranked[: session.config.batch_size]]
    new = replace(session, state=SessionState.AWAITING_ANNOTATIONS, pending=tuple(batch))
    return new, batch


def validate_batch(session: Session, batch: Sequence[Annotation]) -> list[dict]:
    violations: list[dict] = []
    pending = set(session.pending)
    seen: set[str] = set()
    known = {ex.id for ex in session.pool}
    annotated = session.annotated_ids
    expected_iter = session.iteration + 1
    for a in batch:
        if a.excerpt_id in seen:
            violations.append(
                {
                    "code": "duplicate_label",
                    "excerpt_ids": [a.excerpt_id],
                    "detail": f"duplicate label for excerpt {a.excerpt_id}",
                }
            )
            continue
        seen.add(a.excerpt_id)
        if a.excerpt_id not in known:
            violations.append(
                {
                    "code": "unknown_excerpt",
                    "excerpt_ids": [a.excerpt_id],
                    "detail": f"excerpt {a.excerpt_id} is not in the pool",
                }
            )
        elif a.excerpt_id in annotated:
            violations.append(
                {
                    "code": "already_annotated",
                    "excerpt_ids": [a.excerpt_id],
                    "detail": f"excerpt {a.excerpt_id} was already annotated",
                }
            )
        elif a.excerpt_id not in pending:
            violations.append(
                {
                    "code": "not_queried",
                    "excerpt_ids": [a.excerpt_id],
                    "detail": f"excerpt {a.excerpt_id} is not part of the pending batch",
                }
            )
        elif a.iteration != expected_iter:
            violations.append(
                {
                    "code": "wrong_iteration",
                    "excerpt_ids": [a.excerpt_id],
                    "detail": f"annotation for {a.excerpt_id} carries iteration "
                    f"{a.iteration}, expected {expected_iter}",
                }
            )
    missing = sorted(pending - seen)
    if missing:
        violations.append(
            {
                "code": "missing_label",
                "excerpt_ids": missing,
                "detail": f"batch is missing labels for: {', '.join(missing)}",
            }
        )
    return violations


def submit_annotations(session: Session, batch: Sequence[Annotation]) -> Session:
    """Accept a full batch of labels, retrain the committee, advance the loop.

    Rejects (leaving the session unchanged) any batch that is partial, has
    duplicates, or labels excerpts that were not queried.
    """
    if session.state is not SessionState.AWAITING_ANNOTATIONS:
        raise StateError(f"submit_annotations in state {session.state.value}")
    violations = validate_batch(session, batch)
    if violations:
        raise ProtocolError(violations)

    annotations = session.annotations + tuple(batch)
    committee = retrain_with_user(session.committee, annotations, session)
    iteration = session.iteration + 1
    state = (
        SessionState.FINALIZED
        if iteration >= session.config.max_iterations
        else SessionState.AWAITING_BATCH
    )
    return replace(
        session,
        annotations=annotations,
        committee=committee,
        iteration=iteration,
        state=state,
        pending=(),
    )


def retrain_with_user(
    committee: Committee, annotations: Sequence[Annotation], session: Session
) -> Committee:
    """Retrain every member from scratch on its pretraining split plus user rows.

    User annotations enter with sample weight config.w_user so thirty labels
    are not drowned by the pretraining corpus. With retain_pretraining off,
    members retrain on the user rows alone.
    """
    if not annotations:
        return committee
    cfg = session.config
    rows = [session.row_of(a.excerpt_id) for a in annotations]
    user_X = session.std_features[rows]
    user_y = np.asarray([a.label.index for a in annotations], dtype=int)
    hyper = TrainParams.from_hyper_dict(committee.provenance["train_params"])

    members = []
    for i in range(committee.n_members):
        if cfg.retain_pretraining:
            idx = committee.member_train_indices(i)
            X = np.vstack([committee.train_X[idx], user_X])
            y = np.concatenate([committee.train_y[idx], user_y])
            w = np.concatenate([np.ones(idx.size), np.full(user_y.size, cfg.w_user)])
        else:
            X, y = user_X, np.asarray(user_y)
            w = np.full(user_y.size, cfg.w_user)
        params = TrainParams.from_hyper_dict(hyper.hyper_dict(), sample_weights=w)
        members.append(train(X, y, params))

    applied = [{"excerpt_id": a.excerpt_id, "label": a.label.value} for a in annotations]
    return committee_with(committee, members, applied, cfg.w_user)


def finalize(session: Session) -> PersonalizedModel:
    """Freeze the session into a model plus its unannotated test pool."""
    if session.state is not SessionState.FINALIZED:
        raise StateError(f"finalize in state {session.state.value}")
    annotated = session.annotated_ids
    test_rows = [i for i, ex in enumerate(session.pool) if ex.id not in annotated]
    test_pool = tuple(session.pool[i] for i in test_rows)
    return PersonalizedModel(
        session_id=session.session_id,
        committee=session.committee,
        annotations=session.annotations,
        test_pool=test_pool,
        test_features=session.std_features[test_rows],
        config=session.config,
        empty_test_pool=not test_pool,
    )


def make_annotations(
    session: Session,
    labels: dict[str, Quadrant],
    timestamp: Optional[datetime] = None,
) -> list[Annotation]:
    """Build Annotation objects for the current pending batch from raw labels."""
    ts = timestamp or datetime.now(timezone.utc)
    return [
        Annotation(excerpt_id=eid, label=q, iteration=session.iteration + 1, timestamp=ts)
        for eid, q in labels.items()
    ]
