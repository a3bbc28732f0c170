"""Append-only session event log and exact replay.

The log is the single source of truth for a session: one JSON line per event
(SessionCreated, BatchIssued, AnnotationsSubmitted, Finalized) plus a
committee snapshot per retrain. Replay re-runs the pure loop operations with
the recorded inputs and verifies that every recomputed batch matches the
recorded one, so any nondeterminism or input drift fails loudly instead of
silently diverging.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from . import active_loop as loop
from .committee import Committee, save_committee
from .core import Annotation, Excerpt
from .active_loop import LoopConfig, Session, SessionState, UserProfile

EVENTS_FILE = "events.jsonl"
SNAPSHOT_DIR = "snapshots"

SESSION_CREATED = "session_created"
BATCH_ISSUED = "batch_issued"
ANNOTATIONS_SUBMITTED = "annotations_submitted"
FINALIZED = "finalized"


class ReplayError(RuntimeError):
    """The event log does not reproduce under replay."""


def pool_hash(pool: Sequence[Excerpt]) -> str:
    h = hashlib.sha256()
    for ex in sorted(pool, key=lambda e: e.id):
        h.update(json.dumps(ex.to_json_dict(), sort_keys=True).encode())
    return h.hexdigest()


def committee_hash(committee: Committee) -> str:
    payload = {
        "dataset_hash": committee.provenance.get("dataset_hash"),
        "seed": committee.provenance.get("seed"),
        "k": committee.provenance.get("k"),
        "train_params": committee.provenance.get("train_params"),
        "fold_assignment": [int(i) for i in committee.fold_assignment],
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass
class SessionLog:
    """Writer handle for one session directory."""

    directory: Path

    @property
    def events_path(self) -> Path:
        return self.directory / EVENTS_FILE

    def append(self, event_type: str, payload: dict) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        record = {
            "type": event_type,
            "ts": datetime.now(timezone.utc).isoformat(),
            **payload,
        }
        with self.events_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def read(self) -> list[dict]:
        if not self.events_path.exists():
            return []
        lines = self.events_path.read_text(encoding="utf-8").splitlines()
        return [json.loads(line) for line in lines if line.strip()]

    def snapshot_committee(self, committee: Committee, iteration: int) -> Path:
        out = self.directory / SNAPSHOT_DIR / f"iter_{iteration:02d}"
        save_committee(committee, out)
        return out

    def latest_snapshot(self) -> Optional[Path]:
        root = self.directory / SNAPSHOT_DIR
        if not root.exists():
            return None
        snaps = sorted(root.iterdir())
        return snaps[-1] if snaps else None


def log_session_created(
    log: SessionLog,
    session: Session,
    pool_ref: Optional[dict] = None,
    committee_ref: Optional[dict] = None,
) -> None:
    log.append(
        SESSION_CREATED,
        {
            "session_id": session.session_id,
            "user_profile": session.user_profile.to_json_dict(),
            "config": session.config.to_json_dict(),
            "pool_ref": {**(pool_ref or {}), "content_hash": pool_hash(session.pool)},
            "committee_ref": {
                **(committee_ref or {}),
                "content_hash": committee_hash(session.committee),
            },
        },
    )


def log_batch_issued(log: SessionLog, session: Session, batch: list[str], kind: str) -> None:
    log.append(
        BATCH_ISSUED,
        {"iteration": session.iteration + 1, "kind": kind, "excerpt_ids": list(batch)},
    )


def log_annotations_submitted(log: SessionLog, iteration: int, batch: Sequence[Annotation]) -> None:
    log.append(
        ANNOTATIONS_SUBMITTED,
        {"iteration": iteration, "annotations": [a.to_json_dict() for a in batch]},
    )


def log_finalized(log: SessionLog, session: Session) -> None:
    log.append(
        FINALIZED,
        {
            "n_annotations": len(session.annotations),
            "test_pool_size": len(session.pool) - len(session.annotations),
        },
    )


def replay_session(
    log: SessionLog,
    pool: Sequence[Excerpt],
    committee: Committee,
    verify_refs: bool = True,
) -> Session:
    """Rebuild a session from its event log against the referenced pool/committee.

    Batches are recomputed through the live operations and compared to the
    recorded ones; a mismatch raises ReplayError.
    """
    events = log.read()
    if not events or events[0]["type"] != SESSION_CREATED:
        raise ReplayError(f"{log.events_path}: log must start with {SESSION_CREATED}")
    created = events[0]
    if verify_refs:
        want_pool = created["pool_ref"]["content_hash"]
        have_pool = pool_hash(pool)
        if want_pool != have_pool:
            raise ReplayError(
                f"pool content hash mismatch: log has {want_pool[:12]}, got {have_pool[:12]}"
            )
        want_c = created["committee_ref"]["content_hash"]
        have_c = committee_hash(committee)
        if want_c != have_c:
            raise ReplayError(
                f"committee hash mismatch: log has {want_c[:12]}, got {have_c[:12]}"
            )

    session = loop.create_session(
        session_id=created["session_id"],
        user_profile=UserProfile.from_json_dict(created["user_profile"]),
        pool=pool,
        committee=committee,
        config=LoopConfig.from_json_dict(created["config"]),
    )
    for event in events[1:]:
        etype = event["type"]
        if etype == BATCH_ISSUED:
            if event["kind"] == "initial":
                session, batch = loop.initial_batch(session)
            else:
                session, batch = loop.next_batch(session)
            if batch != event["excerpt_ids"]:
                raise ReplayError(
                    f"batch mismatch at iteration {event['iteration']}: "
                    f"recomputed {batch}, log has {event['excerpt_ids']}"
                )
        elif etype == ANNOTATIONS_SUBMITTED:
            batch = [Annotation.from_json_dict(a) for a in event["annotations"]]
            session = loop.submit_annotations(session, batch)
        elif etype == FINALIZED:
            if session.state is not SessionState.FINALIZED:
                raise ReplayError("log records finalization but replay is not finalized")
        elif etype == SESSION_CREATED:
            raise ReplayError("duplicate session_created event")
        else:
            raise ReplayError(f"unknown event type {etype!r}")
    return session
