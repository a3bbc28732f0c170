"""Session store: event-sourced persistence plus per-session write locking.

The event log under data_dir/sessions/<id>/ is the single source of truth;
the in-memory Session objects are a cache rebuilt by replay on startup, so a
crash between any two events restores the exact pre-crash view. Mutations on
one session are serialized by its lock; distinct sessions proceed in
parallel.
"""

from __future__ import annotations

import logging
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from .. import active_loop as loop
from .. import events as ev
from ..active_loop import LoopConfig, Session, SessionState, UserProfile
from ..committee import Committee
from ..core import Annotation, Excerpt, Quadrant, ValidationError

log = logging.getLogger("emoloop.service")


class UnknownSessionError(KeyError):
    pass


class UnknownPoolError(KeyError):
    pass


@dataclass
class SessionEntry:
    session: Session
    pool_id: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    retraining: bool = False


class SessionStore:
    def __init__(
        self,
        data_dir: str | Path,
        pools: dict[str, list[Excerpt]],
        committee: Committee,
        async_retrain: bool = False,
    ):
        self.data_dir = Path(data_dir)
        self.pools = pools
        self.committee = committee
        self.async_retrain = async_retrain
        self._entries: dict[str, SessionEntry] = {}
        self._registry_lock = threading.Lock()
        self._load_existing()

    # -- persistence ---------------------------------------------------

    def _sessions_root(self) -> Path:
        return self.data_dir / "sessions"

    def _log_for(self, session_id: str) -> ev.SessionLog:
        return ev.SessionLog(self._sessions_root() / session_id)

    def _load_existing(self) -> None:
        root = self._sessions_root()
        if not root.exists():
            return
        for session_dir in sorted(root.iterdir()):
            events_path = session_dir / ev.EVENTS_FILE
            if not events_path.exists():
                continue
            session_log = ev.SessionLog(session_dir)
            created = session_log.read()[0]
            pool_id = created.get("pool_ref", {}).get("pool_id", "")
            pool = self.pools.get(pool_id)
            if pool is None:
                log.warning("session %s references unknown pool %r, skipping", session_dir.name, pool_id)
                continue
            session = ev.replay_session(session_log, pool, self.committee)
            self._entries[session.session_id] = SessionEntry(session=session, pool_id=pool_id)
            log.info("replayed session %s (state %s)", session.session_id, session.state.value)

    # -- operations ----------------------------------------------------

    def create_session(
        self,
        user_profile: UserProfile,
        pool_id: str,
        config: Optional[LoopConfig] = None,
    ) -> Session:
        pool = self.pools.get(pool_id)
        if pool is None:
            raise UnknownPoolError(pool_id)
        session_id = uuid.uuid4().hex
        session = loop.create_session(
            session_id=session_id,
            user_profile=user_profile,
            pool=pool,
            committee=self.committee,
            config=config or LoopConfig(),
        )
        session_log = self._log_for(session_id)
        ev.log_session_created(session_log, session, pool_ref={"pool_id": pool_id})
        session, batch = loop.initial_batch(session)
        ev.log_batch_issued(session_log, session, batch, kind="initial")
        entry = SessionEntry(session=session, pool_id=pool_id)
        with self._registry_lock:
            self._entries[session_id] = entry
        return session

    def _entry(self, session_id: str) -> SessionEntry:
        entry = self._entries.get(session_id)
        if entry is None:
            raise UnknownSessionError(session_id)
        return entry

    def get(self, session_id: str) -> Session:
        return self._entry(session_id).session

    def is_retraining(self, session_id: str) -> bool:
        return self._entry(session_id).retraining

    def submit(self, session_id: str, labels: list[tuple[str, Quadrant]]) -> Session:
        """Validate and apply one annotation batch; retrain; issue the next batch.

        In async mode the retraining and batch issue run in a worker thread
        and the session reads as retraining until they finish.
        """
        entry = self._entry(session_id)
        with entry.lock:
            if entry.retraining:
                raise loop.ProtocolError(
                    [
                        {
                            "code": "retraining",
                            "excerpt_ids": [],
                            "detail": "session is retraining; poll until it finishes",
                        }
                    ]
                )
            session = entry.session
            now = datetime.now(timezone.utc)
            batch = [
                Annotation(
                    excerpt_id=eid,
                    label=quadrant,
                    iteration=session.iteration + 1,
                    timestamp=now,
                )
                for eid, quadrant in labels
            ]
            if session.state is not SessionState.AWAITING_ANNOTATIONS:
                raise loop.StateError(f"submit in state {session.state.value}")
            violations = loop.validate_batch(session, batch)
            if violations:
                raise loop.ProtocolError(violations)
            if not self.async_retrain:
                entry.session = self._apply_batch(entry, session, batch)
                return entry.session
            entry.retraining = True

        worker = threading.Thread(
            target=self._apply_batch_async, args=(entry, session, batch), daemon=True
        )
        worker.start()
        return entry.session

    def _apply_batch(self, entry: SessionEntry, session: Session, batch: list[Annotation]) -> Session:
        session_log = self._log_for(session.session_id)
        session = loop.submit_annotations(session, batch)
        ev.log_annotations_submitted(session_log, session.iteration, batch)
        session_log.snapshot_committee(session.committee, session.iteration)
        if session.state is SessionState.AWAITING_BATCH:
            session, next_ids = loop.next_batch(session)
            ev.log_batch_issued(session_log, session, next_ids, kind="entropy")
        elif session.state is SessionState.FINALIZED:
            ev.log_finalized(session_log, session)
        return session

    def _apply_batch_async(self, entry: SessionEntry, session: Session, batch: list[Annotation]) -> None:
        try:
            updated = self._apply_batch(entry, session, batch)
            with entry.lock:
                entry.session = updated
        finally:
            with entry.lock:
                entry.retraining = False

    def find_excerpt(self, excerpt_id: str) -> Optional[Excerpt]:
        for pool in self.pools.values():
            for ex in pool:
                if ex.id == excerpt_id:
                    return ex
        return None
