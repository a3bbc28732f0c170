"""End-to-end personalization runs driven by a simulated oracle.

One run: create a session, answer every queried batch with the oracle
profile, retrain after each batch, finalize, and audit. Used by the CLI
simulate/sweep commands and by the acceptance suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from . import active_loop as loop
from . import events as ev
from .active_loop import LoopConfig, PersonalizedModel, Session, UserProfile, VoteIntent
from .analysis import BiasReport, build_report
from .committee import Committee
from .core import Annotation, Excerpt
from .sim_oracle import OracleProfile, label

# Fixed timestamp for simulated annotations keeps simulation output a pure
# function of (pool, committee, profile, config).
_EPOCH = datetime(2000, 1, 1, tzinfo=timezone.utc)

_VOTE_BY_ALIGNMENT = {
    "Left": VoteIntent.LEFT,
    "Right": VoteIntent.RIGHT,
    "Center": VoteIntent.BLANK,
}


@dataclass(frozen=True)
class SimulationResult:
    session: Session
    model: PersonalizedModel
    report: BiasReport


def run_simulation(
    pool: Sequence[Excerpt],
    committee: Committee,
    profile: OracleProfile,
    config: LoopConfig = LoopConfig(),
    top_k: int = 10,
    session_dir: Optional[str | Path] = None,
    session_id: Optional[str] = None,
    pool_ref: Optional[dict] = None,
    committee_ref: Optional[dict] = None,
) -> SimulationResult:
    """Run the full annotation loop with a simulated oracle and audit the result.

    With ``session_dir`` set, the run is persisted as an event log plus one
    committee snapshot per retrain, replayable via events.replay_session.
    """
    session_id = session_id or f"sim-{profile.name}-seed{config.seed}"
    session = loop.create_session(
        session_id=session_id,
        user_profile=UserProfile(
            display_name=f"sim:{profile.name}",
            political_view=profile.alignment.value,
            vote_intent=_VOTE_BY_ALIGNMENT[profile.alignment.value],
        ),
        pool=pool,
        committee=committee,
        config=config,
    )
    log = ev.SessionLog(Path(session_dir)) if session_dir else None
    if log:
        ev.log_session_created(log, session, pool_ref=pool_ref, committee_ref=committee_ref)

    while session.state is not loop.SessionState.FINALIZED:
        if session.iteration == 0:
            session, batch = loop.initial_batch(session)
            kind = "initial"
        else:
            session, batch = loop.next_batch(session)
            kind = "entropy"
        if log:
            ev.log_batch_issued(log, session, batch, kind)
        answers = [
            Annotation(
                excerpt_id=eid,
                label=label(profile, session.excerpt(eid)),
                iteration=session.iteration + 1,
                timestamp=_EPOCH,
            )
            for eid in batch
        ]
        session = loop.submit_annotations(session, answers)
        if log:
            ev.log_annotations_submitted(log, session.iteration, answers)
            log.snapshot_committee(session.committee, session.iteration)
    if log:
        ev.log_finalized(log, session)

    model = loop.finalize(session)
    report = build_report(model, top_k=top_k)
    return SimulationResult(session=session, model=model, report=report)
