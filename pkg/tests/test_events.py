import json

import pytest

from emoloop.active_loop import LoopConfig, SessionState
from emoloop.analysis import build_report, render_report
from emoloop.committee import save_committee
from emoloop.events import ReplayError, SessionLog, replay_session
from emoloop.features import swap_pool_types
from emoloop.sim_oracle import get_profile
from emoloop.simulate import run_simulation
from emoloop.active_loop import finalize

CFG = LoopConfig(batch_size=2, initial_per_type=1, max_iterations=3, seed=13)


def dir_bytes(path):
    return {
        p.relative_to(path).as_posix(): p.read_bytes()
        for p in sorted(path.rglob("*"))
        if p.is_file()
    }


class TestSimulationRun:
    def test_run_produces_finalized_model_and_report(self, small_pool, small_committee):
        result = run_simulation(
            small_pool, small_committee, get_profile("left", seed=13), CFG, top_k=5
        )
        assert result.session.state is SessionState.FINALIZED
        assert len(result.session.annotations) == 6
        assert len(result.model.test_pool) == 14
        assert result.report.top_k == 5

    def test_simulation_is_deterministic(self, small_pool, small_committee):
        a = run_simulation(small_pool, small_committee, get_profile("left", seed=13), CFG)
        b = run_simulation(small_pool, small_committee, get_profile("left", seed=13), CFG)
        assert render_report(a.report, "json") == render_report(b.report, "json")

    def test_mirror_symmetry_exact(self, small_pool, small_committee):
        left = get_profile("left", seed=13)
        right = get_profile("right", seed=13)
        on_pool = run_simulation(small_pool, small_committee, left, CFG, top_k=5)
        on_swapped = run_simulation(
            swap_pool_types(small_pool), small_committee, right, CFG, top_k=5
        )
        # identical up to source-type relabeling
        assert [eid for eid, _ in on_pool.report.ranking] == [
            eid for eid, _ in on_swapped.report.ranking
        ]
        for (eid_a, p_a), (eid_b, p_b) in zip(on_pool.report.ranking, on_swapped.report.ranking):
            assert p_a == p_b
        from emoloop.core import SourceType

        assert on_pool.report.counts[SourceType.TYPE_A] == on_swapped.report.counts[SourceType.TYPE_B]
        assert on_pool.report.counts[SourceType.TYPE_B] == on_swapped.report.counts[SourceType.TYPE_A]
        assert on_pool.report.mean_q2[SourceType.TYPE_A] == on_swapped.report.mean_q2[SourceType.TYPE_B]


class TestReplay:
    def test_replay_reproduces_everything_byte_identical(
        self, small_pool, small_committee, tmp_path
    ):
        session_dir = tmp_path / "session"
        result = run_simulation(
            small_pool,
            small_committee,
            get_profile("left", seed=13),
            CFG,
            top_k=5,
            session_dir=session_dir,
        )
        log = SessionLog(session_dir)
        replayed = replay_session(log, small_pool, small_committee)
        assert replayed.state is SessionState.FINALIZED
        assert replayed.annotations == result.session.annotations

        # committee serialization byte-identical
        save_committee(result.session.committee, tmp_path / "orig")
        save_committee(replayed.committee, tmp_path / "replayed")
        assert dir_bytes(tmp_path / "orig") == dir_bytes(tmp_path / "replayed")
        # and matches the last persisted snapshot
        assert dir_bytes(log.latest_snapshot()) == dir_bytes(tmp_path / "orig")

        # report byte-identical
        report = build_report(finalize(replayed), top_k=5)
        assert render_report(report, "json") == render_report(result.report, "json")

    def test_replay_detects_pool_drift(self, small_pool, small_committee, tmp_path):
        session_dir = tmp_path / "session"
        run_simulation(
            small_pool,
            small_committee,
            get_profile("left", seed=13),
            CFG,
            session_dir=session_dir,
        )
        with pytest.raises(ReplayError, match="pool"):
            replay_session(SessionLog(session_dir), small_pool[:-1], small_committee)

    def test_replay_detects_tampered_batch(self, small_pool, small_committee, tmp_path):
        session_dir = tmp_path / "session"
        run_simulation(
            small_pool,
            small_committee,
            get_profile("left", seed=13),
            CFG,
            session_dir=session_dir,
        )
        events_path = session_dir / "events.jsonl"
        lines = events_path.read_text().splitlines()
        tampered = []
        for line in lines:
            event = json.loads(line)
            if event["type"] == "batch_issued" and event["kind"] == "initial":
                event["excerpt_ids"] = list(reversed(event["excerpt_ids"]))
            tampered.append(json.dumps(event, sort_keys=True))
        events_path.write_text("\n".join(tampered) + "\n")
        with pytest.raises(ReplayError, match="batch mismatch"):
            replay_session(SessionLog(session_dir), small_pool, small_committee)

    def test_event_log_structure(self, small_pool, small_committee, tmp_path):
        session_dir = tmp_path / "session"
        run_simulation(
            small_pool,
            small_committee,
            get_profile("center", seed=13),
            CFG,
            session_dir=session_dir,
        )
        events = SessionLog(session_dir).read()
        types = [e["type"] for e in events]
        assert types == [
            "session_created",
            "batch_issued",
            "annotations_submitted",
            "batch_issued",
            "annotations_submitted",
            "batch_issued",
            "annotations_submitted",
            "finalized",
        ]
        kinds = [e["kind"] for e in events if e["type"] == "batch_issued"]
        assert kinds == ["initial", "entropy", "entropy"]
