import json
import random
from datetime import datetime, timedelta, timezone

import pytest

from labelloop.annotations import SessionError
from labelloop.clock import SimulatedClock
from labelloop.engine import Platform, replay_check

UTC = timezone.utc
T0 = datetime(2021, 6, 1, tzinfo=UTC)


def project_cfg(pid="vax", k=2, threshold=4, capacity=1000):
    return {
        "project_id": pid,
        "title": "Vaccine sentiment",
        "keywords": ["vaccine"],
        "query": "",
        "question_sequence": {
            "start": "q1",
            "questions": [
                {"question_id": "q1", "prompt": "Relevant?",
                 "answers": [{"answer_id": "yes", "label": "Yes"},
                             {"answer_id": "no", "label": "No"}]},
                {"question_id": "q2", "prompt": "Sentiment?",
                 "answers": [{"answer_id": "pos", "label": "Positive"},
                             {"answer_id": "neg", "label": "Negative"},
                             {"answer_id": "neu", "label": "Neutral"}]},
            ],
            "transitions": [
                {"question_id": "q1", "answer_id": "yes", "next_question_id": "q2"},
            ],
        },
        "sentiment_question": "q2",
        "class_map": {"pos": "positive", "neg": "negative", "neu": "neutral"},
        "queue_config": {"consensus_k": k, "capacity": capacity},
        "retrain_config": {"batch_threshold": threshold},
    }


def doc_lines(n, start=T0, minutes=30):
    """Alternating clearly-positive / clearly-negative vaccine docs."""
    lines = []
    for i in range(n):
        mood = "great wonderful" if i % 2 == 0 else "awful terrible"
        lines.append(json.dumps({
            "doc_id": f"d{i}",
            "text": f"the vaccine is {mood} v{i % 5}",
            "created_at": (start + timedelta(minutes=i * minutes)).isoformat(),
        }))
    return lines


def stream_of(lines):
    from labelloop.ingest import parse_document
    return (parse_document(line) for line in lines)


def answer_by_text(platform, pid, user):
    """Complete one full session, answering by the planted mood words."""
    session = platform.start_session(pid, user)
    if session is None:
        return None
    doc_id = session["doc_id"]
    q, _ = platform.submit_answer(pid, user, doc_id, "q1", "yes")
    mood = "pos" if "great" in session["text"] else "neg"
    nxt, consensus = platform.submit_answer(pid, user, doc_id, q.question_id, mood)
    assert nxt is None
    return doc_id, consensus


@pytest.fixture
def platform(tmp_path):
    clock = SimulatedClock(T0)
    p = Platform(tmp_path / "data", clock=clock, fsync=False)
    p.create_project(project_cfg())
    return p


class TestIngestPath:
    def test_matching_docs_stored_and_queued(self, platform):
        lines = doc_lines(4) + [json.dumps({
            "doc_id": "x1", "text": "nice weather",
            "created_at": T0.isoformat()})]
        stats = platform.ingest_stream("vax", stream_of(lines))
        assert stats.accepted == 5
        rt = platform.runtime("vax")
        assert len(rt.docstore) == 4  # non-match discarded, not stored
        assert len(rt.queue) == 4
        assert rt.metrics.as_dict()["discarded"] == 1

    def test_duplicates_counted_once(self, platform):
        lines = doc_lines(3)
        platform.ingest_stream("vax", stream_of(lines))
        stats = platform.ingest_stream("vax", stream_of(lines))
        assert stats.duplicates == 3
        assert len(platform.runtime("vax").docstore) == 3


class TestAnnotationLoop:
    def test_consensus_after_k_users(self, platform):
        platform.ingest_stream("vax", stream_of(doc_lines(1)))
        d1, c1 = answer_by_text(platform, "vax", "u1")
        assert c1 is None  # pending: k=2
        d2, c2 = answer_by_text(platform, "vax", "u2")
        assert d1 == d2
        assert c2 is not None
        assert c2.label == "positive"
        assert (c2.support, c2.total) == (2, 2)

    def test_retrain_fires_at_threshold(self, platform):
        platform.ingest_stream("vax", stream_of(doc_lines(8)))
        rt = platform.runtime("vax")
        resolved = 0
        while resolved < 4:
            for user in ("u1", "u2"):
                got = answer_by_text(platform, "vax", user)
                assert got is not None
                if got[1] is not None:
                    resolved += 1
        assert rt.model is not None
        assert rt.model.version == 1
        assert rt.new_labels_since_train == 0

    def test_predictions_after_retrain(self, platform):
        platform.ingest_stream("vax", stream_of(doc_lines(8)))
        resolved = 0
        while resolved < 4:
            for user in ("u1", "u2"):
                got = answer_by_text(platform, "vax", user)
                if got and got[1] is not None:
                    resolved += 1
        late = [json.dumps({"doc_id": "late1",
                            "text": "the vaccine is great wonderful v9",
                            "created_at": (T0 + timedelta(days=1)).isoformat()})]
        platform.ingest_stream("vax", stream_of(late))
        stored = platform.runtime("vax").docstore["late1"]
        assert stored.predicted_label == "positive"
        assert stored.model_version == 1

    def test_lease_expiry_mid_session(self, platform):
        platform.ingest_stream("vax", stream_of(doc_lines(1)))
        session = platform.start_session("vax", "u1")
        platform.clock.advance(601)  # default lease is 600 s
        with pytest.raises(SessionError) as exc:
            platform.submit_answer("vax", "u1", session["doc_id"], "q1", "yes")
        assert exc.value.code == "lease_expired"
        # another user can pick the document up
        assert platform.start_session("vax", "u2")["doc_id"] == session["doc_id"]

    def test_out_of_order_answer(self, platform):
        platform.ingest_stream("vax", stream_of(doc_lines(1)))
        session = platform.start_session("vax", "u1")
        with pytest.raises(SessionError) as exc:
            platform.submit_answer("vax", "u1", session["doc_id"], "q2", "pos")
        assert exc.value.code == "out_of_order"

    def test_empty_queue_returns_none(self, platform):
        assert platform.start_session("vax", "u1") is None


class TestTrendsIntegration:
    def test_counts_flow_into_buckets(self, platform):
        platform.ingest_stream("vax", stream_of(doc_lines(8)))
        resolved = 0
        while resolved < 4:
            for user in ("u1", "u2"):
                got = answer_by_text(platform, "vax", user)
                if got and got[1] is not None:
                    resolved += 1
        platform.recompute_predictions("vax")
        points = platform.trend_points("vax", T0 - timedelta(hours=1),
                                       T0 + timedelta(hours=6))
        counted = sum(sum(p.counts.values()) for p in points)
        assert counted == 8


class TestRebuild:
    def run_scenario(self, tmp_path, resolve=4):
        clock = SimulatedClock(T0)
        p = Platform(tmp_path / "data", clock=clock, fsync=False)
        p.create_project(project_cfg())
        p.ingest_stream("vax", stream_of(doc_lines(10)))
        resolved = 0
        while resolved < resolve:
            for user in ("u1", "u2"):
                got = answer_by_text(p, "vax", user)
                if got and got[1] is not None:
                    resolved += 1
        return p

    def test_fingerprint_survives_restart(self, tmp_path):
        p = self.run_scenario(tmp_path)
        fingerprint = p.state_fingerprint()
        p.close()
        p2 = Platform(tmp_path / "data", clock=SimulatedClock(T0 + timedelta(days=1)),
                      fsync=False)
        assert p2.state_fingerprint() == fingerprint

    def test_replay_check_passes(self, tmp_path):
        p = self.run_scenario(tmp_path)
        p.close()
        events, ok, message = replay_check(tmp_path / "data",
                                           clock=SimulatedClock(T0))
        assert ok, message
        assert events == len(p.log)

    def test_queue_rebuilt_from_unresolved(self, tmp_path):
        p = self.run_scenario(tmp_path)
        unresolved_docs = {d for d in p.runtime("vax").docstore
                           if d not in p.runtime("vax").consensus}
        p.close()
        p2 = Platform(tmp_path / "data", clock=SimulatedClock(T0 + timedelta(days=1)),
                      fsync=False)
        assert set(p2.runtime("vax").queue.doc_ids()) == unresolved_docs

    def test_completed_pairs_survive_restart(self, tmp_path):
        p = self.run_scenario(tmp_path)
        pairs = set(p.runtime("vax").sessions.completed_pairs)
        p.close()
        p2 = Platform(tmp_path / "data", clock=SimulatedClock(T0 + timedelta(days=1)),
                      fsync=False)
        assert p2.runtime("vax").sessions.completed_pairs == pairs
        # a user who completed a doc never sees it again, even post-restart
        for user, doc in pairs:
            session = p2.start_session("vax", user)
            assert session is None or session["doc_id"] != doc

    def test_fresh_dir_replay_check(self, tmp_path):
        events, ok, message = replay_check(tmp_path / "fresh")
        assert (events, ok) == (0, True)
        assert "0 events, OK" in message

    def test_event_sourcing_random_ops(self, tmp_path):
        # random interleaving of ingest and annotation; the rebuilt
        # fingerprint must equal the live one
        rng = random.Random(21)
        clock = SimulatedClock(T0)
        p = Platform(tmp_path / "data", clock=clock, fsync=False)
        p.create_project(project_cfg(threshold=3))
        next_doc = 0
        users = ["u1", "u2", "u3"]
        for _ in range(120):
            clock.advance(rng.randint(1, 120))
            roll = rng.random()
            if roll < 0.4:
                line = json.dumps({
                    "doc_id": f"r{next_doc}",
                    "text": f"vaccine is {'great' if rng.random() < 0.5 else 'awful'} w{rng.randint(0, 4)}",
                    "created_at": clock.now().isoformat(),
                })
                next_doc += 1
                p.ingest_stream("vax", stream_of([line]))
            else:
                answer_by_text(p, "vax", rng.choice(users))
        live = p.state_fingerprint()
        p.close()
        p2 = Platform(tmp_path / "data", clock=SimulatedClock(clock.now()),
                      fsync=False)
        assert p2.state_fingerprint() == live


class TestMetrics:
    def test_metrics_shape(self, platform):
        platform.ingest_stream("vax", stream_of(doc_lines(2)))
        m = platform.metrics()
        vax = m["projects"]["vax"]
        assert vax["processed"] == 2
        assert vax["matched"] == 2
        assert vax["ingest"]["accepted"] == 2
        assert vax["queue_size"] == 2
        assert vax["model_version"] == 0
