"""End-to-end mini scenario: ingest, annotate to consensus, retrain, trends.

Uses a simulated clock and a temporary data directory; everything here is
deterministic and replayable from the event log it writes.

Run: python demos/05_full_platform.py
"""
import json
import tempfile
from datetime import datetime, timedelta, timezone

from labelloop import Platform, SimulatedClock, replay_check

T0 = datetime(2021, 6, 1, tzinfo=timezone.utc)

config = json.load(open("projects/vaccine_sentiment.json"))
config["queue_config"]["consensus_k"] = 2
config["retrain_config"]["batch_threshold"] = 5


def lines():
    moods = ["great", "awful", "great", "terrible", "wonderful", "scary"] * 4
    for i, mood in enumerate(moods):
        yield json.dumps({
            "doc_id": f"d{i}",
            "text": f"the vaccine is {mood} t{i % 7}",
            "created_at": (T0 + timedelta(minutes=20 * i)).isoformat(),
        })


with tempfile.TemporaryDirectory() as workdir:
    platform = Platform(workdir, clock=SimulatedClock(T0), fsync=False)
    platform.create_project(config)

    from labelloop.ingest import parse_document
    stats = platform.ingest_stream("vaccine_sentiment",
                                   (parse_document(l) for l in lines()))
    print("ingest:", stats.as_dict())

    sessions = 0
    while True:
        progress = False
        for user in ("ann", "ben"):
            session = platform.start_session("vaccine_sentiment", user)
            if session is None:
                continue
            progress = True
            sessions += 1
            doc = session["doc_id"]
            question, _ = platform.submit_answer(
                "vaccine_sentiment", user, doc, "q1", "yes")
            mood = "pos" if any(w in session["text"]
                                for w in ("great", "wonderful")) else "neg"
            platform.submit_answer("vaccine_sentiment", user, doc,
                                   question.question_id, mood)
        if not progress:
            break

    rt = platform.runtime("vaccine_sentiment")
    decided = [c for c in rt.consensus.values() if c.label]
    print(f"sessions completed: {sessions}; consensus labels: {len(decided)}")
    print(f"model version: {rt.model.version if rt.model else 0}")

    platform.recompute_predictions("vaccine_sentiment")
    points = platform.trend_points("vaccine_sentiment",
                                   T0 - timedelta(hours=1),
                                   T0 + timedelta(hours=9))
    for p in points:
        total = sum(p.counts.values())
        if total:
            print(f"  {p.bucket_start:%H:%M} counts={p.counts} index={p.index:+.2f}")

    platform.close()
    events, ok, message = replay_check(workdir)
    print("replay-check:", message)
