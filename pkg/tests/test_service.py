import json
import urllib.error
import urllib.request
from datetime import datetime, timedelta, timezone

import pytest

from labelloop.clock import SimulatedClock
from labelloop.engine import Platform
from labelloop.service import Service
from test_engine import doc_lines, project_cfg, stream_of

UTC = timezone.utc
T0 = datetime(2021, 6, 1, tzinfo=UTC)


class Client:
    def __init__(self, port):
        self.base = f"http://127.0.0.1:{port}"

    def request(self, method, path, body=None):
        data = json.dumps(body).encode() if body is not None else None
        req = urllib.request.Request(self.base + path, data=data, method=method)
        if data:
            req.add_header("Content-Type", "application/json")
        try:
            with urllib.request.urlopen(req, timeout=10) as resp:
                raw = resp.read()
                payload = json.loads(raw) if raw and resp.headers.get(
                    "Content-Type", "").startswith("application/json") else raw.decode() if raw else None
                return resp.status, payload
        except urllib.error.HTTPError as exc:
            raw = exc.read()
            return exc.code, json.loads(raw) if raw else None

    def get(self, path):
        return self.request("GET", path)

    def post(self, path, body):
        return self.request("POST", path, body)


@pytest.fixture
def served(tmp_path):
    clock = SimulatedClock(T0)
    platform = Platform(tmp_path / "data", clock=clock, fsync=False)
    service = Service(platform, port=0).start()
    client = Client(service.port)
    yield platform, client
    service.stop()


class TestProjectAdmin:
    def test_create_and_list(self, served):
        _, client = served
        status, view = client.post("/v1/projects", project_cfg())
        assert status == 201
        assert view["project_id"] == "vax"
        assert view["query"] == "vaccine"
        status, projects = client.get("/v1/projects")
        assert status == 200
        assert [p["project_id"] for p in projects] == ["vax"]

    def test_invalid_query_cites_offset(self, served):
        _, client = served
        cfg = project_cfg()
        cfg["keywords"] = []
        cfg["query"] = "a AND"
        status, body = client.post("/v1/projects", cfg)
        assert status == 422
        violations = body["error"]["violations"]
        parse = [v for v in violations if v["code"] == "parse_error"]
        assert parse and parse[0]["offset"] == 5

    def test_unknown_project_404(self, served):
        _, client = served
        status, body = client.get("/v1/projects/ghost")
        assert status == 404
        assert body["error"]["code"] == "unknown_project"

    def test_describe_echoes_canonical_query_and_config(self, served):
        _, client = served
        cfg = project_cfg()
        cfg["query"] = "trial OR study"
        client.post("/v1/projects", cfg)
        status, view = client.get("/v1/projects/vax")
        assert status == 200
        assert view["query"] == "(vaccine AND (trial OR study))"
        assert view["config"]["question_sequence"]["start"] == "q1"

    def test_duplicate_project_409(self, served):
        _, client = served
        client.post("/v1/projects", project_cfg())
        status, body = client.post("/v1/projects", project_cfg())
        assert status == 409


class TestAnnotationEndpoints:
    def seed(self, served, n=2):
        platform, client = served
        client.post("/v1/projects", project_cfg())
        platform.ingest_stream("vax", stream_of(doc_lines(n)))
        return platform, client

    def test_next_204_when_empty(self, served):
        _, client = served
        client.post("/v1/projects", project_cfg())
        status, body = client.get("/v1/projects/vax/next?user=u1")
        assert status == 204

    def test_next_returns_doc_and_start_question(self, served):
        _, client = self.seed(served)
        status, body = client.get("/v1/projects/vax/next?user=u1")
        assert status == 200
        assert body["question"]["question_id"] == "q1"
        assert {a["answer_id"] for a in body["question"]["answers"]} == {"yes", "no"}
        assert "vaccine" in body["text"]

    def test_answer_flow_to_completion(self, served):
        _, client = self.seed(served)
        _, session = client.get("/v1/projects/vax/next?user=u1")
        doc = session["doc_id"]
        status, body = client.post("/v1/projects/vax/answers",
                                   {"user": "u1", "doc": doc,
                                    "question": "q1", "answer": "yes"})
        assert status == 200
        assert body["status"] == "next"
        assert body["question"]["question_id"] == "q2"
        status, body = client.post("/v1/projects/vax/answers",
                                   {"user": "u1", "doc": doc,
                                    "question": "q2", "answer": "pos"})
        assert status == 200
        assert body["status"] == "complete"

    def test_out_of_order_is_409(self, served):
        _, client = self.seed(served)
        _, session = client.get("/v1/projects/vax/next?user=u1")
        status, body = client.post("/v1/projects/vax/answers",
                                   {"user": "u1", "doc": session["doc_id"],
                                    "question": "q2", "answer": "pos"})
        assert status == 409
        assert body["error"]["code"] == "out_of_order"

    def test_expired_lease_is_410(self, served):
        platform, client = self.seed(served)
        _, session = client.get("/v1/projects/vax/next?user=u1")
        client.post("/v1/admin/clock", {"advance": 601})
        status, body = client.post("/v1/projects/vax/answers",
                                   {"user": "u1", "doc": session["doc_id"],
                                    "question": "q1", "answer": "yes"})
        assert status == 410
        assert body["error"]["code"] == "lease_expired"

    def test_unknown_answer_404(self, served):
        _, client = self.seed(served)
        _, session = client.get("/v1/projects/vax/next?user=u1")
        status, body = client.post("/v1/projects/vax/answers",
                                   {"user": "u1", "doc": session["doc_id"],
                                    "question": "q1", "answer": "banana"})
        assert status == 404
        assert body["error"]["code"] == "unknown_answer"


class TestHappyPathEndToEnd:
    def test_consensus_and_trends_visible(self, served):
        platform, client = served
        client.post("/v1/projects", project_cfg())
        platform.ingest_stream("vax", stream_of(doc_lines(2)))
        completions = 0
        for user in ("u1", "u2"):
            while True:
                status, session = client.get(f"/v1/projects/vax/next?user={user}")
                if status == 204:
                    break
                doc = session["doc_id"]
                _, body = client.post("/v1/projects/vax/answers",
                                      {"user": user, "doc": doc,
                                       "question": "q1", "answer": "yes"})
                mood = "pos" if "great" in session["text"] else "neg"
                _, body = client.post("/v1/projects/vax/answers",
                                      {"user": user, "doc": doc,
                                       "question": "q2", "answer": mood})
                assert body["status"] == "complete"
                completions += 1
        assert completions == 4  # 2 docs x k=2
        rt = platform.runtime("vax")
        assert len(rt.consensus) == 2
        platform.retrain("vax")
        platform.recompute_predictions("vax")
        frm = (T0 - timedelta(hours=1)).isoformat()
        to = (T0 + timedelta(hours=3)).isoformat()
        status, points = client.get(f"/v1/projects/vax/trends?from={frm}&to={to}")
        assert status == 200
        assert sum(sum(p["counts"].values()) for p in points) == 2

    def test_queue_snapshot_and_metrics(self, served):
        platform, client = served
        client.post("/v1/projects", project_cfg())
        platform.ingest_stream("vax", stream_of(doc_lines(3)))
        status, snap = client.get("/v1/projects/vax/queue")
        assert status == 200
        assert snap["size"] == 3
        assert snap["max_priority"] >= snap["min_priority"]
        assert len(snap["entries"]) == 3
        status, metrics = client.get("/v1/metrics")
        assert status == 200
        assert metrics["projects"]["vax"]["matched"] == 3
        status, metrics2 = client.get("/metrics")
        assert status == 200

    def test_trends_csv_export(self, served):
        platform, client = served
        client.post("/v1/projects", project_cfg())
        frm = (T0 - timedelta(hours=1)).isoformat()
        to = (T0 + timedelta(hours=2)).isoformat()
        status, text = client.request(
            "GET", f"/v1/projects/vax/trends.csv?from={frm}&to={to}")
        assert status == 200
        assert text.startswith("bucket_start,count_positive")

    def test_bad_range_422(self, served):
        _, client = served
        client.post("/v1/projects", project_cfg())
        status, body = client.get("/v1/projects/vax/trends?from=zzz&to=yyy")
        assert status == 422
        assert body["error"]["code"] == "bad_range"

    def test_restart_loses_leases_keeps_rows(self, served, tmp_path):
        platform, client = served
        client.post("/v1/projects", project_cfg())
        platform.ingest_stream("vax", stream_of(doc_lines(2)))
        _, session = client.get("/v1/projects/vax/next?user=u1")
        doc = session["doc_id"]
        client.post("/v1/projects/vax/answers",
                    {"user": "u1", "doc": doc, "question": "q1", "answer": "yes"})
        rows_before = len(platform.runtime("vax").rows)
        platform.snapshot()
        reopened = Platform(platform.data_dir, clock=SimulatedClock(T0 + timedelta(hours=1)),
                            fsync=False)
        assert len(reopened.runtime("vax").rows) == rows_before
        assert reopened.runtime("vax").sessions.active == {}
