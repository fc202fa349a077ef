"""Platform wiring: projects, ingest, sessions, consensus, retraining.

One Platform owns the event log and a runtime per project (parsed query,
label queue, current model, trend counts, session tracker).  All mutation
funnels through here so that replaying the log rebuilds the same state:
documents, annotation rows, consensus labels and model publications are
events; the label queue is a cache rebuilt from unresolved documents.

Consensus resolution is the heartbeat of the active-learning loop: each
resolved label counts toward the retrain trigger, and every retrain swaps
in a new model snapshot and reprioritizes the queue.
"""
from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional

from . import classifier
from .annotations import (
    SESSION_COMPLETE,
    AnnotationRow,
    ConsensusLabel,
    Project,
    SessionError,
    SessionTracker,
    load_project,
    majority_vote,
    project_to_config,
    sentiment_votes,
)
from .classifier import Model, featurize, retrain_trigger
from .clock import SystemClock, format_timestamp, parse_timestamp
from .ingest import Document, IngestStats, StreamItem, ingest_batch
from .labelqueue import LabelQueue, LeaseError
from .pipeline import (
    DEFAULT_UNCERTAINTY,
    PipelineMetrics,
    ProcessedDocument,
    ProjectContext,
    process_document,
)
from .store import EventLog, load_latest_snapshot, write_snapshot
from .trends import TrendPoint, TrendStore, bucket_start, trend_query

log = logging.getLogger(__name__)


def document_from_json_dict(d: dict) -> Document:
    return Document(
        doc_id=d["doc_id"], text=d["text"],
        created_at=parse_timestamp(d["created_at"]),
        lang=d.get("lang", ""), geo=d.get("geo"),
        source=d.get("source", ""), raw=d.get("raw"))


@dataclass
class StoredDocument:
    document: Document
    predicted_label: Optional[str] = None
    class_probabilities: Optional[list[float]] = None
    uncertainty: Optional[float] = None
    model_version: Optional[int] = None


class ProjectRuntime:
    def __init__(self, project: Project):
        self.project = project
        self.queue = LabelQueue(project.queue_config)
        self.model: Model | None = None
        self.trends = TrendStore()
        self.metrics = PipelineMetrics()
        self.sessions = SessionTracker(project)
        self.docstore: dict[str, StoredDocument] = {}
        self.rows: list[AnnotationRow] = []
        self.consensus: dict[str, ConsensusLabel] = {}
        self.new_labels_since_train = 0
        self.last_train_at: datetime | None = None
        self.last_reprioritize: datetime | None = None
        self.ingest_stats = IngestStats()
        self.lock = threading.RLock()

    def current_uncertainty(self, doc_id: str) -> float | None:
        """Least-confidence uncertainty of a stored doc under the live model."""
        stored = self.docstore.get(doc_id)
        if stored is None or self.model is None:
            return None
        probs = classifier.predict(self.model, featurize(stored.document.text))
        return classifier.uncertainty(
            probs, self.project.retrain_config.uncertainty_method)


class Platform:
    def __init__(self, data_dir: str | Path, clock=None, fsync: bool = True):
        self.data_dir = Path(data_dir)
        self.clock = clock or SystemClock()
        self.projects: dict[str, ProjectRuntime] = {}
        self.seen_ids: set[str] = set()
        (self.data_dir / "projects").mkdir(parents=True, exist_ok=True)
        (self.data_dir / "models").mkdir(parents=True, exist_ok=True)
        self.log = EventLog(self.data_dir / "events.log", fsync=fsync)
        self._load_projects()
        self._rebuild()

    # -- setup and recovery -------------------------------------------------

    def _load_projects(self) -> None:
        for path in sorted((self.data_dir / "projects").glob("*.json")):
            with open(path, encoding="utf-8") as fh:
                config = json.load(fh)
            project = load_project(config)
            self.projects[project.project_id] = ProjectRuntime(project)

    def create_project(self, config: dict) -> ProjectRuntime:
        """Validate and register a project; persists its config file."""
        project = load_project(config)
        if project.project_id in self.projects:
            raise SessionError("duplicate_project",
                               f"project {project.project_id!r} exists")
        runtime = ProjectRuntime(project)
        self.projects[project.project_id] = runtime
        path = self.data_dir / "projects" / f"{project.project_id}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(project_to_config(project), fh, indent=2, sort_keys=True)
        return runtime

    def runtime(self, project_id: str) -> ProjectRuntime:
        rt = self.projects.get(project_id)
        if rt is None:
            raise KeyError(project_id)
        return rt

    def _rebuild(self) -> None:
        """Restore state from the event log, then repopulate label queues."""
        events = 0
        for record in self.log.replay(0):
            events += 1
            payload = record.payload
            rt = self.projects.get(payload.get("project_id", ""))
            if rt is None:
                continue
            if record.kind == "document_stored":
                doc = document_from_json_dict(payload["doc"])
                self.seen_ids.add(doc.doc_id)
                rt.docstore[doc.doc_id] = StoredDocument(
                    doc, payload.get("predicted_label"),
                    payload.get("class_probabilities"),
                    payload.get("uncertainty"), payload.get("model_version"))
                if payload.get("predicted_label"):
                    rt.trends.add(doc.created_at, payload["predicted_label"])
            elif record.kind == "annotation_row":
                rt.rows.append(AnnotationRow.from_json_dict(payload))
            elif record.kind == "consensus":
                rt.consensus[payload["doc_id"]] = ConsensusLabel(
                    payload["doc_id"], payload["project_id"], payload["label"],
                    payload["support"], payload["total"],
                    parse_timestamp(payload["resolved_at"]))
            elif record.kind == "model_published":
                rt.model = classifier.load_model(payload["path"])
                rt.last_train_at = record.written_at
                rt.new_labels_since_train = 0
            elif record.kind == "bucket_closed":
                rt.trends.set_bucket(parse_timestamp(payload["bucket_start"]),
                                     payload["counts"])
        if events:
            log.info("rebuilt state from %d events", events)
        for rt in self.projects.values():
            self._rebuild_session_history(rt)
            self._rebuild_queue(rt)
            rt.new_labels_since_train = self._labels_since_last_model(rt)

    def _labels_since_last_model(self, rt: ProjectRuntime) -> int:
        if rt.last_train_at is None:
            return len([c for c in rt.consensus.values() if c.label is not None])
        return len([c for c in rt.consensus.values()
                    if c.label is not None and c.resolved_at > rt.last_train_at])

    def _rebuild_session_history(self, rt: ProjectRuntime) -> None:
        """Re-derive completed (user, doc) pairs by tracing rows in the DAG."""
        paths: dict[tuple[str, str], list[AnnotationRow]] = {}
        for row in rt.rows:
            paths.setdefault((row.user_id, row.doc_id), []).append(row)
        seq = rt.project.sequence
        for key, rows in paths.items():
            cursor: str | None = seq.start
            for row in rows:
                if cursor is None or row.question_id != cursor:
                    cursor = "__broken__"
                    break
                cursor = seq.transitions.get((row.question_id, row.answer_id))
            if cursor is None:
                rt.sessions.completed_pairs.add(key)

    def _rebuild_queue(self, rt: ProjectRuntime) -> None:
        """Offer every stored document lacking consensus, newest scores first."""
        now = self.clock.now()
        completed_by_doc: dict[str, set[str]] = {}
        for user, doc in rt.sessions.completed_pairs:
            completed_by_doc.setdefault(doc, set()).add(user)
        for doc_id, stored in rt.docstore.items():
            if doc_id in rt.consensus:
                continue
            u = rt.current_uncertainty(doc_id)
            if u is None:
                u = stored.uncertainty if stored.uncertainty is not None else DEFAULT_UNCERTAINTY
            rt.queue.offer(doc_id, stored.document.created_at, u, now)
            if doc_id in completed_by_doc:
                rt.queue.restore_progress(doc_id, completed_by_doc[doc_id])

    # -- ingest -------------------------------------------------------------

    def ingest_stream(self, project_id: str,
                      stream: Iterable[StreamItem]) -> IngestStats:
        """Run a stream through the project's filter/predict/persist path."""
        rt = self.runtime(project_id)
        ctx = self._context(rt)

        def sink(doc: Document) -> None:
            if hasattr(self.clock, "set"):
                self.clock.set(doc.created_at)
            ctx.model = rt.model  # pointer refresh between documents
            process_document(doc, ctx)
            self.maybe_reprioritize(rt)

        stats = ingest_batch(stream, sink, seen_ids=self.seen_ids)
        with rt.lock:
            rt.ingest_stats.accepted += stats.accepted
            rt.ingest_stats.rejected += stats.rejected
            rt.ingest_stats.duplicates += stats.duplicates
        return stats

    def _context(self, rt: ProjectRuntime) -> ProjectContext:
        def persist(processed: ProcessedDocument) -> None:
            doc = processed.document
            with rt.lock:
                self.log.append("document_stored", {
                    "project_id": rt.project.project_id,
                    "doc": doc.to_json_dict(),
                    "predicted_label": processed.predicted_label,
                    "class_probabilities": processed.class_probabilities,
                    "uncertainty": processed.uncertainty,
                    "model_version": processed.model_version,
                }, self.clock.now())
                rt.docstore[doc.doc_id] = StoredDocument(
                    doc, processed.predicted_label,
                    processed.class_probabilities, processed.uncertainty,
                    processed.model_version)
                if processed.predicted_label:
                    rt.trends.add(doc.created_at, processed.predicted_label)

        def offer(processed: ProcessedDocument) -> None:
            u = processed.uncertainty
            rt.queue.offer(processed.document.doc_id,
                           processed.document.created_at,
                           u if u is not None else DEFAULT_UNCERTAINTY,
                           self.clock.now())

        return ProjectContext(
            project_id=rt.project.project_id,
            query=rt.project.query,
            model=rt.model,
            persist=persist,
            offer=offer,
            metrics=rt.metrics,
            uncertainty_method=rt.project.retrain_config.uncertainty_method,
            sleep=self.clock.sleep,
        )

    def maybe_reprioritize(self, rt: ProjectRuntime) -> bool:
        """Refresh cached queue priorities once per configured interval.

        Keeps eviction honest during long ingests: without decay refreshes,
        equally-scored old entries would never make room for new ones.
        """
        now = self.clock.now()
        interval = rt.project.queue_config.reprioritize_interval
        if rt.last_reprioritize is not None \
                and (now - rt.last_reprioritize).total_seconds() < interval:
            return False
        rt.last_reprioritize = now
        rt.queue.reprioritize(now, rt.current_uncertainty)
        return True

    # -- annotation sessions -------------------------------------------------

    def start_session(self, project_id: str, user_id: str):
        """Next document and start question for a user, or None."""
        rt = self.runtime(project_id)
        with rt.lock:
            now = self.clock.now()
            doc_id = rt.queue.next_for_user(user_id, now)
            if doc_id is None:
                return None
            rt.sessions.begin(user_id, doc_id)
            stored = rt.docstore[doc_id]
            question = rt.project.sequence.questions[rt.project.sequence.start]
            return {
                "doc_id": doc_id,
                "text": stored.document.text,
                "question": question,
            }

    def submit_answer(self, project_id: str, user_id: str, doc_id: str,
                      question_id: str, answer_id: str):
        """Record one answer; advances, completes, and may resolve consensus.

        Returns (next_question | None, consensus | None); next_question None
        means the session completed.
        """
        rt = self.runtime(project_id)
        with rt.lock:
            now = self.clock.now()
            if (user_id, doc_id) not in rt.sessions.active:
                raise SessionError("no_session",
                                   f"no active session for {user_id} on {doc_id}")
            if not rt.queue.lease_valid(user_id, doc_id, now):
                rt.sessions.abandon(user_id, doc_id)
                raise SessionError("lease_expired",
                                   f"lease for {user_id} on {doc_id} expired")
            session, nxt = rt.sessions.answer(user_id, doc_id, question_id,
                                              answer_id, now)
            row = session.rows[-1]
            self.log.append("annotation_row", row.to_json_dict(), now)
            rt.rows.append(row)
            if nxt != SESSION_COMPLETE:
                return rt.project.sequence.questions[nxt], None

            consensus = None
            try:
                outcome = rt.queue.complete(user_id, doc_id, now)
            except LeaseError:
                outcome = "pending"  # raced an eviction; rows stay for audit
            if outcome == "consensus_ready":
                consensus = self._resolve_consensus(rt, doc_id, now)
            return None, consensus

    def _resolve_consensus(self, rt: ProjectRuntime, doc_id: str,
                           now: datetime) -> ConsensusLabel:
        if doc_id in rt.consensus:  # idempotent guard
            return rt.consensus[doc_id]
        doc_rows = [r for r in rt.rows if r.doc_id == doc_id]
        votes = sentiment_votes(doc_rows, rt.project, rt.sessions.completed_pairs)
        label, support, total = majority_vote(votes)
        consensus = ConsensusLabel(doc_id, rt.project.project_id, label,
                                   support, total, now)
        self.log.append("consensus", {
            "project_id": rt.project.project_id, "doc_id": doc_id,
            "label": label, "support": support, "total": total,
            "resolved_at": format_timestamp(now),
        }, now)
        rt.consensus[doc_id] = consensus
        if label is not None:
            rt.new_labels_since_train += 1
        self._maybe_retrain(rt, now)
        return consensus

    # -- training loop --------------------------------------------------------

    def _maybe_retrain(self, rt: ProjectRuntime, now: datetime) -> bool:
        elapsed = (now - rt.last_train_at).total_seconds() \
            if rt.last_train_at is not None else 0.0
        if not retrain_trigger(rt.new_labels_since_train, elapsed,
                               rt.project.retrain_config):
            return False
        return self.retrain(rt.project.project_id) is not None

    def retrain(self, project_id: str) -> Model | None:
        """Train on the consensus snapshot and publish; None if not trainable."""
        rt = self.runtime(project_id)
        with rt.lock:
            now = self.clock.now()
            examples = []
            for doc_id in sorted(rt.consensus):
                consensus = rt.consensus[doc_id]
                if consensus.label is None:  # undecided: noisy target, skip
                    continue
                stored = rt.docstore.get(doc_id)
                if stored is None:
                    continue
                examples.append(classifier.LabelledExample(
                    doc_id, featurize(stored.document.text), consensus.label))
            labels = {ex.label for ex in examples}
            if len(labels) < 2:
                log.info("retrain skipped for %s: %d classes", project_id, len(labels))
                return None
            base = rt.model.version if rt.model else 0
            model = classifier.train(examples, seed=1000 + base + 1,
                                     base_version=base)
            path = self.data_dir / "models" / f"{project_id}-v{model.version:04d}.json"
            classifier.save_model(model, str(path))
            self.log.append("model_published", {
                "project_id": project_id, "version": model.version,
                "path": str(path), "classes": list(model.classes),
                "trained_on": model.trained_on,
            }, now)
            rt.model = model
            rt.last_train_at = now
            rt.new_labels_since_train = 0
            rt.queue.reprioritize(now, rt.current_uncertainty)
            rt.last_reprioritize = now
            return model

    # -- trends ----------------------------------------------------------------

    def trend_points(self, project_id: str, from_ts: datetime,
                     to_ts: datetime) -> list[TrendPoint]:
        rt = self.runtime(project_id)
        return trend_query(rt.trends, from_ts, to_ts)

    def recompute_predictions(self, project_id: str) -> int:
        """Re-predict every stored document with the live model and close the
        affected buckets with authoritative counts."""
        rt = self.runtime(project_id)
        with rt.lock:
            if rt.model is None:
                return 0
            now = self.clock.now()
            rt.trends.clear()
            for stored in rt.docstore.values():
                label, probs = classifier.predict_label(
                    rt.model, featurize(stored.document.text))
                stored.predicted_label = label
                stored.class_probabilities = [float(p) for p in probs]
                stored.uncertainty = classifier.uncertainty(
                    probs, rt.project.retrain_config.uncertainty_method)
                stored.model_version = rt.model.version
                rt.trends.add(stored.document.created_at, label)
            for b, counts in sorted(rt.trends.counts_snapshot().items()):
                self.log.append("bucket_closed", {
                    "project_id": project_id,
                    "bucket_start": format_timestamp(bucket_start(b)),
                    "counts": counts,
                }, now)
            return len(rt.docstore)

    # -- introspection -----------------------------------------------------------

    def metrics(self) -> dict:
        out = {"projects": {}}
        for pid, rt in self.projects.items():
            out["projects"][pid] = {
                **rt.metrics.as_dict(),
                "ingest": rt.ingest_stats.as_dict(),
                "queue_size": len(rt.queue),
                "documents_stored": len(rt.docstore),
                "annotation_rows": len(rt.rows),
                "consensus_labels": len(rt.consensus),
                "model_version": rt.model.version if rt.model else 0,
            }
        return out

    def state_fingerprint(self) -> dict:
        """Replay-comparable digest: consensus, model versions, buckets."""
        out = {}
        for pid, rt in self.projects.items():
            out[pid] = {
                "consensus": {
                    doc_id: [c.label, c.support, c.total]
                    for doc_id, c in sorted(rt.consensus.items())
                },
                "model_version": rt.model.version if rt.model else 0,
                "buckets": {
                    format_timestamp(bucket_start(b)): counts
                    for b, counts in sorted(rt.trends.counts_snapshot().items())
                },
                "documents_stored": len(rt.docstore),
                "annotation_rows": len(rt.rows),
            }
        return out

    def snapshot(self) -> Path:
        return write_snapshot(self.data_dir / "snapshots",
                              self.state_fingerprint(), len(self.log))

    def close(self) -> None:
        self.snapshot()
        self.log.close()


def replay_check(data_dir: str | Path, clock=None) -> tuple[int, bool, str]:
    """Rebuild from the log and compare against the latest snapshot.

    Returns (event_count, ok, message).
    """
    data_dir = Path(data_dir)
    platform = Platform(data_dir, clock=clock, fsync=False)
    events = len(platform.log)
    snap = load_latest_snapshot(data_dir / "snapshots")
    if snap is None:
        return events, True, f"{events} events, OK (no snapshot to compare)"
    state, upto = snap
    if upto != events:
        return events, True, (f"{events} events, OK (snapshot at {upto} is stale; "
                              "skipping comparison)")
    rebuilt = platform.state_fingerprint()
    if rebuilt == state:
        return events, True, f"{events} events, OK"
    return events, False, f"{events} events, MISMATCH between replay and snapshot"
