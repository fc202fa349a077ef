"""Background processing stage: filter, predict, persist, enqueue.

Accepted documents land on a bounded intake queue; a pool of workers drains
it.  Each document is matched against its project's query; matches are
annotated with the current model's prediction and uncertainty, persisted,
and offered to the label queue.  Non-matches are counted and dropped.

The intake blocks producers when full (explicit backpressure) and rejects
offers after close; workers drain whatever is in flight before exiting, so
shutdown loses nothing.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import classifier
from .classifier import Model, featurize
from .filterlang import FilterQuery, matches, tokenize
from .ingest import Document

log = logging.getLogger(__name__)

_CLOSED = object()


class QueueClosed(Exception):
    pass


class JobQueue:
    """Bounded FIFO with blocking put and drain-on-close semantics."""

    def __init__(self, capacity: int = 10_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list = []
        self._closed = False
        self._cond = threading.Condition()

    def put(self, item) -> None:
        with self._cond:
            while len(self._items) >= self.capacity and not self._closed:
                self._cond.wait()
            if self._closed:
                raise QueueClosed("intake is closed")
            self._items.append(item)
            self._cond.notify_all()

    def get(self):
        """Next item, or the CLOSED sentinel once closed and drained."""
        with self._cond:
            while not self._items and not self._closed:
                self._cond.wait()
            if self._items:
                item = self._items.pop(0)
                self._cond.notify_all()
                return item
            return _CLOSED

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def __len__(self) -> int:
        with self._cond:
            return len(self._items)


@dataclass
class ProcessedDocument:
    document: Document
    project_id: str
    matched: bool
    predicted_label: Optional[str] = None
    class_probabilities: Optional[list[float]] = None
    uncertainty: Optional[float] = None
    model_version: Optional[int] = None

    def __post_init__(self):
        if self.class_probabilities is not None:
            total = sum(self.class_probabilities)
            assert abs(total - 1.0) <= 1e-9, f"probabilities sum to {total}"
            assert self.uncertainty is not None
            assert self.model_version is not None


@dataclass
class PipelineMetrics:
    processed: int = 0
    matched: int = 0
    discarded: int = 0
    dead_lettered: int = 0
    worker_errors: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def bump(self, name: str, n: int = 1) -> None:
        with self._lock:
            setattr(self, name, getattr(self, name) + n)

    def as_dict(self) -> dict:
        with self._lock:
            return {"processed": self.processed, "matched": self.matched,
                    "discarded": self.discarded,
                    "dead_lettered": self.dead_lettered,
                    "worker_errors": self.worker_errors}


# uncertainty assigned before any model exists: maximally unsure
DEFAULT_UNCERTAINTY = 1.0


@dataclass
class ProjectContext:
    """Everything process_document needs, wired up by the engine."""

    project_id: str
    query: FilterQuery
    model: Optional[Model]  # swapped atomically between documents
    persist: Callable[[ProcessedDocument], None]
    offer: Callable[[ProcessedDocument], None]
    metrics: PipelineMetrics
    uncertainty_method: str = "least_confidence"
    persist_retries: int = 3
    backoff: float = 0.01
    sleep: Callable[[float], None] = lambda s: None


def process_document(doc: Document, ctx: ProjectContext) -> ProcessedDocument:
    """Filter one document; persist and enqueue it if it matches."""
    ctx.metrics.bump("processed")
    matched = matches(ctx.query, tokenize(doc.text))
    if not matched:
        ctx.metrics.bump("discarded")
        return ProcessedDocument(doc, ctx.project_id, False)

    model = ctx.model  # snapshot: one model per document
    if model is not None:
        label, probs = classifier.predict_label(model, featurize(doc.text))
        processed = ProcessedDocument(
            doc, ctx.project_id, True,
            predicted_label=label,
            class_probabilities=[float(p) for p in probs],
            uncertainty=classifier.uncertainty(probs, ctx.uncertainty_method),
            model_version=model.version)
    else:
        processed = ProcessedDocument(doc, ctx.project_id, True)

    delay = ctx.backoff
    for attempt in range(ctx.persist_retries + 1):
        try:
            ctx.persist(processed)
            break
        except OSError as exc:
            if attempt == ctx.persist_retries:
                ctx.metrics.bump("dead_lettered")
                log.error("dead-lettering %s after %d attempts: %s",
                          doc.doc_id, attempt + 1, exc)
                return processed
            ctx.sleep(delay)
            delay *= 2
    ctx.metrics.bump("matched")
    ctx.offer(processed)
    return processed


class PipelineHandle:
    def __init__(self, intake: JobQueue, threads: list[threading.Thread],
                 metrics: PipelineMetrics):
        self.intake = intake
        self._threads = threads
        self.metrics = metrics

    def shutdown(self) -> None:
        """Stop intake, drain in-flight items, join all workers."""
        self.intake.close()
        for t in self._threads:
            t.join()


def run_workers(n: int, intake: JobQueue,
                handler: Callable[[object], None],
                metrics: PipelineMetrics | None = None) -> PipelineHandle:
    """Start n workers draining the intake; failures are isolated per item."""
    if n < 1:
        raise ValueError("need at least one worker")
    metrics = metrics or PipelineMetrics()

    def work():
        while True:
            item = intake.get()
            if item is _CLOSED:
                return
            try:
                handler(item)
            except Exception:
                metrics.bump("worker_errors")
                log.exception("worker failed on %r", item)

    threads = []
    for i in range(n):
        t = threading.Thread(target=work, name=f"pipeline-worker-{i}", daemon=True)
        t.start()
        threads.append(t)
    return PipelineHandle(intake, threads, metrics)
