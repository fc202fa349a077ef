"""Document sources and intake.

The live social-media stream is replaced by two replayable sources: NDJSON
file replay (optionally paced by the documents' own timestamps) and a
seeded synthetic generator.  Both yield the same item type, so the rest of
the pipeline never knows where a document came from.
"""
from __future__ import annotations

import json
import random
import unicodedata
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Callable, Iterable, Iterator, Union

from .clock import UTC, format_timestamp, parse_timestamp

_KNOWN_FIELDS = {"doc_id", "text", "created_at", "lang", "geo", "source"}


@dataclass(frozen=True)
class Document:
    """One ingested text item.  `geo` and `raw` are opaque pass-through."""

    doc_id: str
    text: str
    created_at: datetime
    lang: str = ""
    geo: str | None = None
    source: str = ""
    raw: dict | None = None

    def to_json_dict(self) -> dict:
        d = {
            "doc_id": self.doc_id,
            "text": self.text,
            "created_at": format_timestamp(self.created_at),
            "lang": self.lang,
            "source": self.source,
        }
        if self.geo is not None:
            d["geo"] = self.geo
        if self.raw:
            d["raw"] = self.raw
        return d


@dataclass(frozen=True)
class Rejection:
    """A record that could not become a Document; counted, never fatal."""

    reason: str  # malformed_json | missing_field | empty_text | bad_timestamp
    detail: str = ""


StreamItem = Union[Document, Rejection]


@dataclass
class StreamSourceConfig:
    kind: str  # file_replay | generated
    path: str | None = None
    speedup: float = 1.0
    seed: int = 0
    count: int = 1000  # generated source only

    def validate(self) -> None:
        if self.kind not in ("file_replay", "generated"):
            raise ValueError(f"unknown source kind: {self.kind!r}")
        if self.speedup < 0:
            raise ValueError("speedup must be >= 0")
        if self.kind == "file_replay" and not self.path:
            raise ValueError("file_replay requires a path")


def parse_document(line: bytes | str, source: str = "") -> StreamItem:
    """Parse one NDJSON record into a Document or a typed Rejection.

    Text is NFC-normalized; unknown fields are preserved in `raw`.
    """
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            return Rejection("malformed_json", f"not utf-8: {exc}")
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        return Rejection("malformed_json", str(exc))
    if not isinstance(obj, dict):
        return Rejection("malformed_json", "record is not a JSON object")

    doc_id = obj.get("doc_id")
    if not isinstance(doc_id, str) or not doc_id:
        return Rejection("missing_field", "doc_id missing or empty")
    text = obj.get("text")
    if not isinstance(text, str):
        return Rejection("missing_field", "text missing")
    text = unicodedata.normalize("NFC", text)
    if not text:
        return Rejection("empty_text", f"doc {doc_id}")
    created = obj.get("created_at")
    if not isinstance(created, str):
        return Rejection("missing_field", "created_at missing")
    try:
        created_at = parse_timestamp(created)
    except ValueError as exc:
        return Rejection("bad_timestamp", f"doc {doc_id}: {exc}")

    raw = {k: v for k, v in obj.items() if k not in _KNOWN_FIELDS}
    return Document(
        doc_id=doc_id,
        text=text,
        created_at=created_at,
        lang=obj.get("lang") or "",
        geo=obj.get("geo"),
        source=obj.get("source") or source,
        raw=raw or None,
    )


def _file_replay(config: StreamSourceConfig,
                 sleep: Callable[[float], None]) -> Iterator[StreamItem]:
    prev_ts: datetime | None = None
    with open(config.path, "rb") as fh:
        for line in fh:
            if not line.strip():
                continue
            item = parse_document(line, source=f"file:{config.path}")
            if isinstance(item, Document):
                if config.speedup > 0 and prev_ts is not None:
                    gap = (item.created_at - prev_ts).total_seconds()
                    if gap > 0:
                        sleep(gap / config.speedup)
                prev_ts = item.created_at
            yield item


_GEN_TOPIC = ["vaccine", "vaccination", "vaxxed", "clinic", "dose", "shot"]
_GEN_FILLER = [
    "today", "news", "people", "think", "really", "going", "good", "bad",
    "maybe", "report", "study", "kids", "school", "flu", "measles", "health",
]


def _generated(config: StreamSourceConfig) -> Iterator[StreamItem]:
    rng = random.Random(config.seed)
    ts = datetime(2021, 3, 1, tzinfo=UTC)
    for i in range(config.count):
        ts += timedelta(seconds=rng.randint(10, 600))
        words = [rng.choice(_GEN_TOPIC)]
        words += [rng.choice(_GEN_FILLER) for _ in range(rng.randint(3, 10))]
        rng.shuffle(words)
        yield Document(
            doc_id=f"gen-{config.seed}-{i}",
            text=" ".join(words),
            created_at=ts,
            lang="en",
            source=f"generated:{config.seed}",
        )


def open_stream(config: StreamSourceConfig,
                sleep: Callable[[float], None] | None = None) -> Iterator[StreamItem]:
    """Open a single-consumer pull stream of Documents (and Rejections).

    file_replay paces emission by created_at deltas divided by `speedup`;
    speedup 0 disables pacing entirely.  Exhaustion ends the iterator.
    """
    config.validate()
    if config.kind == "file_replay":
        import time as _time
        return _file_replay(config, sleep or _time.sleep)
    return _generated(config)


@dataclass
class IngestStats:
    accepted: int = 0
    rejected: int = 0
    duplicates: int = 0

    @property
    def total(self) -> int:
        return self.accepted + self.rejected + self.duplicates

    def as_dict(self) -> dict:
        return {"accepted": self.accepted, "rejected": self.rejected,
                "duplicates": self.duplicates}


def ingest_batch(stream: Iterable[StreamItem],
                 sink: Callable[[Document], None],
                 seen_ids: set[str] | None = None,
                 rejection_log: list[Rejection] | None = None) -> IngestStats:
    """Drain a stream into `sink`, deduplicating by doc_id.

    `seen_ids` carries dedup state across batches within one run; pass the
    same set to every call.  The sink is invoked synchronously, so a
    blocking sink provides natural backpressure.
    """
    if seen_ids is None:
        seen_ids = set()
    stats = IngestStats()
    for item in stream:
        if isinstance(item, Rejection):
            stats.rejected += 1
            if rejection_log is not None:
                rejection_log.append(item)
            continue
        if item.doc_id in seen_ids:
            stats.duplicates += 1
            continue
        seen_ids.add(item.doc_id)
        sink(item)
        stats.accepted += 1
    return stats
