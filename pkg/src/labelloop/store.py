"""Append-only event log with snapshots.

Everything durable flows through one log of length-prefixed JSON records:
stored documents, annotation rows, consensus labels, model publications and
closed trend buckets.  Rebuilding in-memory state from a replay of the log
reproduces the pre-shutdown state; the label queue is deliberately exempt
(it is a cache, repopulated from unresolved documents).

Appends are serialized by a lock and fsynced before returning, so a record
acknowledged to a caller survives a process kill.  A torn write at the tail
is detected on the next open and truncated away with a warning.
"""
from __future__ import annotations

import json
import logging
import os
import struct
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterator

from .clock import format_timestamp, parse_timestamp

log = logging.getLogger(__name__)

EVENT_KINDS = frozenset({
    "document_stored",
    "annotation_row",
    "consensus",
    "model_published",
    "bucket_closed",
})

_LEN = struct.Struct(">I")


@dataclass(frozen=True)
class EventRecord:
    sequence_no: int
    kind: str
    payload: dict
    written_at: datetime


class EventLog:
    """Single-writer durable log; many concurrent readers of history."""

    def __init__(self, path: str | Path, fsync: bool = True):
        self.path = Path(path)
        self.fsync = fsync
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._next_seq = self._recover()
        self._fh = open(self.path, "ab")

    def _recover(self) -> int:
        """Scan the log, truncating a corrupt tail; returns next sequence."""
        if not self.path.exists():
            return 0
        good_end = 0
        next_seq = 0
        with open(self.path, "rb") as fh:
            data = fh.read()
        pos = 0
        while pos < len(data):
            if pos + _LEN.size > len(data):
                break
            (length,) = _LEN.unpack_from(data, pos)
            end = pos + _LEN.size + length
            if end > len(data):
                break
            try:
                obj = json.loads(data[pos + _LEN.size:end].decode("utf-8"))
                seq = obj["seq"]
                if obj["kind"] not in EVENT_KINDS or seq != next_seq:
                    break
            except (ValueError, KeyError, UnicodeDecodeError):
                break
            next_seq = seq + 1
            good_end = end
            pos = end
        if good_end < len(data):
            log.warning("event log %s: truncating %d corrupt trailing bytes "
                        "(%d records preserved)",
                        self.path, len(data) - good_end, next_seq)
            with open(self.path, "r+b") as fh:
                fh.truncate(good_end)
        return next_seq

    def append(self, kind: str, payload: dict,
               written_at: datetime) -> int:
        """Durably append one record; returns its sequence number."""
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind: {kind!r}")
        if not isinstance(payload, dict):
            raise ValueError("payload must be a JSON object")
        with self._lock:
            seq = self._next_seq
            body = json.dumps(
                {"seq": seq, "kind": kind, "at": format_timestamp(written_at),
                 "payload": payload},
                separators=(",", ":"), sort_keys=True).encode("utf-8")
            self._fh.write(_LEN.pack(len(body)))
            self._fh.write(body)
            self._fh.flush()
            if self.fsync:
                os.fsync(self._fh.fileno())
            self._next_seq = seq + 1
            return seq

    def replay(self, from_sequence: int = 0) -> Iterator[EventRecord]:
        """Records with sequence_no >= from_sequence, in order."""
        if from_sequence < 0:
            raise ValueError("from_sequence must be >= 0")
        with self._lock:
            self._fh.flush()
        with open(self.path, "rb") as fh:
            while True:
                header = fh.read(_LEN.size)
                if len(header) < _LEN.size:
                    return
                (length,) = _LEN.unpack(header)
                body = fh.read(length)
                if len(body) < length:
                    return  # torn tail; open() would have truncated it
                obj = json.loads(body.decode("utf-8"))
                if obj["seq"] >= from_sequence:
                    yield EventRecord(obj["seq"], obj["kind"], obj["payload"],
                                      parse_timestamp(obj["at"]))

    def __len__(self) -> int:
        with self._lock:
            return self._next_seq

    def close(self) -> None:
        with self._lock:
            self._fh.flush()
            if self.fsync:
                os.fsync(self._fh.fileno())
            self._fh.close()


# ---------------------------------------------------------------------------
# snapshots

def write_snapshot(directory: str | Path, state: dict, upto_seq: int) -> Path:
    """Versioned snapshot of derived state as of sequence `upto_seq`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"snapshot-{upto_seq:012d}.json"
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump({"upto_seq": upto_seq, "state": state}, fh, sort_keys=True)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    return path


def load_latest_snapshot(directory: str | Path) -> tuple[dict, int] | None:
    directory = Path(directory)
    if not directory.is_dir():
        return None
    candidates = sorted(directory.glob("snapshot-*.json"))
    if not candidates:
        return None
    with open(candidates[-1], encoding="utf-8") as fh:
        obj = json.load(fh)
    return obj["state"], obj["upto_seq"]
