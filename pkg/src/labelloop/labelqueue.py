"""Bounded priority queue of documents awaiting human labels.

Priority blends classifier uncertainty with recency (exponential decay of
document age), so annotators see items that are both informative and
current.  The queue is a pool, not durable state: on restart it is rebuilt
from stored documents that still lack a consensus label.

Eviction compares priorities cached at offer time; `reprioritize` is the
explicit refresh point after a model retrain.  All methods are linearizable
via one internal lock, so API handlers and pipeline workers may interleave
freely.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Callable, Optional


@dataclass
class QueueConfig:
    capacity: int = 1000
    alpha: float = 0.5  # uncertainty weight; 1-alpha weights recency
    recency_halflife: float = 86400.0  # seconds
    consensus_k: int = 3  # distinct labellers required per document
    lease_duration: float = 600.0  # seconds
    reprioritize_interval: float = 300.0  # cached-priority refresh cadence

    def validate(self) -> None:
        if self.capacity < 1:
            raise ValueError("capacity must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0,1]")
        if self.recency_halflife <= 0 or self.lease_duration <= 0:
            raise ValueError("durations must be positive")
        if self.consensus_k < 1:
            raise ValueError("consensus_k must be positive")
        if self.reprioritize_interval <= 0:
            raise ValueError("reprioritize_interval must be positive")


def priority_score(uncertainty: float, created_at: datetime, now: datetime,
                   config: QueueConfig) -> float:
    """alpha*uncertainty + (1-alpha)*2^(-age/halflife), clamped age >= 0."""
    age = max(0.0, (now - created_at).total_seconds())
    recency = 2.0 ** (-age / config.recency_halflife)
    return config.alpha * uncertainty + (1.0 - config.alpha) * recency


@dataclass
class QueueEntry:
    doc_id: str
    enqueue_time: datetime
    created_at: datetime
    uncertainty: float
    priority: float  # cached; recomputable via priority_score
    seq: int  # arrival order, final tie-breaker
    labels_received: int = 0
    users_assigned: set[str] = field(default_factory=set)
    users_completed: set[str] = field(default_factory=set)
    leases: dict[str, datetime] = field(default_factory=dict)

    def active_leases(self, now: datetime) -> int:
        return sum(1 for user, expiry in self.leases.items()
                   if expiry > now and user not in self.users_completed)


@dataclass(frozen=True)
class OfferResult:
    status: str  # accepted | rejected | accepted_with_eviction
    evicted: Optional[str] = None


class LeaseError(Exception):
    """Completion attempted without a live assignment lease."""


class LabelQueue:
    def __init__(self, config: QueueConfig | None = None):
        self.config = config or QueueConfig()
        self.config.validate()
        self._entries: dict[str, QueueEntry] = {}
        self._seq = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def offer(self, doc_id: str, created_at: datetime, uncertainty: float,
              now: datetime) -> OfferResult:
        """Admit a document, evicting the weakest entry if full."""
        with self._lock:
            if doc_id in self._entries:
                return OfferResult("rejected")
            prio = priority_score(uncertainty, created_at, now, self.config)
            entry = QueueEntry(doc_id=doc_id, enqueue_time=now,
                               created_at=created_at, uncertainty=uncertainty,
                               priority=prio, seq=self._seq)
            self._seq += 1
            if len(self._entries) < self.config.capacity:
                self._entries[doc_id] = entry
                return OfferResult("accepted")
            victim = min(self._entries.values(),
                         key=lambda e: (e.priority, e.enqueue_time, e.seq))
            if entry.priority > victim.priority:
                del self._entries[victim.doc_id]
                self._entries[doc_id] = entry
                return OfferResult("accepted_with_eviction", victim.doc_id)
            return OfferResult("rejected")

    def next_for_user(self, user_id: str, now: datetime) -> str | None:
        """Highest-priority entry this user may label, with a lease taken.

        Users already assigned a document (even on an expired lease) are
        never served it again; slots count live leases plus completed
        labels against consensus_k.
        """
        with self._lock:
            best: QueueEntry | None = None
            best_key = None
            for entry in self._entries.values():
                if user_id in entry.users_assigned:
                    continue
                if entry.labels_received + entry.active_leases(now) >= self.config.consensus_k:
                    continue
                score = priority_score(entry.uncertainty, entry.created_at,
                                       now, self.config)
                key = (-score, entry.enqueue_time, entry.seq)
                if best is None or key < best_key:
                    best, best_key = entry, key
            if best is None:
                return None
            best.users_assigned.add(user_id)
            best.leases[user_id] = now + timedelta(seconds=self.config.lease_duration)
            return best.doc_id

    def complete(self, user_id: str, doc_id: str, now: datetime) -> str:
        """Record a finished session; returns 'pending' or 'consensus_ready'."""
        with self._lock:
            entry = self._entries.get(doc_id)
            if entry is None:
                raise LeaseError(f"{doc_id} not in queue")
            expiry = entry.leases.get(user_id)
            if expiry is None or user_id in entry.users_completed:
                raise LeaseError(f"no lease for {user_id} on {doc_id}")
            if expiry <= now:
                raise LeaseError(f"lease expired for {user_id} on {doc_id}")
            entry.users_completed.add(user_id)
            entry.labels_received += 1
            del entry.leases[user_id]
            if entry.labels_received >= self.config.consensus_k:
                del self._entries[doc_id]
                return "consensus_ready"
            return "pending"

    def lease_valid(self, user_id: str, doc_id: str, now: datetime) -> bool:
        """True while the user's assignment lease on the document is live."""
        with self._lock:
            entry = self._entries.get(doc_id)
            if entry is None:
                return False
            expiry = entry.leases.get(user_id)
            return expiry is not None and expiry > now

    def discard(self, doc_id: str) -> bool:
        """Drop an entry whose consensus was resolved out of band."""
        with self._lock:
            return self._entries.pop(doc_id, None) is not None

    def reprioritize(self, now: datetime,
                     uncertainty_of: Callable[[str], float | None]) -> int:
        """Refresh uncertainties and cached priorities; returns count updated."""
        with self._lock:
            updated = 0
            for entry in self._entries.values():
                u = uncertainty_of(entry.doc_id)
                if u is not None:
                    entry.uncertainty = u
                entry.priority = priority_score(entry.uncertainty,
                                                entry.created_at, now,
                                                self.config)
                updated += 1
            return updated

    def snapshot(self, now: datetime) -> dict:
        """Admin view: size, priority spread, per-entry label progress."""
        with self._lock:
            entries = [{
                "doc_id": e.doc_id,
                "priority": priority_score(e.uncertainty, e.created_at, now,
                                           self.config),
                "uncertainty": e.uncertainty,
                "labels_received": e.labels_received,
                "in_flight": e.active_leases(now),
            } for e in sorted(self._entries.values(),
                              key=lambda e: (-e.priority, e.enqueue_time, e.seq))]
            priorities = [e["priority"] for e in entries]
            return {
                "size": len(entries),
                "capacity": self.config.capacity,
                "min_priority": min(priorities) if priorities else None,
                "max_priority": max(priorities) if priorities else None,
                "entries": entries,
            }

    def doc_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._entries)

    def progress(self, doc_id: str) -> tuple[int, set[str]] | None:
        """labels_received and completed users, for queue rebuild plumbing."""
        with self._lock:
            e = self._entries.get(doc_id)
            return (e.labels_received, set(e.users_completed)) if e else None

    def restore_progress(self, doc_id: str, users_completed: set[str]) -> None:
        """Reinstate completed-session history after a restart rebuild."""
        with self._lock:
            e = self._entries.get(doc_id)
            if e is None:
                return
            e.users_completed = set(users_completed)
            e.users_assigned |= set(users_completed)
            e.labels_received = len(e.users_completed)
            if e.labels_received >= self.config.consensus_k:
                del self._entries[doc_id]
