"""Shared test oracles and random generators.

Everything here is intentionally naive and independent of the library's
implementation paths: the oracles are the reference the optimized code is
checked against, so they must stay brute-force.
"""
from __future__ import annotations

import random
from collections import Counter
from datetime import datetime, timedelta, timezone

from labelloop.filterlang import And, Keyword, Not, Or

UTC = timezone.utc
EPOCH = datetime(2021, 6, 1, tzinfo=UTC)

ALPHABET = ("a", "b", "c", "d", "e")


# ---------------------------------------------------------------------------
# query-language oracle

def gen_query(rng: random.Random, max_depth: int = 6, allow_not: bool = True,
              multi_token: bool = True):
    """Random query tree over the 5-letter alphabet."""
    if max_depth <= 0 or rng.random() < 0.35:
        if multi_token and rng.random() < 0.25:
            n = rng.randint(2, 3)
            return Keyword(tuple(rng.choice(ALPHABET) for _ in range(n)))
        return Keyword((rng.choice(ALPHABET),))
    roll = rng.random()
    if allow_not and roll < 0.2:
        return Not(gen_query(rng, max_depth - 1, allow_not, multi_token))
    kids = tuple(gen_query(rng, max_depth - 1, allow_not, multi_token)
                 for _ in range(rng.randint(2, 3)))
    return And(kids) if roll < 0.6 else Or(kids)


def gen_tokens(rng: random.Random, max_len: int = 12) -> tuple[str, ...]:
    return tuple(rng.choice(ALPHABET) for _ in range(rng.randint(0, max_len)))


def oracle_contains(phrase: tuple[str, ...], tokens: tuple[str, ...]) -> bool:
    """Phrase containment via sentinel-joined substring search."""
    hay = "\x00" + "\x00".join(tokens) + "\x00"
    needle = "\x00" + "\x00".join(phrase) + "\x00"
    return needle in hay


def oracle_matches(query, tokens: tuple[str, ...]) -> bool:
    """Evaluate by enumerating keyword truth values, then folding the tree."""
    truths: dict[int, bool] = {}

    def assign(node):
        if isinstance(node, Keyword):
            truths[id(node)] = oracle_contains(node.phrase, tokens)
        elif isinstance(node, Not):
            assign(node.child)
        else:
            for c in node.children:
                assign(c)

    assign(query)

    def fold(node) -> bool:
        if isinstance(node, Keyword):
            return truths[id(node)]
        if isinstance(node, Not):
            return not fold(node.child)
        vals = [fold(c) for c in node.children]
        return all(vals) if isinstance(node, And) else any(vals)

    return fold(query)


# ---------------------------------------------------------------------------
# priority-queue reference implementation

class NaiveLabelQueue:
    """List-based replay of the eviction/serve/complete rules, O(n) everything."""

    def __init__(self, capacity, alpha, halflife, consensus_k, lease_duration):
        self.capacity = capacity
        self.alpha = alpha
        self.halflife = halflife
        self.k = consensus_k
        self.lease_duration = lease_duration
        self.entries = []  # dicts in arrival order
        self._seq = 0

    def _score(self, uncertainty, created_at, now):
        age = max(0.0, (now - created_at).total_seconds())
        return self.alpha * uncertainty + (1 - self.alpha) * 2.0 ** (-age / self.halflife)

    def offer(self, doc_id, created_at, uncertainty, now):
        if any(e["doc_id"] == doc_id for e in self.entries):
            return ("rejected", None)
        entry = {
            "doc_id": doc_id, "created_at": created_at, "uncertainty": uncertainty,
            "enqueue_time": now, "priority": self._score(uncertainty, created_at, now),
            "labels": 0, "assigned": set(), "completed": set(), "leases": {},
            "seq": self._seq,
        }
        self._seq += 1
        if len(self.entries) < self.capacity:
            self.entries.append(entry)
            return ("accepted", None)
        victim = min(self.entries, key=lambda e: (e["priority"], e["enqueue_time"], e["seq"]))
        if entry["priority"] > victim["priority"]:
            self.entries.remove(victim)
            self.entries.append(entry)
            return ("accepted_with_eviction", victim["doc_id"])
        return ("rejected", None)

    def _active_leases(self, e, now):
        return sum(1 for u, exp in e["leases"].items()
                   if exp > now and u not in e["completed"])

    def next_for_user(self, user, now):
        best = None
        best_key = None
        for e in self.entries:
            if user in e["assigned"]:
                continue
            if e["labels"] + self._active_leases(e, now) >= self.k:
                continue
            score = self._score(e["uncertainty"], e["created_at"], now)
            key = (-score, e["enqueue_time"], e["seq"])
            if best is None or key < best_key:
                best, best_key = e, key
        if best is None:
            return None
        best["assigned"].add(user)
        best["leases"][user] = now + timedelta(seconds=self.lease_duration)
        return best["doc_id"]

    def complete(self, user, doc_id, now):
        e = next((e for e in self.entries if e["doc_id"] == doc_id), None)
        if e is None:
            return ("no_lease", None)
        exp = e["leases"].get(user)
        if exp is None or exp <= now or user in e["completed"]:
            return ("no_lease", None)
        e["completed"].add(user)
        e["labels"] += 1
        del e["leases"][user]
        if e["labels"] >= self.k:
            self.entries.remove(e)
            return ("consensus_ready", doc_id)
        return ("pending", doc_id)

    def contents(self):
        return sorted(e["doc_id"] for e in self.entries)


def run_queue_sequence(seed: int, n_ops: int = 200, capacity: int | None = None):
    """Drive the real queue and the naive reference through one random op
    sequence, asserting identical observable behavior throughout."""
    import pytest

    from labelloop.labelqueue import LabelQueue, LeaseError, QueueConfig

    rng = random.Random(seed)
    config = QueueConfig(
        capacity=capacity or rng.randint(2, 16),
        alpha=rng.choice([0.0, 0.3, 0.5, 0.8, 1.0]),
        recency_halflife=rng.choice([600.0, 3600.0, 86400.0]),
        consensus_k=rng.randint(1, 3),
        lease_duration=600.0)
    real = LabelQueue(config)
    ref = NaiveLabelQueue(config.capacity, config.alpha, config.recency_halflife,
                          config.consensus_k, config.lease_duration)
    users = [f"u{i}" for i in range(5)]
    now = EPOCH
    next_doc = 0
    open_leases = []
    for _ in range(n_ops):
        now += timedelta(seconds=rng.randint(0, 400))
        roll = rng.random()
        if roll < 0.5:
            doc = f"d{next_doc}" if rng.random() < 0.9 \
                else f"d{rng.randint(0, max(next_doc, 1))}"
            next_doc += 1
            created = now - timedelta(seconds=rng.randint(0, 7200))
            u = round(rng.random(), 6)
            got = real.offer(doc, created, u, now)
            want = ref.offer(doc, created, u, now)
            assert (got.status, got.evicted) == want, f"offer diverged, seed {seed}"
        elif roll < 0.8:
            user = rng.choice(users)
            got = real.next_for_user(user, now)
            want = ref.next_for_user(user, now)
            assert got == want, f"next_for_user diverged, seed {seed}"
            if got is not None:
                open_leases.append((user, got))
        elif open_leases:
            user, doc = open_leases.pop(rng.randrange(len(open_leases)))
            try:
                got = real.complete(user, doc, now)
            except LeaseError:
                got = "no_lease"
            want = ref.complete(user, doc, now)[0]
            assert got == want, f"complete diverged, seed {seed}"
    assert real.doc_ids() == ref.contents()


# ---------------------------------------------------------------------------
# vote-count oracle

def oracle_majority(votes):
    """Strict-majority winner or None, by exhaustive candidate check."""
    total = len(votes)
    counts = Counter(votes)
    for candidate, support in counts.items():
        if 2 * support > total:
            return candidate, support, total
    return None, 0, total


# ---------------------------------------------------------------------------
# naive time-series oracles

def oracle_moving_average(values, window, at):
    acc = 0.0
    for i in range(at - window + 1, at + 1):
        acc += values[i] if i >= 0 else 0.0
    return acc / window


def oracle_ratio(pos, neg, eps):
    return (pos + eps) / (neg + eps)


def oracle_index(r_series):
    n = len(r_series)
    mu = sum(r_series) / n
    var = sum((r - mu) ** 2 for r in r_series) / n
    sigma = var ** 0.5
    if sigma < 1e-12:
        return [0.0] * n
    return [(r - mu) / sigma for r in r_series]
