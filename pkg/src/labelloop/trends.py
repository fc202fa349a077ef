"""Time-bucketed class counts, moving averages, and the sentiment index.

Documents are counted into 1-hour buckets by their own created_at (arrival
order is irrelevant).  Moving averages are trailing fixed-width windows:
buckets before the start of data count as zero and stay in the denominator.
The index standardizes the positive:negative ratio r over the queried
window: (r - mean) / population-std, zero for constant series.
"""
from __future__ import annotations

import csv
import io
import math
import threading
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Sequence

from .annotations import TREND_CLASSES
from .clock import UTC, format_timestamp

BUCKET_SECONDS = 3600
MA_SHORT_BUCKETS = 24   # 1 day of hourly buckets
MA_LONG_BUCKETS = 168   # 7 days


@dataclass
class IndexParams:
    ma_window_short: int = MA_SHORT_BUCKETS  # buckets
    ma_window_long: int = MA_LONG_BUCKETS  # buckets
    epsilon: float = 1.0  # ratio smoothing, guards zero denominators

    def validate(self) -> None:
        if self.ma_window_short < 1 or self.ma_window_long < 1:
            raise ValueError("windows must be positive bucket counts")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def bucket_index(ts: datetime) -> int:
    """Hour bucket of a timestamp; boundary instants go to the later bucket."""
    return int(ts.timestamp()) // BUCKET_SECONDS


def bucket_start(index: int) -> datetime:
    return datetime.fromtimestamp(index * BUCKET_SECONDS, tz=UTC)


@dataclass
class TrendPoint:
    bucket_start: datetime
    counts: dict[str, int]
    ma_counts: dict[str, float]
    r: float
    index: float

    def to_json_dict(self) -> dict:
        return {
            "bucket_start": format_timestamp(self.bucket_start),
            "counts": self.counts,
            "ma_1d": self.ma_counts,
            "r": self.r,
            "index": self.index,
        }


def bucket_counts(predictions: Iterable[tuple[datetime, str]],
                  bucket: datetime,
                  classes: Sequence[str] = TREND_CLASSES) -> dict[str, int]:
    """Counts per class for predictions falling in [bucket, bucket+1h)."""
    target = bucket_index(bucket)
    counts = {c: 0 for c in classes}
    for created_at, label in predictions:
        if bucket_index(created_at) == target and label in counts:
            counts[label] += 1
    return counts


def moving_average(values: Sequence[float], window: int, at: int) -> float:
    """Trailing mean of `window` entries ending at index `at`, zero-padded."""
    lo = at - window + 1
    acc = math.fsum(values[max(lo, 0):at + 1])
    return acc / window


def sentiment_ratio(pos_ma: float, neg_ma: float, epsilon: float = 1.0) -> float:
    """Smoothed positive:negative ratio; equals 1 when both sides are empty."""
    return (pos_ma + epsilon) / (neg_ma + epsilon)


def sentiment_index(r_series: Sequence[float]) -> list[float]:
    """(r - mean) / population std over the rendered window; 0 if constant."""
    n = len(r_series)
    if n == 0:
        return []
    mu = math.fsum(r_series) / n
    sigma = math.sqrt(math.fsum((r - mu) ** 2 for r in r_series) / n)
    if sigma < 1e-12:
        return [0.0] * n
    return [(r - mu) / sigma for r in r_series]


class TrendStore:
    """Per-project accumulation of hourly class counts.

    Single-writer (the pipeline funnel); queries take the lock briefly to
    copy a consistent snapshot.
    """

    def __init__(self, classes: Sequence[str] = TREND_CLASSES):
        self.classes = tuple(classes)
        self._counts: dict[int, dict[str, int]] = {}
        self._lock = threading.Lock()
        self.late_documents = 0

    def add(self, created_at: datetime, label: str) -> None:
        if label not in self.classes:
            return
        b = bucket_index(created_at)
        with self._lock:
            row = self._counts.setdefault(b, {c: 0 for c in self.classes})
            row[label] += 1

    def clear(self) -> None:
        with self._lock:
            self._counts.clear()

    def set_bucket(self, bucket_ts: datetime, counts: dict[str, int]) -> None:
        """Authoritative counts for one bucket (replay of a closed bucket)."""
        b = bucket_index(bucket_ts)
        with self._lock:
            row = {c: 0 for c in self.classes}
            row.update({c: int(n) for c, n in counts.items() if c in row})
            self._counts[b] = row

    def total_counted(self) -> int:
        with self._lock:
            return sum(sum(row.values()) for row in self._counts.values())

    def counts_snapshot(self) -> dict[int, dict[str, int]]:
        with self._lock:
            return {b: dict(row) for b, row in self._counts.items()}

    def bucket_range(self) -> tuple[int, int] | None:
        with self._lock:
            if not self._counts:
                return None
            return min(self._counts), max(self._counts)


def trend_query(store: TrendStore, from_ts: datetime, to_ts: datetime,
                params: IndexParams | None = None) -> list[TrendPoint]:
    """TrendPoints for buckets starting in [from_ts, to_ts).

    Moving averages look back across the window edge into earlier data;
    the index is standardized over exactly the returned buckets.
    """
    params = params or IndexParams()
    params.validate()
    if from_ts >= to_ts:
        raise ValueError("from must be before to")
    counts = store.counts_snapshot()
    # whole buckets only: first starts at or after from_ts, last ends by to_ts
    first = math.ceil(from_ts.timestamp() / BUCKET_SECONDS)
    last = math.floor(to_ts.timestamp() / BUCKET_SECONDS) - 1
    if last < first:
        return []

    zeros = {c: 0 for c in store.classes}
    lookback = max(params.ma_window_short, params.ma_window_long)
    series_start = first - lookback + 1

    def value(b: int, cls: str) -> float:
        return counts.get(b, zeros).get(cls, 0)

    history = {c: [value(b, c) for b in range(series_start, last + 1)]
               for c in store.classes}

    points: list[TrendPoint] = []
    r_series: list[float] = []
    for b in range(first, last + 1):
        at = b - series_start
        ma_short = {c: moving_average(history[c], params.ma_window_short, at)
                    for c in store.classes}
        pos_long = moving_average(history.get("positive", []), params.ma_window_long, at) \
            if "positive" in history else 0.0
        neg_long = moving_average(history.get("negative", []), params.ma_window_long, at) \
            if "negative" in history else 0.0
        r = sentiment_ratio(pos_long, neg_long, params.epsilon)
        r_series.append(r)
        points.append(TrendPoint(
            bucket_start=bucket_start(b),
            counts={c: int(value(b, c)) for c in store.classes},
            ma_counts=ma_short,
            r=r,
            index=0.0,
        ))
    for point, idx in zip(points, sentiment_index(r_series)):
        point.index = idx
    return points


def trends_to_csv(points: Iterable[TrendPoint],
                  classes: Sequence[str] = TREND_CLASSES) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = (["bucket_start"]
              + [f"count_{c}" for c in classes]
              + [f"ma_1d_{c}" for c in classes]
              + ["r", "index"])
    writer.writerow(header)
    for p in points:
        writer.writerow(
            [format_timestamp(p.bucket_start)]
            + [p.counts.get(c, 0) for c in classes]
            + [repr(p.ma_counts.get(c, 0.0)) for c in classes]
            + [repr(p.r), repr(p.index)])
    return buf.getvalue()
