"""Injectable clocks.

Every time-dependent component (queue leases, recency decay, trend buckets)
reads time through one of these objects so tests and replay runs can drive
time deterministically.
"""
from __future__ import annotations

import threading
import time
from datetime import datetime, timedelta, timezone

UTC = timezone.utc


def utc_now() -> datetime:
    return datetime.now(tz=UTC)


class SystemClock:
    """Wall clock; `sleep` really sleeps."""

    def now(self) -> datetime:
        return utc_now()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class SimulatedClock:
    """Manually advanced clock; `sleep` advances simulated time instantly."""

    def __init__(self, start: datetime | None = None):
        self._now = start or datetime(2020, 1, 1, tzinfo=UTC)
        self._lock = threading.Lock()

    def now(self) -> datetime:
        with self._lock:
            return self._now

    def sleep(self, seconds: float) -> None:
        self.advance(seconds)

    def advance(self, seconds: float) -> datetime:
        with self._lock:
            self._now += timedelta(seconds=seconds)
            return self._now

    def set(self, instant: datetime) -> None:
        # never move backwards: out-of-order document timestamps must not
        # rewind lease and enqueue bookkeeping
        with self._lock:
            if instant > self._now:
                self._now = instant


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp, tolerating a trailing 'Z'."""
    if value.endswith("Z"):
        value = value[:-1] + "+00:00"
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=UTC)
    return dt.astimezone(UTC)


def format_timestamp(dt: datetime) -> str:
    """ISO-8601 with millisecond precision and Z suffix."""
    dt = dt.astimezone(UTC)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"
