"""Injected time sources and the wire format for instants.

Timestamps are UTC with millisecond precision everywhere (in memory, in
session documents, over HTTP), so serialization round-trips are exact.
Replay uses a ticking clock to make whole runs byte-stable.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone
from typing import Protocol

_WIRE_FORMAT = "%Y-%m-%dT%H:%M:%S.%fZ"


def to_millis(dt: datetime) -> datetime:
    """Truncate to millisecond precision, forcing UTC."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    dt = dt.astimezone(timezone.utc)
    return dt.replace(microsecond=(dt.microsecond // 1000) * 1000)


def format_instant(dt: datetime) -> str:
    """Render as e.g. 2026-08-18T10:15:00.250Z (millisecond precision)."""
    dt = to_millis(dt)
    return f"{dt:%Y-%m-%dT%H:%M:%S}.{dt.microsecond // 1000:03d}Z"


def parse_instant(text: str) -> datetime:
    return datetime.strptime(text, _WIRE_FORMAT).replace(tzinfo=timezone.utc)


class Clock(Protocol):
    def now(self) -> datetime: ...


class SystemClock:
    """Wall clock, truncated to the millisecond grid."""

    def now(self) -> datetime:
        return to_millis(datetime.now(timezone.utc))


class TickingClock:
    """Deterministic clock: starts at a fixed instant, advances a fixed step
    per reading. Drives replay and tests."""

    DEFAULT_START = datetime(2000, 1, 1, tzinfo=timezone.utc)

    def __init__(self, start: datetime | None = None,
                 step: timedelta = timedelta(seconds=1)):
        self._next = to_millis(start if start is not None else self.DEFAULT_START)
        self._step = step

    def now(self) -> datetime:
        current = self._next
        self._next = to_millis(current + self._step)
        return current
