"""Corpus and ground-truth ingestion.

Tweets arrive as JSON lines with fields ``text`` (required), ``ts``
(ISO-8601, required), ``loc`` and ``lang`` (optional). The event series
arrives as a ``date,count`` CSV. Both are bucketed into UTC calendar-day
ordinals inside a configured timeframe.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .errors import PipelineError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RawTweet:
    text: str
    timestamp: datetime
    location_tag: Optional[str] = None
    lang_hint: Optional[str] = None


@dataclass(frozen=True)
class Timeframe:
    """A run of ``days`` UTC calendar days starting at ``start``.

    Day ordinals are offsets in [0, days); the date<->ordinal mapping is
    total and invertible inside the frame.
    """

    start: date
    days: int

    def __post_init__(self):
        if self.days < 1:
            raise ValueError("timeframe needs at least one day")

    def ordinal_of(self, ts: datetime) -> Optional[int]:
        """The day ordinal of an instant, or None when outside the frame."""
        if ts.tzinfo is not None:
            ts = ts.astimezone(timezone.utc)
        offset = (ts.date() - self.start).days
        if 0 <= offset < self.days:
            return offset
        return None

    def date_of(self, ordinal: int) -> date:
        if not 0 <= ordinal < self.days:
            raise ValueError(f"day ordinal {ordinal} outside [0, {self.days})")
        return self.start + timedelta(days=ordinal)


@dataclass
class IngestSummary:
    """Line accounting for one pass over a corpus file."""

    read: int = 0
    yielded: int = 0
    skipped_parse: int = 0
    skipped_time: int = 0
    skipped_geo: int = 0

    def as_dict(self) -> dict:
        return {
            "read": self.read,
            "yielded": self.yielded,
            "skipped_parse": self.skipped_parse,
            "skipped_time": self.skipped_time,
            "skipped_geo": self.skipped_geo,
        }


def parse_timestamp(raw: str) -> datetime:
    """Parse an ISO-8601 instant; naive values are taken as UTC."""
    ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


class TweetReader:
    """Stream (day ordinal, RawTweet) pairs from a JSONL corpus file.

    Malformed lines are counted and skipped, never silently dropped;
    the per-category counts accumulate in ``summary`` as iteration
    proceeds. When ``geo_filter`` is given, a tweet passes if any filter
    entry is a case-insensitive substring of its location tag.
    """

    def __init__(
        self,
        path: Path,
        timeframe: Timeframe,
        geo_filter: Optional[frozenset[str]] = None,
    ):
        self.path = Path(path)
        self.timeframe = timeframe
        self.geo_filter = (
            frozenset(g.lower() for g in geo_filter) if geo_filter else None
        )
        self.summary = IngestSummary()
        if not self.path.is_file():
            raise PipelineError("ingest", f"cannot read corpus file {self.path}")

    def _parse_line(self, line: str) -> Optional[RawTweet]:
        try:
            record = json.loads(line)
            text = record["text"]
            ts = parse_timestamp(record["ts"])
            if not isinstance(text, str):
                return None
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            return None
        return RawTweet(
            text=text,
            timestamp=ts,
            location_tag=record.get("loc"),
            lang_hint=record.get("lang"),
        )

    def __iter__(self) -> Iterator[tuple[int, RawTweet]]:
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                self.summary.read += 1
                if not line.strip():
                    self.summary.skipped_parse += 1
                    continue
                tweet = self._parse_line(line)
                if tweet is None:
                    self.summary.skipped_parse += 1
                    continue
                day = self.timeframe.ordinal_of(tweet.timestamp)
                if day is None:
                    self.summary.skipped_time += 1
                    continue
                if self.geo_filter is not None:
                    tag = (tweet.location_tag or "").lower()
                    if not any(g in tag for g in self.geo_filter):
                        self.summary.skipped_geo += 1
                        continue
                self.summary.yielded += 1
                yield day, tweet


def load_tweets(
    path: Path,
    timeframe: Timeframe,
    geo_filter: Optional[frozenset[str]] = None,
) -> TweetReader:
    """Convenience constructor; iterate the result and read ``.summary``."""
    return TweetReader(path, timeframe, geo_filter)


def load_gsr(path: Path, timeframe: Timeframe) -> np.ndarray:
    """Load the daily event-count series as a dense length-n int vector.

    Dates absent from the file contribute 0. Duplicate dates and negative
    counts are fatal; dates outside the timeframe are skipped with a
    warning.
    """
    path = Path(path)
    if not path.is_file():
        raise PipelineError("ingest", f"cannot read event series file {path}")
    counts = np.zeros(timeframe.days, dtype=np.int64)
    seen: set[date] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["date", "count"]:
            raise PipelineError("ingest", f"{path}: expected 'date,count' header")
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise PipelineError("ingest", f"{path}: malformed row {row!r}")
            try:
                day = date.fromisoformat(row[0].strip())
                count = int(row[1])
            except ValueError as exc:
                raise PipelineError("ingest", f"{path}: {exc}") from exc
            if day in seen:
                raise PipelineError("ingest", f"{path}: duplicate date {day}")
            seen.add(day)
            if count < 0:
                raise PipelineError("ingest", f"{path}: negative count on {day}")
            offset = (day - timeframe.start).days
            if not 0 <= offset < timeframe.days:
                logger.warning("event series date %s outside timeframe, skipped", day)
                continue
            counts[offset] = count
    return counts


def write_gsr(counts: np.ndarray, timeframe: Timeframe, path: Path) -> None:
    """Write a dense event series as a date,count CSV (one row per day)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "count"])
        for ordinal, value in enumerate(counts):
            writer.writerow([timeframe.date_of(ordinal).isoformat(), int(value)])
