"""Corpus/event-series ingestion tests."""

import json
from datetime import date, datetime, timezone

import numpy as np
import pytest

from signalmerge.errors import PipelineError
from signalmerge.ingest import (
    Timeframe,
    load_gsr,
    load_tweets,
    parse_timestamp,
    write_gsr,
)

START = date(2021, 3, 1)


def write_corpus(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record if isinstance(record, str) else json.dumps(record))
            fh.write("\n")


def record(day_offset, text="hello world", hour=10, **extra):
    ts = f"2021-03-{1 + day_offset:02d}T{hour:02d}:00:00Z"
    return {"text": text, "ts": ts, **extra}


class TestTimeframe:
    def test_ordinal_mapping_is_invertible(self):
        tf = Timeframe(START, 5)
        for ordinal in range(5):
            day = tf.date_of(ordinal)
            ts = datetime(day.year, day.month, day.day, 23, 59, tzinfo=timezone.utc)
            assert tf.ordinal_of(ts) == ordinal

    def test_outside_frame(self):
        tf = Timeframe(START, 3)
        before = datetime(2021, 2, 28, 23, 59, tzinfo=timezone.utc)
        after = datetime(2021, 3, 4, 0, 0, tzinfo=timezone.utc)
        assert tf.ordinal_of(before) is None
        assert tf.ordinal_of(after) is None

    def test_utc_day_boundary(self):
        tf = Timeframe(START, 3)
        # 2021-03-01T23:30 in +10:00 is 13:30 UTC the same day
        ts = parse_timestamp("2021-03-01T23:30:00+10:00")
        assert tf.ordinal_of(ts) == 0
        # 2021-03-01T05:00 in -07:00 is 12:00 UTC the same day
        ts = parse_timestamp("2021-03-01T05:00:00-07:00")
        assert tf.ordinal_of(ts) == 0


class TestLoadTweets:
    def test_geo_filter_match(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_corpus(path, [record(0, loc="Melbourne, AU")])
        reader = load_tweets(path, Timeframe(START, 3), frozenset({"melbourne"}))
        assert len(list(reader)) == 1

    def test_geo_filter_rejects(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_corpus(path, [record(0, loc="Sydney"), record(0)])
        reader = load_tweets(path, Timeframe(START, 3), frozenset({"melbourne"}))
        assert list(reader) == []
        assert reader.summary.skipped_geo == 2

    def test_boundary_exclusion(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_corpus(path, [{"text": "early", "ts": "2021-02-28T23:59:59Z"}])
        reader = load_tweets(path, Timeframe(START, 3))
        assert list(reader) == []
        assert reader.summary.skipped_time == 1

    def test_malformed_lines_counted(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        records = [record(i % 3) for i in range(8)]
        records.insert(2, "{not json")
        records.insert(5, json.dumps({"text": "missing ts"}))
        write_corpus(path, records)
        reader = load_tweets(path, Timeframe(START, 3))
        yielded = list(reader)
        assert len(yielded) == 8
        assert reader.summary.read == 10
        assert reader.summary.skipped_parse == 2

    def test_accounting_identity(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        records = [
            record(0, loc="melbourne"),
            record(1, loc="perth"),
            {"text": "out of frame", "ts": "2021-04-01T00:00:00Z", "loc": "melbourne"},
            "garbage line",
            record(2, loc="Melbourne CBD"),
        ]
        write_corpus(path, records)
        reader = load_tweets(path, Timeframe(START, 3), frozenset({"melbourne"}))
        list(reader)
        s = reader.summary
        assert s.yielded + s.skipped_parse + s.skipped_geo + s.skipped_time == s.read
        assert (s.yielded, s.skipped_parse, s.skipped_geo, s.skipped_time) == (2, 1, 1, 1)

    def test_missing_file_fatal(self, tmp_path):
        with pytest.raises(PipelineError):
            load_tweets(tmp_path / "nope.jsonl", Timeframe(START, 3))

    def test_day_ordinals(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_corpus(path, [record(2), record(0)])
        days = [day for day, _ in load_tweets(path, Timeframe(START, 3))]
        assert days == [2, 0]


class TestLoadGsr:
    def test_densification(self, tmp_path):
        path = tmp_path / "gsr.csv"
        path.write_text("date,count\n2021-03-01,2\n2021-03-04,1\n")
        gsr = load_gsr(path, Timeframe(START, 5))
        assert gsr.tolist() == [2, 0, 0, 1, 0]

    def test_empty_file_all_zero(self, tmp_path):
        path = tmp_path / "gsr.csv"
        path.write_text("date,count\n")
        assert load_gsr(path, Timeframe(START, 3)).tolist() == [0, 0, 0]

    def test_duplicate_date_fatal(self, tmp_path):
        path = tmp_path / "gsr.csv"
        path.write_text("date,count\n2021-03-01,2\n2021-03-01,3\n")
        with pytest.raises(PipelineError):
            load_gsr(path, Timeframe(START, 3))

    def test_negative_count_fatal(self, tmp_path):
        path = tmp_path / "gsr.csv"
        path.write_text("date,count\n2021-03-01,-1\n")
        with pytest.raises(PipelineError):
            load_gsr(path, Timeframe(START, 3))

    def test_outside_date_skipped_with_warning(self, tmp_path, caplog):
        path = tmp_path / "gsr.csv"
        path.write_text("date,count\n2021-01-01,4\n2021-03-02,1\n")
        with caplog.at_level("WARNING"):
            gsr = load_gsr(path, Timeframe(START, 3))
        assert gsr.tolist() == [0, 1, 0]
        assert any("outside timeframe" in r.message for r in caplog.records)

    def test_permutation_invariance(self, tmp_path):
        rows = ["2021-03-02,1", "2021-03-01,5", "2021-03-03,2"]
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        a.write_text("date,count\n" + "\n".join(rows) + "\n")
        b.write_text("date,count\n" + "\n".join(reversed(rows)) + "\n")
        tf = Timeframe(START, 3)
        assert load_gsr(a, tf).tolist() == load_gsr(b, tf).tolist()

    def test_header_required(self, tmp_path):
        path = tmp_path / "gsr.csv"
        path.write_text("2021-03-01,2\n")
        with pytest.raises(PipelineError):
            load_gsr(path, Timeframe(START, 3))

    def test_write_read_roundtrip(self, tmp_path):
        tf = Timeframe(START, 4)
        gsr = np.array([0, 3, 0, 7])
        path = tmp_path / "gsr.csv"
        write_gsr(gsr, tf, path)
        assert load_gsr(path, tf).tolist() == gsr.tolist()
