import numpy as np
import pytest

from fransonsim.montecarlo import CHANNELS, TimeTagStream
from fransonsim.tagio import (MAGIC, TagFileError, read_csv, read_qtt,
                              read_tags, write_csv, write_qtt)


def sample_streams():
    return {
        "A1": TimeTagStream("A1", np.array([0, 1070, 5350], dtype=np.uint64)),
        "A2": TimeTagStream("A2", np.array([2140], dtype=np.uint64)),
        "B1": TimeTagStream("B1", np.array([1070], dtype=np.uint64)),
        "B2": TimeTagStream("B2", np.array([], dtype=np.uint64)),
    }


def assert_streams_equal(a, b):
    assert set(a) == set(b)
    for c in a:
        assert np.array_equal(a[c].timestamps, b[c].timestamps)


class TestBinary:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "tags.qtt"
        write_qtt(path, sample_streams())
        assert_streams_equal(read_qtt(path), sample_streams())

    def test_deterministic_bytes(self, tmp_path):
        p1, p2 = tmp_path / "a.qtt", tmp_path / "b.qtt"
        write_qtt(p1, sample_streams())
        write_qtt(p2, sample_streams())
        assert p1.read_bytes() == p2.read_bytes()

    def test_missing_channels_read_back_empty(self, tmp_path):
        path = tmp_path / "tags.qtt"
        write_qtt(path, {"A1": sample_streams()["A1"]})
        back = read_qtt(path)
        assert len(back["A1"]) == 3
        assert len(back["B2"]) == 0

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.qtt"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(TagFileError):
            read_qtt(path)

    def test_truncated_record(self, tmp_path):
        path = tmp_path / "trunc.qtt"
        write_qtt(path, sample_streams())
        data = path.read_bytes()
        path.write_bytes(data[:-3])
        with pytest.raises(TagFileError):
            read_qtt(path)

    def test_bad_channel_count(self, tmp_path):
        path = tmp_path / "count.qtt"
        path.write_bytes(MAGIC + (9).to_bytes(4, "little"))
        with pytest.raises(TagFileError):
            read_qtt(path)

    def test_unknown_write_channel(self, tmp_path):
        bad = dict(sample_streams())
        stream = TimeTagStream("A1", np.array([1], dtype=np.uint64))
        bad["C9"] = stream
        with pytest.raises(TagFileError):
            write_qtt(tmp_path / "x.qtt", bad)


class TestCsv:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "tags.csv"
        write_csv(path, sample_streams())
        assert_streams_equal(read_csv(path), sample_streams())

    def test_time_ordered_rows(self, tmp_path):
        path = tmp_path / "tags.csv"
        write_csv(path, sample_streams())
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "channel,timestamp_ps"
        times = [int(l.split(",")[1]) for l in lines[1:]]
        assert times == sorted(times)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("chan,time\nA1,5\n")
        with pytest.raises(TagFileError):
            read_csv(path)

    def test_unknown_channel(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("channel,timestamp_ps\nC9,5\n")
        with pytest.raises(TagFileError):
            read_csv(path)

    def test_malformed_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("channel,timestamp_ps\nA1,5,9\n")
        with pytest.raises(TagFileError):
            read_csv(path)


class TestSniffing:
    def test_detects_both_formats(self, tmp_path):
        qtt, csvp = tmp_path / "t.qtt", tmp_path / "t.csv"
        write_qtt(qtt, sample_streams())
        write_csv(csvp, sample_streams())
        assert_streams_equal(read_tags(qtt), read_tags(csvp))
