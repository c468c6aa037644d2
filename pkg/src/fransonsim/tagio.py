"""Tag-file serialization.

Binary "QTT1" layout (little-endian):
    8 bytes  magic  b"QTTAGS01"
    u32      channel count
    records  { u8 channel index, u64 timestamp_ps } until EOF
Records are time-ordered (ties broken by channel index), so a reader can
stream them.  Channel indices: A1=0, A2=1, B1=2, B2=3.

CSV alternative: header ``channel,timestamp_ps``, one record per row,
same ordering.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .montecarlo import CHANNELS, TimeTagStream

MAGIC = b"QTTAGS01"
CHANNEL_INDEX = {name: i for i, name in enumerate(CHANNELS)}

_RECORD = np.dtype([("channel", "u1"), ("timestamp_ps", "<u8")])


class TagFileError(ValueError):
    pass


def _merge_records(streams: dict) -> np.ndarray:
    unknown = set(streams) - set(CHANNELS)
    if unknown:
        raise TagFileError(f"unknown channels: {sorted(unknown)}")
    total = sum(len(s.timestamps) for s in streams.values())
    rec = np.empty(total, dtype=_RECORD)
    pos = 0
    for name in CHANNELS:
        s = streams.get(name)
        if s is None:
            continue
        n = len(s.timestamps)
        rec["channel"][pos:pos + n] = CHANNEL_INDEX[name]
        rec["timestamp_ps"][pos:pos + n] = s.timestamps
        pos += n
    order = np.lexsort((rec["channel"], rec["timestamp_ps"]))
    return rec[order]


def _split_records(rec: np.ndarray, n_channels: int) -> dict:
    if rec.size and rec["channel"].max() >= n_channels:
        raise TagFileError("record channel index out of declared range")
    streams = {}
    for name in CHANNELS[:n_channels]:
        mask = rec["channel"] == CHANNEL_INDEX[name]
        ts = np.ascontiguousarray(rec["timestamp_ps"][mask])
        streams[name] = TimeTagStream(name, ts)
    return streams


def write_qtt(path, streams: dict):
    rec = _merge_records(streams)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(CHANNELS)))
        f.write(rec.tobytes())


def read_qtt(path) -> dict:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:8] != MAGIC:
        raise TagFileError(f"{path}: not a QTT1 tag file")
    (n_channels,) = struct.unpack("<I", data[8:12])
    if not 1 <= n_channels <= len(CHANNELS):
        raise TagFileError(f"{path}: unsupported channel count {n_channels}")
    body = data[12:]
    if len(body) % _RECORD.itemsize:
        raise TagFileError(f"{path}: truncated record")
    rec = np.frombuffer(body, dtype=_RECORD)
    return _split_records(rec, n_channels)


def write_csv(path, streams: dict):
    rec = _merge_records(streams)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["channel", "timestamp_ps"])
        for channel, ts in zip(rec["channel"], rec["timestamp_ps"]):
            w.writerow([CHANNELS[channel], int(ts)])


def read_csv(path) -> dict:
    per = {name: [] for name in CHANNELS}
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r, None)
        if header != ["channel", "timestamp_ps"]:
            raise TagFileError(f"{path}: bad CSV header {header}")
        for row in r:
            if len(row) != 2:
                raise TagFileError(f"{path}: malformed row {row}")
            name, ts = row[0], row[1]
            if name not in per:
                raise TagFileError(f"{path}: unknown channel {name!r}")
            per[name].append(int(ts))
    return {name: TimeTagStream(name, np.array(vals, dtype=np.uint64))
            for name, vals in per.items()}


def read_tags(path) -> dict:
    """Format sniffing: QTT1 by magic, otherwise CSV."""
    p = Path(path)
    with open(p, "rb") as f:
        head = f.read(8)
    if head == MAGIC:
        return read_qtt(p)
    return read_csv(p)
