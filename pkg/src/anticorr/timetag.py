"""Canonical multi-channel time-tag streams and their binary container.

CTAG container layout (everything little-endian):

    magic    4 bytes  b"CTAG"
    version  u16      currently 1
    nchan    u8       number of channels (3)
    mlen     u32      metadata byte length
    meta     mlen bytes of UTF-8 JSON (run provenance: seeds, configs, duration)
    body     repeated 9-byte records: channel u8, timestamp f64 seconds

Body records are sorted by (timestamp, channel), so each per-channel
subsequence is time-sorted as well and a reader can stream coincidence
analysis in one pass.
Reading rejects bad magic, unknown versions, truncated bodies and ordering
violations with distinct exception types.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"CTAG"
FORMAT_VERSION = 1
N_CHANNELS = 3
CHANNEL_NAMES = ("D0", "D1", "D2")

_HEADER = struct.Struct("<4sHBI")
_RECORD_DTYPE = np.dtype([("channel", "u1"), ("timestamp", "<f8")])


class CTAGError(Exception):
    """Malformed or unreadable CTAG data."""


class BadMagicError(CTAGError):
    pass


class UnsupportedVersionError(CTAGError):
    pass


class TruncatedStreamError(CTAGError):
    pass


class StreamOrderingError(CTAGError):
    pass


class CorruptRecordError(CTAGError):
    pass


@dataclass
class EventStreams:
    """Three sorted per-channel timestamp arrays (D0, D1, D2) plus run metadata."""

    channels: tuple[np.ndarray, np.ndarray, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.channels) != N_CHANNELS:
            raise ValueError(f"expected {N_CHANNELS} channels, got {len(self.channels)}")
        self.channels = tuple(np.asarray(ch, dtype=np.float64) for ch in self.channels)
        self.validate()

    def validate(self) -> None:
        for name, ch in zip(CHANNEL_NAMES, self.channels):
            if ch.ndim != 1:
                raise ValueError(f"{name}: timestamps must be one-dimensional")
            if ch.size == 0:
                continue
            if not np.all(np.isfinite(ch)):
                raise ValueError(f"{name}: timestamps must be finite")
            if ch[0] < 0:
                raise ValueError(f"{name}: timestamps must be nonnegative")
            if np.any(np.diff(ch) < 0):
                raise ValueError(f"{name}: timestamps must be sorted")

    @property
    def d0(self) -> np.ndarray:
        return self.channels[0]

    @property
    def d1(self) -> np.ndarray:
        return self.channels[1]

    @property
    def d2(self) -> np.ndarray:
        return self.channels[2]

    def counts(self) -> tuple[int, int, int]:
        return tuple(int(ch.size) for ch in self.channels)

    def total(self) -> int:
        return sum(self.counts())

    def equals(self, other: "EventStreams") -> bool:
        return self.metadata == other.metadata and all(
            a.size == b.size and bool(np.all(a == b))
            for a, b in zip(self.channels, other.channels)
        )


def _merged_records(streams: EventStreams) -> np.ndarray:
    total = streams.total()
    rec = np.empty(total, dtype=_RECORD_DTYPE)
    codes = np.concatenate(
        [np.full(ch.size, i, dtype=np.uint8) for i, ch in enumerate(streams.channels)]
    )
    times = np.concatenate(streams.channels)
    order = np.lexsort((codes, times))  # primary key time, ties by channel
    rec["channel"] = codes[order]
    rec["timestamp"] = times[order]
    return rec


def encode_stream(streams: EventStreams) -> bytes:
    """Serialize to CTAG bytes; invariant violations are refused before writing."""
    streams.validate()
    meta = json.dumps(streams.metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, N_CHANNELS, len(meta))
    body = _merged_records(streams).tobytes()
    return header + meta + body


def write_stream(streams: EventStreams, destination) -> bytes:
    """Write CTAG bytes to a path or binary file object; returns the bytes."""
    payload = encode_stream(streams)
    if hasattr(destination, "write"):
        destination.write(payload)
    else:
        Path(destination).write_bytes(payload)
    return payload


def _as_bytes(source) -> bytes:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    if hasattr(source, "read"):
        return source.read()
    return Path(source).read_bytes()


def read_stream(source) -> EventStreams:
    """Parse CTAG bytes (path, file object, or bytes) back into EventStreams."""
    raw = _as_bytes(source)
    if len(raw) < _HEADER.size:
        raise TruncatedStreamError("file shorter than the fixed header")
    magic, version, nchan, mlen = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported format version {version}")
    if nchan != N_CHANNELS:
        raise UnsupportedVersionError(f"unsupported channel count {nchan}")
    meta_end = _HEADER.size + mlen
    if len(raw) < meta_end:
        raise TruncatedStreamError("metadata block truncated")
    try:
        metadata = json.loads(raw[_HEADER.size : meta_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptRecordError(f"metadata is not valid JSON: {exc}") from exc

    body = raw[meta_end:]
    if len(body) % _RECORD_DTYPE.itemsize != 0:
        raise TruncatedStreamError("body length is not a whole number of records")
    rec = np.frombuffer(body, dtype=_RECORD_DTYPE)
    codes = rec["channel"]
    times = rec["timestamp"]
    if codes.size:
        if int(codes.max()) >= N_CHANNELS:
            raise CorruptRecordError(f"record channel out of range (max {int(codes.max())})")
        if np.any(np.diff(times) < 0):
            raise StreamOrderingError("body records are not in global time order")
    channels = tuple(np.ascontiguousarray(times[codes == i]) for i in range(N_CHANNELS))
    try:
        return EventStreams(channels, metadata)
    except ValueError as exc:
        raise CorruptRecordError(str(exc)) from exc


def export_csv(streams: EventStreams, destination) -> int:
    """Plain-text export, one ``channel,timestamp`` row per record in global order."""
    rec = _merged_records(streams)
    lines = ["channel,timestamp\n"]
    lines.extend(
        f"{c},{t!r}\n" for c, t in zip(rec["channel"].tolist(), rec["timestamp"].tolist())
    )
    text = "".join(lines)
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        Path(destination).write_text(text)
    return int(rec.size)
