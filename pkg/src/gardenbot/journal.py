"""Append-only on-disk event log with checkpoints.

Binary framing per record: 4-byte big-endian payload length, 4-byte CRC32
of the payload, then the JSON payload itself. The file opens with a magic
string plus a version header record. A torn tail, a failed CRC, or a
sequence gap surfaces as CorruptLog carrying the last valid sequence
number, and recovery keeps everything up to that point.

Records are JSON objects {seq, t, type, data}; type "checkpoint" carries a
full engine state snapshot, everything else is a domain event that the
engine can fold forward from the latest checkpoint.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, BinaryIO, Iterator

from .errors import CorruptLog

MAGIC = b"GRDNLOG1"
VERSION = 1
_FRAME = struct.Struct(">II")           # payload length, CRC32


@dataclass(frozen=True)
class Record:
    seq: int
    t: str
    type: str
    data: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"seq": self.seq, "t": self.t, "type": self.type, "data": self.data}


def _encode(payload: dict[str, Any]) -> bytes:
    body = json.dumps(payload, separators=(",", ":"), sort_keys=True).encode()
    return _FRAME.pack(len(body), zlib.crc32(body)) + body


class JournalWriter:
    """Single-writer appender; creates the file with header on first use."""

    def __init__(self, path: str | Path, meta: dict[str, Any] | None = None) -> None:
        self.path = Path(path)
        self._seq = 0
        if self.path.exists() and self.path.stat().st_size > 0:
            header, records, corrupt = read_journal(self.path, recover=True)
            if corrupt is not None:
                raise corrupt
            self._seq = records[-1].seq if records else 0
            self._fh: BinaryIO = open(self.path, "ab")
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "wb")
            self._fh.write(MAGIC)
            self._fh.write(_encode({
                "version": VERSION,
                "meta": meta or {},
            }))
            self._fh.flush()

    @property
    def last_seq(self) -> int:
        return self._seq

    def append(self, type: str, t: str, data: dict[str, Any]) -> int:
        self._seq += 1
        self._fh.write(_encode({"seq": self._seq, "t": t, "type": type, "data": data}))
        self._fh.flush()
        return self._seq

    def sync(self) -> None:
        if not self._fh.closed:
            self._fh.flush()
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


def _read_frames(raw: bytes) -> Iterator[tuple[int, int, dict[str, Any]]]:
    """Yield (start, end, payload) per frame; raise ValueError at the first
    malformed frame, naming the bad offset."""
    off = len(MAGIC)
    total = len(raw)
    while off < total:
        if off + _FRAME.size > total:
            raise ValueError(f"truncated frame header at byte {off}")
        length, crc = _FRAME.unpack_from(raw, off)
        start = off + _FRAME.size
        end = start + length
        if end > total:
            raise ValueError(f"truncated payload at byte {off}")
        body = raw[start:end]
        if zlib.crc32(body) != crc:
            raise ValueError(f"CRC mismatch at byte {off}")
        try:
            payload = json.loads(body)
        except json.JSONDecodeError:
            raise ValueError(f"undecodable payload at byte {off}") from None
        yield off, end, payload
        off = end


def read_journal(
    path: str | Path, recover: bool = False
) -> tuple[dict[str, Any], list[Record], CorruptLog | None]:
    """Read header and records. With recover=False any damage raises
    CorruptLog; with recover=True the valid prefix is returned together
    with the error so callers can resume from the last good record."""
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        err = CorruptLog("not a journal file (bad magic)", last_good_id=0)
        if recover:
            return {}, [], err
        raise err

    header: dict[str, Any] = {}
    records: list[Record] = []
    corrupt: CorruptLog | None = None
    valid_bytes = len(MAGIC)
    try:
        for i, (off, end, payload) in enumerate(_read_frames(raw)):
            if i == 0:
                if payload.get("version") != VERSION:
                    raise ValueError(f"unsupported version {payload.get('version')!r}")
                header = payload
                valid_bytes = end
                continue
            seq = payload.get("seq")
            expected = records[-1].seq + 1 if records else 1
            if seq != expected:
                raise ValueError(f"sequence gap at byte {off}: {seq} != {expected}")
            records.append(Record(seq, payload["t"], payload["type"], payload["data"]))
            valid_bytes = end
    except ValueError as exc:
        last_good = records[-1].seq if records else 0
        corrupt = CorruptLog(str(exc), last_good_id=last_good, valid_bytes=valid_bytes)

    if corrupt is not None and not recover:
        raise corrupt
    return header, records, corrupt


def truncate_to_valid(path: str | Path, valid_bytes: int) -> None:
    """Drop a corrupt tail so appends can resume after the last good record."""
    with open(path, "r+b") as fh:
        fh.truncate(valid_bytes)


def export_jsonl(path: str | Path, out_path: str | Path) -> int:
    """Dump the journal to line-delimited JSON for debugging; returns the
    record count."""
    _, records, corrupt = read_journal(path, recover=True)
    with open(out_path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
    if corrupt is not None:
        raise corrupt
    return len(records)
