"""Append-only journal: framing, corruption detection, and recovery.

The fuzz tests cut and flip bytes at random offsets and require that the
reader always returns the longest valid prefix and an accurate truncation
point.
"""

from __future__ import annotations

import json
import random

import pytest

from gardenbot.errors import CorruptLog
from gardenbot.journal import (
    MAGIC,
    JournalWriter,
    export_jsonl,
    read_journal,
    truncate_to_valid,
)


def write_sample(path, n=20, meta=None):
    w = JournalWriter(path, meta or {"purpose": "test"})
    for i in range(n):
        seq = w.append("submit", f"2025-04-01T00:00:{i:02d}", {"i": i, "tag": "x" * (i % 7)})
        assert seq == i + 1
    w.close()


def test_round_trip(tmp_path):
    path = tmp_path / "log.bin"
    write_sample(path, n=20)
    header, records, corrupt = read_journal(path)
    assert corrupt is None
    assert header["version"] == 1
    assert header["meta"]["purpose"] == "test"
    assert [r.seq for r in records] == list(range(1, 21))
    assert records[7].data == {"i": 7, "tag": ""}
    assert records[8].data == {"i": 8, "tag": "x"}
    assert records[7].type == "submit"


def test_magic_is_checked(tmp_path):
    path = tmp_path / "log.bin"
    path.write_bytes(b"NOTMYLOG" + b"\x00" * 64)
    with pytest.raises(CorruptLog):
        read_journal(path)


def test_reopen_resumes_sequence(tmp_path):
    path = tmp_path / "log.bin"
    write_sample(path, n=5)
    w = JournalWriter(path)
    assert w.append("submit", "2025-04-01T00:01:00", {"i": 99}) == 6
    w.close()
    _, records, corrupt = read_journal(path)
    assert corrupt is None
    assert [r.seq for r in records] == [1, 2, 3, 4, 5, 6]


def test_truncated_tail_reported_and_recoverable(tmp_path):
    path = tmp_path / "log.bin"
    write_sample(path, n=10)
    whole = path.read_bytes()
    path.write_bytes(whole[:-3])  # torn final write

    with pytest.raises(CorruptLog):
        read_journal(path)  # strict mode refuses

    _, records, corrupt = read_journal(path, recover=True)
    assert corrupt is not None
    assert [r.seq for r in records] == list(range(1, 10))
    assert corrupt.details["last_good_id"] == 9

    truncate_to_valid(path, corrupt.details["valid_bytes"])
    _, records, corrupt = read_journal(path)
    assert corrupt is None
    assert len(records) == 9
    # and appending continues from the surviving tail
    w = JournalWriter(path)
    assert w.append("submit", "2025-04-01T00:02:00", {}) == 10
    w.close()


def test_random_cut_fuzz(tmp_path):
    rng = random.Random(77)
    path = tmp_path / "log.bin"
    write_sample(path, n=30)
    whole = path.read_bytes()
    header_end = len(MAGIC) + 8  # magic + frame sizes precede the header json
    for trial in range(40):
        cut = rng.randrange(header_end + 1, len(whole))
        target = tmp_path / f"cut-{trial}.bin"
        target.write_bytes(whole[:cut])
        _, records, corrupt = read_journal(target, recover=True)
        assert [r.seq for r in records] == list(range(1, len(records) + 1))
        if corrupt is not None:
            assert corrupt.details["valid_bytes"] <= cut
            truncate_to_valid(target, corrupt.details["valid_bytes"])
            _, again, c2 = read_journal(target)
            assert c2 is None
            assert len(again) == len(records)


def test_bit_flip_detected(tmp_path):
    rng = random.Random(9)
    path = tmp_path / "log.bin"
    write_sample(path, n=30)
    whole = bytearray(path.read_bytes())
    # flip one byte somewhere in the record region (past header area)
    idx = rng.randrange(len(whole) // 2, len(whole))
    whole[idx] ^= 0xFF
    path.write_bytes(bytes(whole))
    _, records, corrupt = read_journal(path, recover=True)
    assert corrupt is not None
    assert len(records) < 30
    assert [r.seq for r in records] == list(range(1, len(records) + 1))


def test_export_jsonl(tmp_path):
    path = tmp_path / "log.bin"
    write_sample(path, n=4)
    out = tmp_path / "log.jsonl"
    count = export_jsonl(path, out)
    assert count == 4
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 4
    row = json.loads(lines[2])
    assert row["seq"] == 3
    assert row["type"] == "submit"
    assert row["data"]["i"] == 2
