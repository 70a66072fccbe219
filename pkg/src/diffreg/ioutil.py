"""Shared file-format plumbing: binary headers, atomic writes, hashing."""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path


class FormatError(ValueError):
    """Corrupt or foreign file content (bad magic, version, or length)."""


class NumericError(RuntimeError):
    """Non-finite values encountered mid-computation; carries diagnostics."""


class Cursor:
    """Sequential reader over a bytes buffer with truncation checks."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError("truncated stream")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    def expect_magic(self, magic: bytes):
        got = self.take(len(magic))
        if got != magic:
            raise FormatError(f"bad magic {got!r}, expected {magic!r}")

    def done(self):
        if self.pos != len(self.data):
            raise FormatError(f"{len(self.data) - self.pos} unexpected trailing bytes")


def pack(fmt: str, *values) -> bytes:
    return struct.pack("<" + fmt, *values)


def atomic_write_bytes(path, data: bytes):
    """Write via temp file + rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
