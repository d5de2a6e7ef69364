"""Unsigned LEB128 variable-length integers."""

from __future__ import annotations


def varint_len(value: int) -> int:
    if value < 0:
        raise ValueError(f"varints are unsigned, got {value}")
    n = 1
    while value >= 0x80:
        value >>= 7
        n += 1
    return n


def encode_varint(value: int) -> bytes:
    if value < 0:
        raise ValueError(f"varints are unsigned, got {value}")
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def decode_varint(buf, pos: int = 0) -> tuple[int, int]:
    """Read one varint from ``buf`` at ``pos``; return ``(value, next_pos)``."""
    value = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise ValueError("truncated varint")
        byte = buf[pos]
        pos += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, pos
        shift += 7
        if shift > 63:
            raise ValueError("varint too long")
