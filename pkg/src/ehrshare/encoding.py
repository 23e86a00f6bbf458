"""Canonical hex encoding: lowercase, 0x-prefixed."""

from __future__ import annotations


def to_hex(data: bytes) -> str:
    return "0x" + bytes(data).hex()


def from_hex(text: str) -> bytes:
    if text.startswith(("0x", "0X")):
        text = text[2:]
    try:
        return bytes.fromhex(text)
    except ValueError as exc:
        raise ValueError(f"invalid hex string: {text[:20]!r}") from exc


def int_to_hex(value: int) -> str:
    return hex(value)
