"""Signed grant package: the hand-off artifact from patient to grantee."""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..encoding import from_hex, int_to_hex, to_hex
from ..errors import ParseError

FIELDS = ("rid", "grantee", "expiration", "wrappedKey", "nonce", "signature")


def _int(value) -> int:
    if isinstance(value, bool):
        raise ParseError("boolean where integer expected")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        return int(value, 16) if value.lower().startswith("0x") else int(value)
    raise ParseError(f"expected integer or hex string, got {type(value).__name__}")


@dataclass(frozen=True)
class GrantPackage:
    rid: int
    grantee: bytes
    expiration: int
    wrapped_key: bytes
    nonce: int
    signature: bytes

    def to_dict(self) -> dict:
        return {
            "rid": int_to_hex(self.rid),
            "grantee": to_hex(self.grantee),
            "expiration": int_to_hex(self.expiration),
            "wrappedKey": to_hex(self.wrapped_key),
            "nonce": int_to_hex(self.nonce),
            "signature": to_hex(self.signature),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "GrantPackage":
        missing = [f for f in FIELDS if f not in d]
        if missing:
            raise ParseError(f"grant package missing fields: {', '.join(missing)}")
        try:
            return cls(
                rid=_int(d["rid"]),
                grantee=from_hex(d["grantee"]),
                expiration=_int(d["expiration"]),
                wrapped_key=from_hex(d["wrappedKey"]),
                nonce=_int(d["nonce"]),
                signature=from_hex(d["signature"]),
            )
        except (ValueError, TypeError, AttributeError) as exc:
            raise ParseError(f"bad grant package: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "GrantPackage":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"grant package is not JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ParseError("grant package must be a JSON object")
        return cls.from_dict(d)
