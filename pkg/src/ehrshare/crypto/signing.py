"""Recoverable ECDSA over secp256k1 with low-s enforcement."""

from __future__ import annotations

from dataclasses import dataclass

import coincurve

from ..errors import ParseError, SignatureError
from .keys import CURVE_ORDER, HALF_ORDER, address_from_public_key

SIGNATURE_SIZE = 65


@dataclass(frozen=True)
class Signature:
    r: int
    s: int
    v: int  # recovery id, 0 or 1

    def to_bytes(self) -> bytes:
        """``r || s || v`` with ``v`` in the 27/28 convention."""
        return self.r.to_bytes(32, "big") + self.s.to_bytes(32, "big") + bytes([27 + self.v])

    @classmethod
    def from_bytes(cls, data: bytes) -> "Signature":
        if len(data) != SIGNATURE_SIZE:
            raise ParseError(f"signature must be {SIGNATURE_SIZE} bytes, got {len(data)}")
        v = data[64]
        if v >= 27:
            v -= 27
        return cls(int.from_bytes(data[:32], "big"), int.from_bytes(data[32:64], "big"), v)


def sign_digest(private_scalar: int, digest: bytes) -> Signature:
    if len(digest) != 32:
        raise ValueError("digest must be 32 bytes")
    raw = coincurve.PrivateKey(private_scalar.to_bytes(32, "big")).sign_recoverable(digest, hasher=None)
    sig = Signature(int.from_bytes(raw[:32], "big"), int.from_bytes(raw[32:64], "big"), raw[64])
    if sig.s > HALF_ORDER:
        # libsecp256k1 already normalizes; keep the rule explicit.
        sig = Signature(sig.r, CURVE_ORDER - sig.s, sig.v ^ 1)
    return sig


def recover_signer(digest: bytes, signature: Signature | bytes) -> bytes:
    """Address that produced ``signature`` over ``digest``.

    Rejects out-of-range r/s, high-s and recovery ids other than 0/1.
    """
    if len(digest) != 32:
        raise ValueError("digest must be 32 bytes")
    if not isinstance(signature, Signature):
        try:
            signature = Signature.from_bytes(bytes(signature))
        except ParseError as exc:
            raise SignatureError(str(exc)) from exc
    if signature.v not in (0, 1):
        raise SignatureError(f"invalid recovery id {signature.v}")
    if not (1 <= signature.r < CURVE_ORDER and 1 <= signature.s < CURVE_ORDER):
        raise SignatureError("r or s out of range")
    if signature.s > HALF_ORDER:
        raise SignatureError("non-canonical high-s signature")
    compact = signature.r.to_bytes(32, "big") + signature.s.to_bytes(32, "big") + bytes([signature.v])
    try:
        public = coincurve.PublicKey.from_signature_and_message(compact, digest, hasher=None)
    except Exception as exc:
        raise SignatureError("signature does not recover to a public key") from exc
    return address_from_public_key(public.format(compressed=False))
